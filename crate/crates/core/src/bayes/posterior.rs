use std::collections::BTreeMap;

use rayon::prelude::*;

use super::likelihood::{LikelihoodPlan, PhaseGrid, SectorLikelihood};
use super::sampling::MeasurementRecord;
use crate::error::{Error, Result};
use crate::states::InputSpec;

/// Floor applied before taking logarithms of likelihood values.
pub const LOG_FLOOR: f64 = 1e-300;

pub const DEFAULT_LEVEL: f64 = 0.68;

/// Posterior over the phase grid under a flat prior on `[0, π]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Posterior {
    grid: PhaseGrid,
    log_weights: Vec<f64>,
}

impl Posterior {
    /// Normalizes arbitrary log weights so that `Σ w_k Δφ = 1`.
    pub fn from_log_weights(log_weights: Vec<f64>) -> Result<Self> {
        let grid = PhaseGrid::new(log_weights.len())?;
        let peak = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !peak.is_finite() {
            return Err(Error::invalid("log weights", "need at least one finite entry"));
        }
        let total: f64 = log_weights.iter().map(|w| (w - peak).exp()).sum::<f64>() * grid.spacing();
        let shift = peak + total.ln();
        Ok(Posterior {
            grid,
            log_weights: log_weights.into_iter().map(|w| w - shift).collect(),
        })
    }

    pub fn flat(grid_size: usize) -> Result<Self> {
        Self::from_log_weights(vec![0.0; grid_size])
    }

    pub fn grid(&self) -> PhaseGrid {
        self.grid
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Densities with `Σ w_k Δφ = 1`.
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }
}

/// Grid phase of largest weight; ties go to the smallest phase.
pub fn map_estimate(post: &Posterior) -> f64 {
    post.grid.point(map_index(post.log_weights()))
}

pub(crate) fn map_index(log_weights: &[f64]) -> usize {
    let mut best = 0;
    for (k, &w) in log_weights.iter().enumerate() {
        if w > log_weights[best] {
            best = k;
        }
    }
    best
}

/// Half-width of the highest-density region holding `level` of the mass, grown outward from
/// the MAP point; never less than one grid spacing.
pub fn confidence_interval(post: &Posterior, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", format!("must lie in (0, 1), got {level}")));
    }
    Ok(hpd_half_width(post.log_weights(), post.grid.spacing(), level))
}

/// Works on unnormalized log weights.
pub(crate) fn hpd_half_width(log_weights: &[f64], spacing: f64, level: f64) -> f64 {
    let centre = map_index(log_weights);
    let peak = log_weights[centre];
    let w: Vec<f64> = log_weights.iter().map(|x| (x - peak).exp()).collect();
    let total: f64 = w.iter().sum();
    let target = level * total;
    let (mut lo, mut hi) = (centre, centre);
    let mut mass = w[centre];
    let mut cells = if mass >= target { target / w[centre] } else { 1.0 };
    while mass < target {
        let left = if lo > 0 { w[lo - 1] } else { -1.0 };
        let right = if hi + 1 < w.len() { w[hi + 1] } else { -1.0 };
        let next = if right > left {
            hi += 1;
            right
        } else {
            lo -= 1;
            left
        };
        if mass + next >= target {
            cells += (target - mass) / next;
            mass = target;
        } else {
            cells += 1.0;
            mass += next;
        }
    }
    (0.5 * cells * spacing).max(spacing)
}

/// Σ_i ln P(outcome_i | φ) per grid point, unnormalized.
pub(crate) fn log_likelihood(spec: &InputSpec, outcomes: &[(u32, u32)], plan: &LikelihoodPlan) -> Result<Vec<f64>> {
    let mut counts: BTreeMap<(usize, u32), u32> = BTreeMap::new();
    for &(c, d) in outcomes {
        *counts.entry(((c + d) as usize, c)).or_default() += 1;
    }
    let mut by_sector: BTreeMap<usize, Vec<(u32, u32)>> = BTreeMap::new();
    for ((n, c), k) in counts {
        by_sector.entry(n).or_default().push((c, k));
    }
    let sectors: Vec<(usize, Vec<(u32, u32)>)> = by_sector.into_iter().collect();
    let partials: Vec<Result<Vec<f64>>> = sectors
        .par_iter()
        .map(|(n, list)| {
            let mut engine = SectorLikelihood::new(spec, *n, plan);
            let mut acc = vec![0.0; plan.grid().size()];
            for &(c, k) in list {
                let curve = engine.curve(c as usize);
                check_possible(&curve, c, *n as u32 - c)?;
                for (a, p) in acc.iter_mut().zip(&curve) {
                    *a += f64::from(k) * p.max(LOG_FLOOR).ln();
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![0.0; plan.grid().size()];
    for part in partials {
        for (t, v) in total.iter_mut().zip(part?) {
            *t += v;
        }
    }
    Ok(total)
}

pub(crate) fn check_possible(curve: &[f64], n_c: u32, n_d: u32) -> Result<()> {
    if curve.iter().all(|&p| p < LOG_FLOOR) {
        return Err(Error::ImpossibleOutcome { n_c, n_d });
    }
    Ok(())
}

/// Posterior for one record on a grid of `grid_size` points.
pub fn posterior(spec: &InputSpec, record: &MeasurementRecord, grid_size: usize) -> Result<Posterior> {
    spec.validate()?;
    let plan = LikelihoodPlan::new(PhaseGrid::new(grid_size)?);
    Posterior::from_log_weights(log_likelihood(spec, &record.outcomes, &plan)?)
}
