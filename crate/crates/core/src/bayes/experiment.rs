use std::collections::BTreeMap;

use rayon::prelude::*;

use super::likelihood::{LikelihoodPlan, PhaseGrid, SectorLikelihood};
use super::posterior::{check_possible, hpd_half_width, map_index, DEFAULT_LEVEL, LOG_FLOOR};
use super::sampling::{trial_seed, OutcomeSampler};
use crate::error::{Error, Result};
use crate::outcome::outcome_table;
use crate::states::InputSpec;

pub const DEFAULT_GRID: usize = 4096;
pub const MAX_GRID: usize = 1 << 16;
/// Widths narrower than this many grid spacings trigger a finer grid.
pub const MIN_RESOLVED_SPACINGS: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub grid_size: usize,
    pub max_grid_size: usize,
    pub level: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            grid_size: DEFAULT_GRID,
            max_grid_size: MAX_GRID,
            level: DEFAULT_LEVEL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialSummary {
    pub delta_theta: f64,
    pub map_phase: f64,
    pub photons: u64,
    /// A second local maximum above 1% of the peak lies more than five widths away.
    pub multimodal: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityResult {
    /// Mean over trials of the HPD half-width.
    pub delta_theta: f64,
    /// Mean over trials of the MAP estimate.
    pub map_phase: f64,
    pub trials: usize,
    /// Standard deviation of the per-trial half-widths.
    pub dispersion: f64,
    pub grid_size: usize,
    pub mean_photons: f64,
    pub multimodal_trials: usize,
    pub per_trial: Vec<TrialSummary>,
}

impl SensitivityResult {
    /// Root-mean-square deviation of the MAP estimates from `theta_true`.
    pub fn map_rmse(&self, theta_true: f64) -> f64 {
        let n = self.per_trial.len().max(1) as f64;
        (self
            .per_trial
            .iter()
            .map(|t| (t.map_phase - theta_true).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    }
}

/// Distinct outcomes, grouped by sector, with the trials that observed them.
struct Observations {
    sectors: Vec<(usize, Vec<(u32, Vec<(usize, u32)>)>)>,
    photons: Vec<u64>,
}

fn observe(sampler: &OutcomeSampler, p: usize, trials: usize, seed: u64) -> Observations {
    let records: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|i| sampler.record(p, trial_seed(seed, i as u64)))
        .collect();
    let mut index: BTreeMap<usize, BTreeMap<u32, Vec<(usize, u32)>>> = BTreeMap::new();
    let mut photons = Vec::with_capacity(trials);
    for (i, rec) in records.iter().enumerate() {
        photons.push(rec.photons());
        let mut counts: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        for &o in &rec.outcomes {
            *counts.entry(o).or_default() += 1;
        }
        for ((c, d), k) in counts {
            index
                .entry((c + d) as usize)
                .or_default()
                .entry(c)
                .or_default()
                .push((i, k));
        }
    }
    Observations {
        sectors: index.into_iter().map(|(n, m)| (n, m.into_iter().collect())).collect(),
        photons,
    }
}

fn accumulate(spec: &InputSpec, obs: &Observations, trials: usize, plan: &LikelihoodPlan) -> Result<Vec<Vec<f64>>> {
    let g = plan.grid().size();
    let mut acc = vec![vec![0.0; g]; trials];
    for (n, outcomes) in &obs.sectors {
        let curves: Vec<Result<Vec<f64>>> = outcomes
            .par_iter()
            .map_init(
                || SectorLikelihood::new(spec, *n, plan),
                |engine, (c, _)| {
                    let curve = engine.curve(*c as usize);
                    check_possible(&curve, *c, *n as u32 - c)?;
                    Ok(curve.into_iter().map(|p| p.max(LOG_FLOOR).ln()).collect())
                },
            )
            .collect();
        for ((_, seen), curve) in outcomes.iter().zip(curves) {
            let curve = curve?;
            for &(trial, k) in seen {
                let k = f64::from(k);
                for (a, l) in acc[trial].iter_mut().zip(&curve) {
                    *a += k * l;
                }
            }
        }
    }
    Ok(acc)
}

fn multimodal(log_weights: &[f64], centre: usize, half_width_cells: f64) -> bool {
    let peak = log_weights[centre];
    let threshold = peak + 0.01f64.ln();
    let exclusion = (5.0 * half_width_cells).ceil() as usize + 1;
    (1..log_weights.len() - 1).any(|k| {
        k.abs_diff(centre) > exclusion
            && log_weights[k] >= threshold
            && log_weights[k] >= log_weights[k - 1]
            && log_weights[k] >= log_weights[k + 1]
    })
}

/// Runs `trials` seeded experiments of `p` measurements each at phase `theta_true`.
pub fn sensitivity_experiment(
    spec: &InputSpec,
    theta_true: f64,
    p: usize,
    trials: usize,
    seed: u64,
) -> Result<SensitivityResult> {
    sensitivity_experiment_with(spec, theta_true, p, trials, seed, ExperimentConfig::default())
}

pub fn sensitivity_experiment_with(
    spec: &InputSpec,
    theta_true: f64,
    p: usize,
    trials: usize,
    seed: u64,
    config: ExperimentConfig,
) -> Result<SensitivityResult> {
    spec.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    if !(config.level > 0.0 && config.level < 1.0) {
        return Err(Error::invalid(
            "level",
            format!("must lie in (0, 1), got {}", config.level),
        ));
    }
    let mut grid = PhaseGrid::new(config.grid_size)?;
    let table = outcome_table(spec, theta_true)?;
    let sampler = OutcomeSampler::new(&table)?;
    let obs = observe(&sampler, p, trials, seed);

    loop {
        let plan = LikelihoodPlan::new(grid);
        let acc = accumulate(spec, &obs, trials, &plan).map_err(|e| match e {
            Error::ImpossibleOutcome { n_c, n_d } => {
                let trial = obs
                    .sectors
                    .iter()
                    .find(|(n, _)| *n == (n_c + n_d) as usize)
                    .and_then(|(_, list)| list.iter().find(|(c, _)| *c == n_c))
                    .and_then(|(_, seen)| seen.first())
                    .map_or(0, |s| s.0);
                Error::Trial {
                    trial,
                    source: Box::new(e),
                }
            }
            other => other,
        })?;
        let spacing = grid.spacing();
        let per_trial: Vec<TrialSummary> = acc
            .par_iter()
            .zip(obs.photons.par_iter())
            .map(|(lw, &photons)| {
                let centre = map_index(lw);
                let delta_theta = hpd_half_width(lw, spacing, config.level);
                TrialSummary {
                    delta_theta,
                    map_phase: grid.point(centre),
                    photons,
                    multimodal: multimodal(lw, centre, delta_theta / spacing),
                }
            })
            .collect();
        let unresolved = per_trial
            .iter()
            .any(|t| t.delta_theta < MIN_RESOLVED_SPACINGS * spacing);
        let next = 2 * (grid.size() - 1) + 1;
        if unresolved && next <= config.max_grid_size.max(grid.size()) {
            grid = PhaseGrid::new(next)?;
            continue;
        }
        return Ok(summarize(per_trial, grid.size()));
    }
}

fn summarize(per_trial: Vec<TrialSummary>, grid_size: usize) -> SensitivityResult {
    let n = per_trial.len() as f64;
    let mean = per_trial.iter().map(|t| t.delta_theta).sum::<f64>() / n;
    let var = per_trial.iter().map(|t| (t.delta_theta - mean).powi(2)).sum::<f64>() / n;
    SensitivityResult {
        delta_theta: mean,
        map_phase: per_trial.iter().map(|t| t.map_phase).sum::<f64>() / n,
        trials: per_trial.len(),
        dispersion: var.sqrt(),
        grid_size,
        mean_photons: per_trial.iter().map(|t| t.photons as f64).sum::<f64>() / n,
        multimodal_trials: per_trial.iter().filter(|t| t.multimodal).count(),
        per_trial,
    }
}
