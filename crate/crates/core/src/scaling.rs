//! Fixed-budget scans: spread `N_T = p·n̄` photons over `p` measurements, locate the best `p`
//! and fit `Δθ ≈ c/N_T`.

use std::f64::consts::FRAC_PI_2;

use crate::bayes::{sensitivity_experiment_with, trial_seed, ExperimentConfig};
use crate::error::{Error, Result};
use crate::sensitivity::crlb;
use crate::states::{InputSpec, TruncationPolicy};

/// RMS of the log residuals above which the `c/N_T` model is rejected.
pub const POOR_FIT_RESIDUAL: f64 = 0.1;

pub const DEFAULT_P_VALUES: [usize; 10] = [10, 15, 20, 25, 30, 40, 50, 60, 80, 100];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingConfig {
    /// Largest mean photon number per measurement that is simulated.
    pub max_mean_photons: f64,
    pub truncation: TruncationPolicy,
    pub theta_true: f64,
    pub experiment: ExperimentConfig,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            max_mean_photons: 100.0,
            truncation: TruncationPolicy {
                tail_tolerance: 1e-8,
                hard_cap: 8192,
            },
            theta_true: FRAC_PI_2,
            experiment: ExperimentConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanPoint {
    pub p: usize,
    /// n̄ = N_T / p
    pub mean_photons: f64,
    pub mean_delta_theta: f64,
    pub dispersion: f64,
    /// Average over trials of the photons actually detected.
    pub photons_burnt: f64,
    pub multimodal_trials: usize,
    pub grid_size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkippedPoint {
    pub p: usize,
    pub mean_photons: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BudgetScan {
    pub total_budget: f64,
    /// Sorted by `p`.
    pub points: Vec<ScanPoint>,
    pub skipped: Vec<SkippedPoint>,
}

/// Seed of the experiment at `(budget, p)`.
pub fn point_seed(seed: u64, total_budget: f64, p: usize) -> u64 {
    trial_seed(trial_seed(seed, total_budget.to_bits()), p as u64)
}

fn check_budget(total_budget: f64) -> Result<()> {
    if !(total_budget.is_finite() && total_budget > 0.0) {
        return Err(Error::invalid(
            "total budget",
            format!("must be positive, got {total_budget}"),
        ));
    }
    Ok(())
}

fn run_point(
    total_budget: f64,
    p: usize,
    trials: usize,
    seed: u64,
    config: &ScalingConfig,
) -> Result<std::result::Result<ScanPoint, SkippedPoint>> {
    let n_bar = total_budget / p as f64;
    let skip = |reason: String| {
        Ok(Err(SkippedPoint {
            p,
            mean_photons: n_bar,
            reason,
        }))
    };
    if n_bar > config.max_mean_photons {
        return skip(format!("n̄ = {n_bar} exceeds the ceiling {}", config.max_mean_photons));
    }
    let spec = InputSpec::optimal_split(n_bar, config.truncation)?;
    match sensitivity_experiment_with(
        &spec,
        config.theta_true,
        p,
        trials,
        point_seed(seed, total_budget, p),
        config.experiment,
    ) {
        Ok(res) => Ok(Ok(ScanPoint {
            p,
            mean_photons: n_bar,
            mean_delta_theta: res.delta_theta,
            dispersion: res.dispersion,
            photons_burnt: res.mean_photons,
            multimodal_trials: res.multimodal_trials,
            grid_size: res.grid_size,
        })),
        Err(e @ (Error::Truncation { .. } | Error::MemoryCeiling { .. })) => skip(e.to_string()),
        Err(e) => Err(e),
    }
}

pub fn scan_p(total_budget: f64, p_values: &[usize], trials: usize, seed: u64) -> Result<BudgetScan> {
    scan_p_with(total_budget, p_values, trials, seed, &ScalingConfig::default())
}

/// One experiment per `p` at the optimal split `|α|² = sinh²r = N_T/(2p)`.
pub fn scan_p_with(
    total_budget: f64,
    p_values: &[usize],
    trials: usize,
    seed: u64,
    config: &ScalingConfig,
) -> Result<BudgetScan> {
    check_budget(total_budget)?;
    if p_values.contains(&0) {
        return Err(Error::invalid("p", "every value must be at least 1"));
    }
    let mut ps = p_values.to_vec();
    ps.sort_unstable();
    ps.dedup();
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for p in ps {
        match run_point(total_budget, p, trials, seed, config)? {
            Ok(point) => points.push(point),
            Err(skip) => skipped.push(skip),
        }
    }
    Ok(BudgetScan {
        total_budget,
        points,
        skipped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct POpt {
    pub p: usize,
    /// The minimum sits on the first or last scanned `p`.
    pub inconclusive: bool,
}

fn argmin_by(values: &[(usize, f64)]) -> Result<POpt> {
    if values.len() < 3 {
        return Err(Error::invalid(
            "scan",
            format!("need at least 3 points, got {}", values.len()),
        ));
    }
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if v.1 < values[best].1 {
            best = i;
        }
    }
    Ok(POpt {
        p: values[best].0,
        inconclusive: best == 0 || best == values.len() - 1,
    })
}

/// `p` of smallest mean Δθ; ties go to the smaller `p`.
pub fn find_p_opt(scan: &BudgetScan) -> Result<POpt> {
    let values: Vec<(usize, f64)> = scan.points.iter().map(|pt| (pt.p, pt.mean_delta_theta)).collect();
    argmin_by(&values)
}

/// `p` minimizing the mean of `ln Δθ` over the budgets, among values scanned in every budget.
pub fn common_p_opt(scans: &[BudgetScan]) -> Result<POpt> {
    let Some(first) = scans.first() else {
        return Err(Error::invalid("scans", "need at least one budget"));
    };
    let values: Vec<(usize, f64)> = first
        .points
        .iter()
        .filter_map(|pt| {
            let logs: Option<Vec<f64>> = scans
                .iter()
                .map(|s| s.points.iter().find(|q| q.p == pt.p).map(|q| q.mean_delta_theta.ln()))
                .collect();
            logs.map(|l| (pt.p, l.iter().sum::<f64>() / l.len() as f64))
        })
        .collect();
    argmin_by(&values)
}

/// Single-parameter fit of `Δθ = c/N_T` in log space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrefactorFit {
    pub prefactor: f64,
    /// RMS of `ln Δθ - ln(c/N_T)`.
    pub residual: f64,
    /// Free least-squares slope of `ln Δθ` against `ln N_T`.
    pub slope: f64,
    pub poor_fit: bool,
}

pub fn fit_prefactor(points: &[(f64, f64)]) -> Result<PrefactorFit> {
    if points.len() < 2 {
        return Err(Error::invalid("fit points", "need at least 2"));
    }
    if points.iter().any(|&(n, d)| !(n > 0.0 && d > 0.0)) {
        return Err(Error::invalid("fit points", "budgets and widths must be positive"));
    }
    let k = points.len() as f64;
    let ln_c = points.iter().map(|&(n, d)| d.ln() + n.ln()).sum::<f64>() / k;
    let residual = (points
        .iter()
        .map(|&(n, d)| (d.ln() - (ln_c - n.ln())).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    let mx = points.iter().map(|p| p.0.ln()).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0.ln() - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0.ln() - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    Ok(PrefactorFit {
        prefactor: ln_c.exp(),
        residual,
        slope,
        poor_fit: residual > POOR_FIT_RESIDUAL,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeisenbergPoint {
    pub total_budget: f64,
    pub mean_delta_theta: f64,
    pub dispersion: f64,
    /// 1/√(p_opt(|α|²e^{2r} + sinh²r))
    pub crlb_overlay: f64,
    /// 1/√(p_opt(|α|² + sinh²r))
    pub shot_noise_overlay: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeisenbergFit {
    pub p_opt: usize,
    pub fit: PrefactorFit,
    pub points: Vec<HeisenbergPoint>,
}

pub fn heisenberg_fit(budgets: &[f64], p_opt: usize, trials: usize, seed: u64) -> Result<HeisenbergFit> {
    heisenberg_fit_with(budgets, p_opt, trials, seed, &ScalingConfig::default())
}

/// Experiments at `p_opt` for each budget and the `c/N_T` fit through them.
pub fn heisenberg_fit_with(
    budgets: &[f64],
    p_opt: usize,
    trials: usize,
    seed: u64,
    config: &ScalingConfig,
) -> Result<HeisenbergFit> {
    if budgets.len() < 3 {
        return Err(Error::invalid(
            "budgets",
            format!("need at least 3, got {}", budgets.len()),
        ));
    }
    if p_opt == 0 {
        return Err(Error::invalid("p", "must be at least 1"));
    }
    let mut points = Vec::new();
    for &nt in budgets {
        check_budget(nt)?;
        let point = match run_point(nt, p_opt, trials, seed, config)? {
            Ok(pt) => pt,
            Err(skip) => {
                return Err(Error::invalid(
                    "budgets",
                    format!("N_T = {nt} is infeasible: {}", skip.reason),
                ));
            }
        };
        let spec = InputSpec::optimal_split(point.mean_photons, config.truncation)?;
        points.push(HeisenbergPoint {
            total_budget: nt,
            mean_delta_theta: point.mean_delta_theta,
            dispersion: point.dispersion,
            crlb_overlay: crlb(&spec, p_opt as u64)?,
            shot_noise_overlay: 1.0 / (p_opt as f64 * spec.mean_photons()).sqrt(),
        });
    }
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.total_budget, p.mean_delta_theta)).collect();
    Ok(HeisenbergFit {
        p_opt,
        fit: fit_prefactor(&pairs)?,
        points,
    })
}
