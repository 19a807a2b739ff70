//! Simulated phase-estimation experiments: seeded outcome sampling, grid posteriors under a
//! flat prior on `[0, π]`, MAP estimates and highest-density 68% half-widths.

mod experiment;
mod likelihood;
mod posterior;
mod sampling;

pub use experiment::{
    sensitivity_experiment, sensitivity_experiment_with, ExperimentConfig, SensitivityResult, TrialSummary,
    DEFAULT_GRID, MAX_GRID, MIN_RESOLVED_SPACINGS,
};
pub use likelihood::{likelihood_curve, LikelihoodPlan, PhaseGrid, SectorLikelihood, MIN_GRID};
pub use posterior::{confidence_interval, map_estimate, posterior, Posterior, DEFAULT_LEVEL, LOG_FLOOR};
pub use sampling::{sample_outcomes, trial_seed, MeasurementRecord, OutcomeSampler, MIN_SAMPLING_MASS};
