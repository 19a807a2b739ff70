use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::outcome::OutcomeTable;

/// Minimum table coverage accepted for sampling.
pub const MIN_SAMPLING_MASS: f64 = 1.0 - 1e-6;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed of trial `index`: output `index + 1` of a SplitMix64 stream started at `seed`.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One simulated experiment: `p` detected `(n_c, n_d)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub outcomes: Vec<(u32, u32)>,
    pub seed: u64,
    pub theta_true: f64,
}

impl MeasurementRecord {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// Σ (n_c + n_d), the photons spent on this record.
    pub fn photons(&self) -> u64 {
        self.outcomes.iter().map(|&(c, d)| u64::from(c) + u64::from(d)).sum()
    }
}

/// Inverse-CDF sampler over the kept outcomes of a table, renormalized to unit mass.
#[derive(Clone, Debug)]
pub struct OutcomeSampler {
    outcomes: Vec<(u32, u32)>,
    cumulative: Vec<f64>,
    theta: f64,
}

impl OutcomeSampler {
    pub fn new(table: &OutcomeTable) -> Result<Self> {
        let mass = table.kept_mass();
        if !(mass >= MIN_SAMPLING_MASS) {
            return Err(Error::UndercoveredTable {
                kept_mass: mass,
                required: MIN_SAMPLING_MASS,
            });
        }
        let mut outcomes = Vec::new();
        let mut cumulative = Vec::new();
        let mut running = 0.0;
        for (n_c, n_d, p) in table.iter() {
            if p > 0.0 {
                running += p;
                outcomes.push((n_c, n_d));
                cumulative.push(running / mass);
            }
        }
        Ok(OutcomeSampler {
            outcomes,
            cumulative,
            theta: table.theta(),
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (u32, u32) {
        let u: f64 = rng.gen();
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.outcomes[i.min(self.outcomes.len() - 1)]
    }

    /// `p` draws from a generator seeded with `seed`.
    pub fn record(&self, p: usize, seed: u64) -> MeasurementRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MeasurementRecord {
            outcomes: (0..p).map(|_| self.draw(&mut rng)).collect(),
            seed,
            theta_true: self.theta,
        }
    }
}

pub fn sample_outcomes(table: &OutcomeTable, p: usize, seed: u64) -> Result<MeasurementRecord> {
    Ok(OutcomeSampler::new(table)?.record(p, seed))
}
