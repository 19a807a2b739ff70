//! Truncated Fock-basis amplitudes for the two interferometer inputs and the post-selected
//! fixed-photon-number sector state.
//!
//! Mode `a` carries the coherent state `|α>`, `α = |α| e^{iθ_c}`:
//!
//! ```text
//! C_m = α^m e^{-|α|²/2} / sqrt(m!)
//! ```
//!
//! Mode `b` carries squeezed vacuum, `ζ = r e^{iθ_s}`:
//!
//! ```text
//! S_m = (e^{iθ_s} tanh r)^{m/2} H_m(0) / (2^{m/2} sqrt(m! cosh r))
//! ```
//!
//! With `θ_c = θ_s = 0` the squeezed quadrature is aligned with the coherent amplitude so that
//! the relative-number variance is minimized at the dark fringe.

use num_complex::Complex64;

use crate::error::{Error, Mode, Result};
use crate::specfun::{hermite_at_zero, log_factorial, HalfInt, SignedLog};

pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_HARD_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherentParams {
    pub magnitude: f64,
    pub phase: f64,
}

impl CoherentParams {
    pub fn new(magnitude: f64, phase: f64) -> Result<Self> {
        if !(magnitude.is_finite() && magnitude >= 0.0) {
            return Err(Error::invalid(
                "coherent magnitude",
                format!("must be finite and >= 0, got {magnitude}"),
            ));
        }
        if !phase.is_finite() {
            return Err(Error::invalid("coherent phase", "must be finite"));
        }
        Ok(CoherentParams {
            magnitude,
            phase: phase.rem_euclid(std::f64::consts::TAU),
        })
    }

    /// Real amplitude with the given mean photon number |α|².
    pub fn from_mean_photons(alpha2: f64) -> Result<Self> {
        if !(alpha2.is_finite() && alpha2 >= 0.0) {
            return Err(Error::invalid(
                "alpha2",
                format!("must be finite and >= 0, got {alpha2}"),
            ));
        }
        Self::new(alpha2.sqrt(), 0.0)
    }

    pub fn mean_photons(&self) -> f64 {
        self.magnitude * self.magnitude
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezeParams {
    pub strength: f64,
    pub phase: f64,
}

impl SqueezeParams {
    pub fn new(strength: f64, phase: f64) -> Result<Self> {
        if !(strength.is_finite() && strength >= 0.0) {
            return Err(Error::invalid(
                "squeezing strength",
                format!("must be finite and >= 0, got {strength}"),
            ));
        }
        if !phase.is_finite() {
            return Err(Error::invalid("squeezing phase", "must be finite"));
        }
        Ok(SqueezeParams {
            strength,
            phase: phase.rem_euclid(std::f64::consts::TAU),
        })
    }

    /// sinh²r, the mean photon number of the squeezed vacuum.
    pub fn mean_photons(&self) -> f64 {
        self.strength.sinh().powi(2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationPolicy {
    pub tail_tolerance: f64,
    pub hard_cap: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
            hard_cap: DEFAULT_HARD_CAP,
        }
    }
}

impl TruncationPolicy {
    pub fn new(tail_tolerance: f64, hard_cap: usize) -> Result<Self> {
        if !(tail_tolerance > 0.0 && tail_tolerance < 1.0) {
            return Err(Error::invalid(
                "tail tolerance",
                format!("must lie in (0, 1), got {tail_tolerance}"),
            ));
        }
        if hard_cap < 1 {
            return Err(Error::invalid("hard cap", "must be at least 1"));
        }
        Ok(TruncationPolicy {
            tail_tolerance,
            hard_cap,
        })
    }
}

/// Everything that defines one simulated experiment's input light.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputSpec {
    pub coherent: CoherentParams,
    pub squeeze: SqueezeParams,
    pub truncation: TruncationPolicy,
}

impl InputSpec {
    pub fn new(coherent: CoherentParams, squeeze: SqueezeParams, truncation: TruncationPolicy) -> Result<Self> {
        let spec = InputSpec {
            coherent,
            squeeze,
            truncation,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Default phases and truncation, parameterized by |α|² and r.
    pub fn from_alpha2(alpha2: f64, r: f64) -> Result<Self> {
        Self::new(
            CoherentParams::from_mean_photons(alpha2)?,
            SqueezeParams::new(r, 0.0)?,
            TruncationPolicy::default(),
        )
    }

    /// |α|² = sinh²r = n̄/2.
    pub fn optimal_split(mean_photons: f64, truncation: TruncationPolicy) -> Result<Self> {
        Self::with_split(mean_photons, 0.5, truncation)
    }

    /// |α|² = x·n̄ and sinh²r = (1-x)·n̄.
    pub fn with_split(mean_photons: f64, coherent_fraction: f64, truncation: TruncationPolicy) -> Result<Self> {
        if !(mean_photons.is_finite() && mean_photons >= 0.0) {
            return Err(Error::invalid(
                "mean photon number",
                format!("must be finite and >= 0, got {mean_photons}"),
            ));
        }
        if !(0.0..=1.0).contains(&coherent_fraction) {
            return Err(Error::invalid(
                "split",
                format!("must lie in [0, 1], got {coherent_fraction}"),
            ));
        }
        let alpha2 = coherent_fraction * mean_photons;
        let sinh2 = (1.0 - coherent_fraction) * mean_photons;
        Self::new(
            CoherentParams::from_mean_photons(alpha2)?,
            SqueezeParams::new(sinh2.sqrt().asinh(), 0.0)?,
            truncation,
        )
    }

    pub fn with_truncation(mut self, truncation: TruncationPolicy) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        CoherentParams::new(self.coherent.magnitude, self.coherent.phase)?;
        SqueezeParams::new(self.squeeze.strength, self.squeeze.phase)?;
        TruncationPolicy::new(self.truncation.tail_tolerance, self.truncation.hard_cap)?;
        if !self.mean_photons().is_finite() {
            return Err(Error::invalid("mean photon number", "overflows"));
        }
        Ok(())
    }

    pub fn alpha2(&self) -> f64 {
        self.coherent.mean_photons()
    }

    pub fn sinh2(&self) -> f64 {
        self.squeeze.mean_photons()
    }

    /// n̄ = |α|² + sinh²r
    pub fn mean_photons(&self) -> f64 {
        self.alpha2() + self.sinh2()
    }
}

/// One Fock amplitude as `exp(log_magnitude + i·phase)`; `-inf` magnitude is exact zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogAmplitude {
    pub log_magnitude: f64,
    pub phase: f64,
}

impl LogAmplitude {
    pub const ZERO: LogAmplitude = LogAmplitude {
        log_magnitude: f64::NEG_INFINITY,
        phase: 0.0,
    };

    pub fn is_zero(&self) -> bool {
        self.log_magnitude == f64::NEG_INFINITY
    }

    pub fn probability(&self) -> f64 {
        (2.0 * self.log_magnitude).exp()
    }

    pub fn to_complex(&self) -> Complex64 {
        if self.is_zero() {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::from_polar(self.log_magnitude.exp(), self.phase)
        }
    }

    fn from_signed(value: SignedLog, phase: f64) -> Self {
        match value.sign() {
            0 => Self::ZERO,
            s => LogAmplitude {
                log_magnitude: value.log_magnitude(),
                phase: if s < 0 { phase + std::f64::consts::PI } else { phase },
            },
        }
    }
}

/// Amplitudes of one mode for photon numbers `0..=n_max`, plus the discarded tail mass.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeVector {
    entries: Vec<LogAmplitude>,
    tail_mass: f64,
}

impl AmplitudeVector {
    pub fn entries(&self) -> &[LogAmplitude] {
        &self.entries
    }

    pub fn n_max(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn to_linear(&self) -> Vec<Complex64> {
        self.entries.iter().map(LogAmplitude::to_complex).collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(LogAmplitude::probability).collect()
    }
}

/// C_m in log form.
pub fn coherent_amplitude(params: &CoherentParams, m: usize) -> LogAmplitude {
    let alpha2 = params.mean_photons();
    if m == 0 {
        return LogAmplitude {
            log_magnitude: -0.5 * alpha2,
            phase: 0.0,
        };
    }
    if params.magnitude == 0.0 {
        return LogAmplitude::ZERO;
    }
    LogAmplitude {
        log_magnitude: m as f64 * params.magnitude.ln() - 0.5 * alpha2 - 0.5 * log_factorial(m as u64),
        phase: m as f64 * params.phase,
    }
}

/// S_m in log form; exact zero for odd `m`.
pub fn squeezed_amplitude(params: &SqueezeParams, m: usize) -> LogAmplitude {
    let r = params.strength;
    let ln_cosh = if r > 20.0 {
        r - std::f64::consts::LN_2 + (-2.0 * r).exp().ln_1p()
    } else {
        r.cosh().ln()
    };
    if m == 0 {
        return LogAmplitude {
            log_magnitude: -0.5 * ln_cosh,
            phase: 0.0,
        };
    }
    if m % 2 == 1 || r == 0.0 {
        return LogAmplitude::ZERO;
    }
    let half = (m / 2) as f64;
    let scale = half * r.tanh().ln() - half * std::f64::consts::LN_2 - 0.5 * log_factorial(m as u64) - 0.5 * ln_cosh;
    LogAmplitude::from_signed(hermite_at_zero(m as u64).scale_log(scale), half * params.phase)
}

/// Linear scan for the smallest cutoff whose discarded mass is within tolerance.
fn truncate(
    mode: Mode,
    policy: &TruncationPolicy,
    amplitude: impl Fn(usize) -> LogAmplitude,
) -> Result<AmplitudeVector> {
    let mut entries = Vec::new();
    // Kahan-compensated running mass.
    let (mut kept, mut comp) = (0.0f64, 0.0f64);
    for m in 0..=policy.hard_cap {
        let a = amplitude(m);
        let y = a.probability() - comp;
        let t = kept + y;
        comp = (t - kept) - y;
        kept = t;
        entries.push(a);
        let tail = (1.0 - kept).max(0.0);
        if tail <= policy.tail_tolerance {
            return Ok(AmplitudeVector {
                entries,
                tail_mass: tail,
            });
        }
    }
    Err(Error::Truncation {
        mode,
        hard_cap: policy.hard_cap,
        tail_mass: (1.0 - kept).max(0.0),
        tolerance: policy.tail_tolerance,
    })
}

pub fn coherent_amplitudes(params: &CoherentParams, policy: &TruncationPolicy) -> Result<AmplitudeVector> {
    truncate(Mode::Coherent, policy, |m| coherent_amplitude(params, m))
}

pub fn squeezed_vacuum_amplitudes(params: &SqueezeParams, policy: &TruncationPolicy) -> Result<AmplitudeVector> {
    truncate(Mode::Squeezed, policy, |m| squeezed_amplitude(params, m))
}

/// Per-mode cutoffs `(n_max_a, n_max_b)`.
pub fn choose_cutoff(spec: &InputSpec) -> Result<(usize, usize)> {
    let a = coherent_amplitudes(&spec.coherent, &spec.truncation)?;
    let b = squeezed_vacuum_amplitudes(&spec.squeeze, &spec.truncation)?;
    Ok((a.n_max(), b.n_max()))
}

/// Normalized post-selected state `Σ_μ A_μ |N/2-μ>_a |N/2+μ>_b`.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorState {
    total_n: usize,
    amplitudes: Vec<Complex64>,
}

impl SectorState {
    /// Wraps and normalizes raw amplitudes indexed by `μ + N/2`.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::invalid("sector amplitudes", "must not be empty"));
        }
        let total_n = amplitudes.len() - 1;
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::EmptySector { total_n });
        }
        Ok(SectorState {
            total_n,
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
        })
    }

    pub fn total_n(&self) -> usize {
        self.total_n
    }

    pub fn j(&self) -> HalfInt {
        HalfInt::from_doubled(self.total_n as i64)
    }

    /// Amplitudes indexed by `μ + N/2`.
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, mu: HalfInt) -> Option<Complex64> {
        let k = mu.doubled() + self.total_n as i64;
        if k < 0 || k % 2 != 0 {
            return None;
        }
        self.amplitudes.get((k / 2) as usize).copied()
    }

    /// `μ` for the amplitude at `index`.
    pub fn mu_at(&self, index: usize) -> HalfInt {
        HalfInt::from_doubled(2 * index as i64 - self.total_n as i64)
    }
}

/// Post-selects the input onto `N_a + N_b = total_n`: `A_μ ∝ C_{N/2-μ} S_{N/2+μ}`.
pub fn sector_amplitudes(spec: &InputSpec, total_n: usize) -> Result<SectorState> {
    spec.validate()?;
    let (na, nb) = choose_cutoff(spec)?;
    if total_n > na + nb {
        return Err(Error::invalid(
            "total_n",
            format!("{total_n} exceeds the truncated support {} of this input", na + nb),
        ));
    }
    let logs: Vec<LogAmplitude> = (0..=total_n)
        .map(|k| {
            let c = coherent_amplitude(&spec.coherent, total_n - k);
            let s = squeezed_amplitude(&spec.squeeze, k);
            if c.is_zero() || s.is_zero() {
                LogAmplitude::ZERO
            } else {
                LogAmplitude {
                    log_magnitude: c.log_magnitude + s.log_magnitude,
                    phase: c.phase + s.phase,
                }
            }
        })
        .collect();
    let peak = logs.iter().map(|a| a.log_magnitude).fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return Err(Error::EmptySector { total_n });
    }
    let amplitudes = logs
        .iter()
        .map(|a| {
            LogAmplitude {
                log_magnitude: a.log_magnitude - peak,
                phase: a.phase,
            }
            .to_complex()
        })
        .collect();
    SectorState::from_amplitudes(amplitudes)
}
