//! Phase-sensitivity figures of merit.
//!
//! With `θ_c = θ_s = 0` the squeezed quadrature is aligned with the coherent amplitude
//! (`θ_s - 2θ_c = 0`). That alignment is the one under which the moment-based formula
//!
//! ```text
//! Δθ = (1/√p) sqrt( (|α|²e^{-2r} + sinh²r) / (|α|² - sinh²r)²
//!                 + (|α|² + 2 sinh²r cosh²r) / ((|α|² - sinh²r)² tan²θ) )
//! ```
//!
//! agrees with the variance of `N_c - N_d` computed from outcome tables.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::outcome::{marginal_one_port, moments, outcome_table, Port, SectorInput};
use crate::states::{choose_cutoff, InputSpec};

pub const FD_STEP: f64 = 1e-4;
pub const RICHARDSON_TOLERANCE: f64 = 1e-4;
pub const PROBABILITY_FLOOR: f64 = 1e-30;

/// Numeric Fisher information together with its convergence diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FisherEstimate {
    /// Richardson-extrapolated value.
    pub value: f64,
    pub at_step: f64,
    pub at_half_step: f64,
    /// |F(h/2) - F(h)| / F(h/2)
    pub relative_gap: f64,
    /// Probability carried by outcomes excluded for falling below the floor.
    pub floored_mass: f64,
    pub floored_outcomes: usize,
}

fn check_open_theta(theta: f64, step: f64) -> Result<()> {
    if !(theta - step > 0.0 && theta + step < std::f64::consts::PI) {
        return Err(Error::invalid(
            "theta",
            format!("must lie in (0, π) at least {step} from either end, got {theta}"),
        ));
    }
    Ok(())
}

fn check_p(p: u64) -> Result<()> {
    if p == 0 {
        return Err(Error::invalid("p", "must be at least 1"));
    }
    Ok(())
}

/// Probabilities at θ, θ±h, θ±h/2 for the same list of outcomes.
struct Stencil {
    center: Vec<f64>,
    plus: Vec<f64>,
    minus: Vec<f64>,
    plus_half: Vec<f64>,
    minus_half: Vec<f64>,
}

#[derive(Default, Clone, Copy)]
struct Partial {
    at_step: f64,
    at_half_step: f64,
    floored_mass: f64,
    floored_outcomes: usize,
}

impl Partial {
    fn merge(self, other: Partial) -> Partial {
        Partial {
            at_step: self.at_step + other.at_step,
            at_half_step: self.at_half_step + other.at_half_step,
            floored_mass: self.floored_mass + other.floored_mass,
            floored_outcomes: self.floored_outcomes + other.floored_outcomes,
        }
    }
}

impl Stencil {
    fn accumulate(&self, h: f64) -> Partial {
        let mut acc = Partial::default();
        for i in 0..self.center.len() {
            let p = self.center[i];
            if p < PROBABILITY_FLOOR {
                acc.floored_mass += p;
                acc.floored_outcomes += 1;
                continue;
            }
            let d = (self.plus[i] - self.minus[i]) / (2.0 * h);
            let d_half = (self.plus_half[i] - self.minus_half[i]) / h;
            acc.at_step += d * d / p;
            acc.at_half_step += d_half * d_half / p;
        }
        acc
    }
}

fn finish(acc: Partial) -> Result<FisherEstimate> {
    let scale = acc.at_half_step.abs().max(f64::MIN_POSITIVE);
    let relative_gap = (acc.at_half_step - acc.at_step).abs() / scale;
    if acc.at_half_step > 0.0 && relative_gap > RICHARDSON_TOLERANCE {
        return Err(Error::NonConvergence {
            what: format!(
                "Fisher information {} at step {FD_STEP} vs {} at half step",
                acc.at_step, acc.at_half_step
            ),
        });
    }
    Ok(FisherEstimate {
        value: ((4.0 * acc.at_half_step - acc.at_step) / 3.0).max(0.0),
        at_step: acc.at_step,
        at_half_step: acc.at_half_step,
        relative_gap: if acc.at_half_step > 0.0 { relative_gap } else { 0.0 },
        floored_mass: acc.floored_mass,
        floored_outcomes: acc.floored_outcomes,
    })
}

/// F(θ) = Σ (∂P/∂θ)² / P over all outcomes, by central differences.
pub fn fisher_information(spec: &InputSpec, theta: f64) -> Result<f64> {
    fisher_information_detailed(spec, theta).map(|f| f.value)
}

pub fn fisher_information_detailed(spec: &InputSpec, theta: f64) -> Result<FisherEstimate> {
    spec.validate()?;
    let h = FD_STEP;
    check_open_theta(theta, h)?;
    let (na, nb) = choose_cutoff(spec)?;
    let skip_below = spec.truncation.tail_tolerance / 100.0;
    let acc = (0..=na + nb)
        .into_par_iter()
        .map(|n| {
            let input = SectorInput::new(spec, n);
            if input.weight < skip_below {
                return Partial::default();
            }
            Stencil {
                center: input.probabilities(theta),
                plus: input.probabilities(theta + h),
                minus: input.probabilities(theta - h),
                plus_half: input.probabilities(theta + h / 2.0),
                minus_half: input.probabilities(theta - h / 2.0),
            }
            .accumulate(h)
        })
        .reduce(Partial::default, Partial::merge);
    finish(acc)
}

/// Fisher information of the count at a single output port.
pub fn fisher_one_port(spec: &InputSpec, theta: f64, port: Port) -> Result<f64> {
    fisher_one_port_detailed(spec, theta, port).map(|f| f.value)
}

pub fn fisher_one_port_detailed(spec: &InputSpec, theta: f64, port: Port) -> Result<FisherEstimate> {
    spec.validate()?;
    let h = FD_STEP;
    check_open_theta(theta, h)?;
    let marginal = |t: f64| outcome_table(spec, t).map(|tab| marginal_one_port(&tab, port));
    let mut stencil = Stencil {
        center: marginal(theta)?,
        plus: marginal(theta + h)?,
        minus: marginal(theta - h)?,
        plus_half: marginal(theta + h / 2.0)?,
        minus_half: marginal(theta - h / 2.0)?,
    };
    let len = [
        &stencil.center,
        &stencil.plus,
        &stencil.minus,
        &stencil.plus_half,
        &stencil.minus_half,
    ]
    .iter()
    .map(|v| v.len())
    .max()
    .unwrap_or(0);
    for v in [
        &mut stencil.center,
        &mut stencil.plus,
        &mut stencil.minus,
        &mut stencil.plus_half,
        &mut stencil.minus_half,
    ] {
        v.resize(len, 0.0);
    }
    finish(stencil.accumulate(h))
}

/// |α|²e^{2r} + sinh²r
pub fn fisher_analytic(spec: &InputSpec) -> f64 {
    let r = spec.squeeze.strength;
    spec.alpha2() * (2.0 * r).exp() + spec.sinh2()
}

/// 1/√(p F)
pub fn crlb(spec: &InputSpec, p: u64) -> Result<f64> {
    check_p(p)?;
    Ok(1.0 / (p as f64 * fisher_analytic(spec)).sqrt())
}

/// Relative closeness of |α|² and sinh²r at which the moment formula is treated as divergent.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-9;

/// Moment-based sensitivity; `f64::INFINITY` at |α|² = sinh²r and at θ ∈ {0, π}.
pub fn error_propagation_sensitivity(spec: &InputSpec, theta: f64, p: u64) -> Result<f64> {
    check_p(p)?;
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::invalid("theta", format!("must lie in [0, π], got {theta}")));
    }
    let a2 = spec.alpha2();
    let s2 = spec.sinh2();
    let c2 = spec.squeeze.strength.cosh().powi(2);
    let gap = a2 - s2;
    if gap.abs() <= DIVERGENCE_TOLERANCE * (a2 + s2) || gap == 0.0 {
        return Ok(f64::INFINITY);
    }
    let tan = theta.tan();
    if tan == 0.0 {
        return Ok(f64::INFINITY);
    }
    let r = spec.squeeze.strength;
    let first = (a2 * (-2.0 * r).exp() + s2) / (gap * gap);
    let second = (a2 + 2.0 * s2 * c2) / (gap * gap * tan * tan);
    Ok(((first + second) / p as f64).sqrt())
}

/// The same ratio ΔM / |∂⟨M⟩/∂θ| evaluated from outcome tables.
pub fn error_propagation_numeric(spec: &InputSpec, theta: f64, p: u64) -> Result<f64> {
    check_p(p)?;
    let h = 1e-3;
    check_open_theta(theta, h)?;
    let center = moments(&outcome_table(spec, theta)?);
    let plus = moments(&outcome_table(spec, theta + h)?).mean_m;
    let minus = moments(&outcome_table(spec, theta - h)?).mean_m;
    let slope = (plus - minus) / (2.0 * h);
    if slope == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(center.var_m.sqrt() / slope.abs() / (p as f64).sqrt())
}

/// e^{-r}/√(p|α|²), taking n̄ ≃ |α|².
pub fn caves_limit(spec: &InputSpec, p: u64) -> Result<f64> {
    check_p(p)?;
    let r = spec.squeeze.strength;
    Ok((-r).exp() / (p as f64 * spec.alpha2()).sqrt())
}

/// ΔX₁/√(p n̄) with ΔX₁ = e^{-r}; identical to [`caves_limit`].
pub fn quadrature_limit(spec: &InputSpec, p: u64) -> Result<f64> {
    caves_limit(spec, p)
}

/// 1/√(p n̄)
pub fn shot_noise_limit(spec: &InputSpec, p: u64) -> Result<f64> {
    check_p(p)?;
    Ok(1.0 / (p as f64 * spec.mean_photons()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn spec(a2: f64, r: f64) -> InputSpec {
        InputSpec::from_alpha2(a2, r).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn analytic_values() {
        assert_eq!(fisher_analytic(&spec(0.0, 0.0)), 0.0);
        assert!((fisher_analytic(&spec(10.0, 0.0)) - 10.0).abs() < 1e-13);
        let f = fisher_analytic(&spec(10.0, 1.0));
        assert!((f - (10.0 * 1f64.exp().powi(2) + 1f64.sinh().powi(2))).abs() < 1e-12);
        assert!((f - 75.271_66).abs() < 1e-4);
        for nbar in [100.0, 1e4, 1e6] {
            let s = InputSpec::optimal_split(nbar, Default::default()).unwrap();
            let ratio = fisher_analytic(&s) / (nbar * nbar);
            assert!((ratio - 1.0).abs() < 3.0 / nbar.sqrt(), "n̄={nbar}: {ratio}");
        }
    }

    #[test]
    fn crlb_values() {
        assert!((crlb(&spec(10.0, 1.0), 100).unwrap() - 0.011_526_1).abs() < 5e-8);
        let s = spec(7.0, 0.0);
        assert!(rel(crlb(&s, 13).unwrap(), 1.0 / (13.0f64 * 7.0).sqrt()) < 1e-14);
        let s = spec(3.0, 0.7);
        assert!(rel(crlb(&s, 400).unwrap(), 0.5 * crlb(&s, 100).unwrap()) < 1e-14);
        assert!(crlb(&s, 0).is_err());
    }

    #[test]
    fn numeric_fisher_matches_closed_form() {
        let f = fisher_information_detailed(&spec(10.0, 1.0), FRAC_PI_2).unwrap();
        assert!(rel(f.value, 75.271_66) < 1e-3, "{}", f.value);
        assert!(f.relative_gap < RICHARDSON_TOLERANCE);
        let f = fisher_information(&spec(10.0, 0.0), 1.0).unwrap();
        assert!(rel(f, 10.0) < 1e-3);
    }

    #[test]
    fn numeric_fisher_is_flat_in_theta() {
        let s = spec(5.0, 0.5);
        let values: Vec<f64> = [0.2, 0.8, 1.6, 2.9]
            .iter()
            .map(|&t| fisher_information(&s, t).unwrap())
            .collect();
        let max = values.iter().cloned().fold(f64::MIN, f64::max);
        let min = values.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min < 1.005, "{values:?}");
        for v in &values {
            assert!(rel(*v, fisher_analytic(&s)) < 1e-3);
        }
    }

    #[test]
    fn fisher_rejects_endpoints() {
        assert!(fisher_information(&spec(1.0, 0.1), 0.0).is_err());
        assert!(fisher_information(&spec(1.0, 0.1), PI).is_err());
    }

    #[test]
    fn error_propagation_limits() {
        let s = spec(9.0, 0.0);
        assert!(
            rel(
                error_propagation_sensitivity(&s, FRAC_PI_2, 4).unwrap(),
                1.0 / (2.0 * 3.0)
            ) < 1e-12
        );

        let s = spec(1e4, 0.3);
        let ep = error_propagation_sensitivity(&s, FRAC_PI_2, 1).unwrap();
        let want = (-0.3f64).exp() / s.mean_photons().sqrt();
        assert!(rel(ep, want) < 1e-2);

        let s = spec(1e-3, 3.0);
        let ep = error_propagation_sensitivity(&s, FRAC_PI_2, 1).unwrap();
        assert!(rel(ep, 1.0 / s.mean_photons().sqrt()) < 1e-2, "{ep}");
    }

    #[test]
    fn error_propagation_diverges_at_balance() {
        let r = 10f64.sqrt().asinh();
        let s = spec(10.0, r);
        assert_eq!(error_propagation_sensitivity(&s, FRAC_PI_2, 1).unwrap(), f64::INFINITY);
        assert!(crlb(&s, 1).unwrap().is_finite());
        let near = spec(10.0, r * (1.0 - 1e-4));
        let far = spec(10.0, r * (1.0 - 1e-2));
        let a = error_propagation_sensitivity(&near, FRAC_PI_2, 1).unwrap();
        let b = error_propagation_sensitivity(&far, FRAC_PI_2, 1).unwrap();
        assert!(a.is_finite() && a > 10.0 * b);
        assert_eq!(
            error_propagation_sensitivity(&spec(4.0, 0.5), 0.0, 1).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn error_propagation_agrees_with_table_moments() {
        for &(a2, r, theta) in &[(5.0, 0.5, 1.2), (2.0, 0.9, 0.7), (8.0, 0.3, 2.4), (1.0, 1.0, 1.9)] {
            let s = spec(a2, r);
            let closed = error_propagation_sensitivity(&s, theta, 1).unwrap();
            let numeric = error_propagation_numeric(&s, theta, 1).unwrap();
            assert!(rel(numeric, closed) < 1e-2, "({a2},{r},{theta}): {numeric} vs {closed}");
        }
    }

    #[test]
    fn aligned_squeezing_maximizes_fisher() {
        use crate::states::{CoherentParams, SqueezeParams, TruncationPolicy};
        let at = |theta_s: f64| {
            let s = InputSpec::new(
                CoherentParams::new(5f64.sqrt(), 0.0).unwrap(),
                SqueezeParams::new(0.8, theta_s).unwrap(),
                TruncationPolicy::default(),
            )
            .unwrap();
            fisher_information(&s, 1.1).unwrap()
        };
        let aligned = at(0.0);
        assert!(rel(aligned, fisher_analytic(&spec(5.0, 0.8))) < 1e-6);
        for theta_s in [0.5, 1.5, std::f64::consts::PI] {
            assert!(at(theta_s) < aligned, "θ_s={theta_s}");
        }
    }

    #[test]
    fn caves_and_quadrature() {
        let s = spec(100.0, 1.0);
        assert!((caves_limit(&s, 1).unwrap() - (-1f64).exp() / 10.0).abs() < 1e-15);
        assert!((caves_limit(&s, 1).unwrap() - 0.03679).abs() < 1e-5);
        assert_eq!(quadrature_limit(&s, 1).unwrap(), caves_limit(&s, 1).unwrap());
        assert!(rel(quadrature_limit(&s, 4).unwrap(), 0.5 * quadrature_limit(&s, 1).unwrap()) < 1e-15);
        let s0 = spec(25.0, 0.0);
        assert!(rel(caves_limit(&s0, 1).unwrap(), 0.2) < 1e-15);

        let s = spec(1e4, 0.03);
        assert!(s.sinh2() / s.alpha2() <= 1e-3);
        let ep = error_propagation_sensitivity(&s, FRAC_PI_2, 1).unwrap();
        assert!(rel(caves_limit(&s, 1).unwrap(), ep) < 1e-2);
    }

    #[test]
    fn one_port_poisson_closed_form() {
        let s = spec(6.0, 0.0);
        for &theta in &[0.4, 1.3, 2.5] {
            let fc = fisher_one_port(&s, theta, Port::C).unwrap();
            let fd = fisher_one_port(&s, theta, Port::D).unwrap();
            // Poisson(λ(θ)) has Fisher information λ'²/λ.
            let want_c = 6.0 * (theta / 2.0).sin().powi(2);
            let want_d = 6.0 * (theta / 2.0).cos().powi(2);
            assert!(rel(fc, want_c) < 1e-4, "{fc} vs {want_c}");
            assert!(rel(fd, want_d) < 1e-4, "{fd} vs {want_d}");
        }
    }

    #[test]
    fn one_port_bounded_by_full_and_peaks_off_center() {
        let s = InputSpec::optimal_split(4.0, Default::default()).unwrap();
        for &theta in &[0.2, 0.9, FRAC_PI_2, 2.4] {
            let full = fisher_information(&s, theta).unwrap();
            for port in [Port::C, Port::D] {
                assert!(fisher_one_port(&s, theta, port).unwrap() <= full * (1.0 + 1e-9));
            }
        }
        // Port d is dark for the coherent beam near θ = 0; port c mirrors it near π.
        let middle = fisher_one_port(&s, FRAC_PI_2, Port::D).unwrap();
        let edge = fisher_one_port(&s, 0.2, Port::D).unwrap();
        assert!(edge > 10.0 * middle, "{edge} vs {middle}");
        let mirrored = fisher_one_port(&s, PI - 0.2, Port::C).unwrap();
        assert!(rel(mirrored, edge) < 1e-6);
    }
}
