//! Photon-count statistics at the two interferometer outputs.
//!
//! The output state is `e^{-iθJ_y}|ψ_in>` with `J_y = (a†b - b†a)/2i` and `J_z = (a†a - b†b)/2`.
//! Output port `c` is the image of input mode `a`, so a coherent input alone leaves
//! `|α|² cos²(θ/2)` photons on average in port `c` and `|α|² sin²(θ/2)` in port `d`.
//!
//! For a fixed total `N`, the input index `ν = (n_a - n_b)/2` and the output index
//! `μ = (n_c - n_d)/2`, so
//!
//! ```text
//! P(n_c, n_d | θ) = | Σ_n C_{N-n} S_n d^{N/2}_{μ, N/2-n}(θ) |²
//! ```

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::specfun::{BlockLimits, WignerColumns};
use crate::states::{choose_cutoff, coherent_amplitude, squeezed_amplitude, InputSpec};

/// Input amplitudes below this fraction of the sector's largest are not propagated.
const NEGLIGIBLE_AMPLITUDE: f64 = 1e-20;

/// Tables below this coverage get their moments flagged.
pub const MOMENT_COVERAGE: f64 = 1.0 - 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Port {
    C,
    D,
}

impl std::fmt::Display for Port {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Port::C => f.write_str("c"),
            Port::D => f.write_str("d"),
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::invalid("theta", format!("must lie in [0, π], got {theta}")));
    }
    Ok(())
}

/// Input coefficients of one total-photon-number sector, rescaled by `exp(log_scale)`.
#[derive(Clone, Debug)]
pub(crate) struct SectorInput {
    pub total_n: usize,
    /// `(column = n_a, coefficient)` pairs; the column index is `ν + N/2`.
    pub coeffs: Vec<(usize, Complex64)>,
    pub log_scale: f64,
    /// Σ|C_{n_a} S_{n_b}|² over the sector.
    pub weight: f64,
}

impl SectorInput {
    pub fn new(spec: &InputSpec, total_n: usize) -> Self {
        let logs: Vec<(usize, f64, f64)> = (0..=total_n)
            .filter_map(|l| {
                let c = coherent_amplitude(&spec.coherent, l);
                let s = squeezed_amplitude(&spec.squeeze, total_n - l);
                (!c.is_zero() && !s.is_zero()).then_some((l, c.log_magnitude + s.log_magnitude, c.phase + s.phase))
            })
            .collect();
        let peak = logs.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        if peak == f64::NEG_INFINITY {
            return SectorInput {
                total_n,
                coeffs: Vec::new(),
                log_scale: 0.0,
                weight: 0.0,
            };
        }
        let floor = NEGLIGIBLE_AMPLITUDE.ln();
        let mut sum = 0.0;
        let coeffs: Vec<(usize, Complex64)> = logs
            .into_iter()
            .filter(|x| x.1 - peak >= floor)
            .map(|(l, lm, ph)| {
                let c = Complex64::from_polar((lm - peak).exp(), ph);
                sum += c.norm_sqr();
                (l, c)
            })
            .collect();
        SectorInput {
            total_n,
            coeffs,
            log_scale: peak,
            weight: sum * (2.0 * peak).exp(),
        }
    }

    /// Output amplitudes indexed by `n_c`, still scaled by `exp(-log_scale)`.
    pub fn scaled_output(&self, theta: f64) -> Vec<Complex64> {
        let dim = self.total_n + 1;
        let mut psi = vec![Complex64::new(0.0, 0.0); dim];
        let mut cols = WignerColumns::with_doubled(self.total_n, theta);
        let mut column = vec![0.0; dim];
        for &(l, c) in &self.coeffs {
            cols.column_into(l, &mut column);
            for (p, &d) in psi.iter_mut().zip(&column) {
                *p += c * d;
            }
        }
        psi
    }

    /// `P(n_c, N - n_c | θ)` for every `n_c`.
    pub fn probabilities(&self, theta: f64) -> Vec<f64> {
        let scale = (2.0 * self.log_scale).exp();
        self.scaled_output(theta)
            .iter()
            .map(|p| (p.norm_sqr() * scale).min(1.0))
            .collect()
    }
}

/// P(n_c, n_d | θ), exact within the sector `N = n_c + n_d`.
pub fn outcome_probability(spec: &InputSpec, theta: f64, n_c: u32, n_d: u32) -> Result<f64> {
    spec.validate()?;
    check_theta(theta)?;
    let total_n = n_c as usize + n_d as usize;
    let sector = SectorInput::new(spec, total_n);
    if sector.coeffs.is_empty() {
        return Ok(0.0);
    }
    Ok(sector.probabilities(theta)[n_c as usize])
}

/// Probabilities of the outcomes `(n_c, N - n_c)` for one total `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorProbs {
    total_n: usize,
    probs: Vec<f64>,
}

impl SectorProbs {
    pub fn total_n(&self) -> usize {
        self.total_n
    }

    /// Indexed by `n_c`; empty when the sector was skipped.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Full joint distribution of `(n_c, n_d)` at one phase.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeTable {
    theta: f64,
    spec: InputSpec,
    sectors: Vec<SectorProbs>,
    kept_mass: f64,
    skipped_mass: f64,
}

impl OutcomeTable {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn spec(&self) -> &InputSpec {
        &self.spec
    }

    /// Sectors indexed by total photon number.
    pub fn sectors(&self) -> &[SectorProbs] {
        &self.sectors
    }

    pub fn max_total(&self) -> usize {
        self.sectors.len().saturating_sub(1)
    }

    pub fn kept_mass(&self) -> f64 {
        self.kept_mass
    }

    /// Weight of sectors skipped for being below `tail_tolerance / 100`.
    pub fn skipped_mass(&self) -> f64 {
        self.skipped_mass
    }

    pub fn get(&self, n_c: u32, n_d: u32) -> f64 {
        let n = n_c as usize + n_d as usize;
        self.sectors
            .get(n)
            .and_then(|s| s.probs.get(n_c as usize))
            .copied()
            .unwrap_or(0.0)
    }

    /// Kept outcomes as `(n_c, n_d, probability)`.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.sectors.iter().flat_map(|s| {
            s.probs
                .iter()
                .enumerate()
                .map(move |(k, &p)| (k as u32, (s.total_n - k) as u32, p))
        })
    }

    pub fn len(&self) -> usize {
        self.sectors.iter().map(|s| s.probs.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distribution of the total photon number `N`.
    pub fn total_number_distribution(&self) -> Vec<f64> {
        self.sectors.iter().map(SectorProbs::mass).collect()
    }

    /// CSV with header `n_c,n_d,prob`; probabilities in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n_c,n_d,prob")?;
        for (n_c, n_d, p) in self.iter() {
            writeln!(out, "{n_c},{n_d},{p:?}")?;
        }
        Ok(())
    }
}

pub fn outcome_table(spec: &InputSpec, theta: f64) -> Result<OutcomeTable> {
    outcome_table_with_limits(spec, theta, BlockLimits::default())
}

/// Builds the table sector by sector; `limits` bounds the bytes held by the table.
pub fn outcome_table_with_limits(spec: &InputSpec, theta: f64, limits: BlockLimits) -> Result<OutcomeTable> {
    spec.validate()?;
    check_theta(theta)?;
    let (na, nb) = choose_cutoff(spec)?;
    let max_n = na + nb;
    let required = (max_n + 1)
        .checked_mul(max_n + 2)
        .map(|n| n / 2 * std::mem::size_of::<f64>())
        .unwrap_or(usize::MAX);
    if required > limits.max_bytes {
        return Err(Error::MemoryCeiling {
            required,
            limit: limits.max_bytes,
        });
    }
    let skip_below = spec.truncation.tail_tolerance / 100.0;
    let computed: Vec<(SectorProbs, f64)> = (0..=max_n)
        .into_par_iter()
        .map(|n| {
            let input = SectorInput::new(spec, n);
            if input.weight < skip_below {
                let empty = SectorProbs {
                    total_n: n,
                    probs: Vec::new(),
                };
                (empty, input.weight)
            } else {
                let probs = SectorProbs {
                    total_n: n,
                    probs: input.probabilities(theta),
                };
                (probs, 0.0)
            }
        })
        .collect();
    let skipped_mass = computed.iter().map(|c| c.1).sum();
    let sectors: Vec<SectorProbs> = computed.into_iter().map(|c| c.0).collect();
    let kept_mass = sectors.iter().map(SectorProbs::mass).sum();
    Ok(OutcomeTable {
        theta,
        spec: *spec,
        sectors,
        kept_mass,
        skipped_mass,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentSummary {
    /// ⟨N_c - N_d⟩
    pub mean_m: f64,
    pub var_m: f64,
    /// ⟨N_c + N_d⟩
    pub mean_n: f64,
    pub var_n: f64,
    /// Set when the table misses more than 10⁻⁶ of the probability mass.
    pub undercovered: bool,
}

/// Moments conditioned on the kept outcomes.
pub fn moments(table: &OutcomeTable) -> MomentSummary {
    let mass = table.kept_mass();
    let undercovered = mass < MOMENT_COVERAGE;
    if mass <= 0.0 {
        return MomentSummary {
            mean_m: 0.0,
            var_m: 0.0,
            mean_n: 0.0,
            var_n: 0.0,
            undercovered,
        };
    }
    let (mut m1, mut m2, mut n1, mut n2) = (0.0, 0.0, 0.0, 0.0);
    for (n_c, n_d, p) in table.iter() {
        let m = f64::from(n_c) - f64::from(n_d);
        let n = f64::from(n_c) + f64::from(n_d);
        m1 += p * m;
        m2 += p * m * m;
        n1 += p * n;
        n2 += p * n * n;
    }
    let (m1, m2, n1, n2) = (m1 / mass, m2 / mass, n1 / mass, n2 / mass);
    MomentSummary {
        mean_m: m1,
        var_m: (m2 - m1 * m1).max(0.0),
        mean_n: n1,
        var_n: (n2 - n1 * n1).max(0.0),
        undercovered,
    }
}

/// Distribution of the count at one port, summed over the other.
pub fn marginal_one_port(table: &OutcomeTable, port: Port) -> Vec<f64> {
    let mut out = vec![0.0; table.max_total() + 1];
    for (n_c, n_d, p) in table.iter() {
        let k = match port {
            Port::C => n_c,
            Port::D => n_d,
        };
        out[k as usize] += p;
    }
    while out.len() > 1 && out.last() == Some(&0.0) {
        out.pop();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{CoherentParams, SqueezeParams, TruncationPolicy};
    use crate::testutil::expm;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    type C = Complex64;

    fn poisson(m: usize, mean: f64) -> f64 {
        if mean == 0.0 {
            return if m == 0 { 1.0 } else { 0.0 };
        }
        (m as f64 * mean.ln() - mean - (1..=m).map(|k| (k as f64).ln()).sum::<f64>()).exp()
    }

    fn fact(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Two-mode Fock space truncated to n_a + n_b ≤ k_max.
    struct DenseSpace {
        index: Vec<(usize, usize)>,
    }

    impl DenseSpace {
        fn new(k_max: usize) -> Self {
            let mut index = Vec::new();
            for n in 0..=k_max {
                for nb in 0..=n {
                    index.push((n - nb, nb));
                }
            }
            DenseSpace { index }
        }

        fn pos(&self, na: usize, nb: usize) -> Option<usize> {
            self.index.iter().position(|&x| x == (na, nb))
        }

        /// -iθ J_y with J_y = (a†b - b†a)/2i, i.e. -(θ/2)(a†b - b†a).
        fn generator(&self, theta: f64) -> Vec<Vec<C>> {
            let d = self.index.len();
            let mut g = vec![vec![C::new(0.0, 0.0); d]; d];
            for (col, &(na, nb)) in self.index.iter().enumerate() {
                if nb > 0 {
                    // a†b |na, nb> = sqrt((na+1) nb) |na+1, nb-1>
                    let row = self.pos(na + 1, nb - 1).unwrap();
                    g[row][col] += C::new(-0.5 * theta * (((na + 1) * nb) as f64).sqrt(), 0.0);
                }
                if na > 0 {
                    let row = self.pos(na - 1, nb + 1).unwrap();
                    g[row][col] += C::new(0.5 * theta * ((na * (nb + 1)) as f64).sqrt(), 0.0);
                }
            }
            g
        }
    }

    /// Input amplitudes from the textbook formulas, independent of the crate's log-space code.
    fn dense_input(space: &DenseSpace, alpha: C, r: f64, theta_s: f64) -> Vec<C> {
        space
            .index
            .iter()
            .map(|&(na, nb)| {
                let c = alpha.powu(na as u32) * (-0.5 * alpha.norm_sqr()).exp() / fact(na).sqrt();
                let s = if nb % 2 == 1 {
                    C::new(0.0, 0.0)
                } else {
                    let k = nb / 2;
                    let mag = (fact(nb)).sqrt() / (2f64.powi(k as i32) * fact(k) * r.cosh().sqrt());
                    C::from_polar(mag, k as f64 * theta_s) * (-r.tanh()).powi(k as i32)
                };
                c * s
            })
            .collect()
    }

    fn dense_probs(alpha: C, r: f64, theta_s: f64, theta: f64, k_max: usize) -> Vec<((usize, usize), f64)> {
        let space = DenseSpace::new(k_max);
        let u = expm(&space.generator(theta));
        let input = dense_input(&space, alpha, r, theta_s);
        space
            .index
            .iter()
            .enumerate()
            .map(|(i, &key)| {
                let amp: C = (0..input.len()).map(|j| u[i][j] * input[j]).sum();
                (key, amp.norm_sqr())
            })
            .collect()
    }

    fn spec(alpha2: f64, r: f64) -> InputSpec {
        InputSpec::from_alpha2(alpha2, r).unwrap()
    }

    #[test]
    fn vacuum_in_vacuum_out() {
        let s = spec(0.0, 0.0);
        for theta in [0.0, 0.7, PI] {
            assert_eq!(outcome_probability(&s, theta, 0, 0).unwrap(), 1.0);
            assert_eq!(outcome_probability(&s, theta, 1, 0).unwrap(), 0.0);
            assert_eq!(outcome_probability(&s, theta, 2, 3).unwrap(), 0.0);
        }
        let t = outcome_table(&s, 1.0).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get(0, 0), 1.0);
        let m = moments(&t);
        assert_eq!((m.mean_m, m.var_m, m.mean_n, m.var_n), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(marginal_one_port(&t, Port::C), vec![1.0]);
        assert_eq!(marginal_one_port(&t, Port::D), vec![1.0]);
    }

    #[test]
    fn coherent_input_splits_into_poisson_product() {
        let theta = PI / 3.0;
        let s = spec(4.0, 0.0);
        let (mc, md) = (4.0 * (theta / 2.0).cos().powi(2), 4.0 * (theta / 2.0).sin().powi(2));
        for n_c in 0..10u32 {
            for n_d in 0..10u32 {
                let want = poisson(n_c as usize, mc) * poisson(n_d as usize, md);
                let got = outcome_probability(&s, theta, n_c, n_d).unwrap();
                assert!((got - want).abs() < 1e-14, "({n_c},{n_d}): {got} vs {want}");
            }
        }
        let t = outcome_table(&s, theta).unwrap();
        let pc = marginal_one_port(&t, Port::C);
        let pd = marginal_one_port(&t, Port::D);
        for (k, p) in pc.iter().enumerate() {
            assert!((p - poisson(k, mc)).abs() < 2e-10);
        }
        for (k, p) in pd.iter().enumerate() {
            assert!((p - poisson(k, md)).abs() < 2e-10);
        }
        assert!((pc.iter().sum::<f64>() - pd.iter().sum::<f64>()).abs() < 1e-14);
    }

    #[test]
    fn matches_dense_unitary_oracle() {
        let k_max = 12;
        let cases = [
            (1.0, 0.0, 0.5, 0.0, PI / 2.0),
            (1.5, 0.4, 0.7, 0.9, 1.1),
            (0.8, -1.2, 0.3, 2.0, 2.7),
            (0.0, 0.0, 0.6, 0.0, 0.4),
        ];
        for &(mag, phase, r, theta_s, theta) in &cases {
            let alpha = C::from_polar(mag, phase);
            let truncation = TruncationPolicy::new(1e-10, 4096).unwrap();
            let s = InputSpec::new(
                CoherentParams::new(mag, phase).unwrap(),
                SqueezeParams::new(r, theta_s).unwrap(),
                truncation,
            )
            .unwrap();
            for ((nc, nd), want) in dense_probs(alpha, r, theta_s, theta, k_max) {
                let got = outcome_probability(&s, theta, nc as u32, nd as u32).unwrap();
                assert!((got - want).abs() < 1e-9, "({nc},{nd}) θ={theta}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn dense_oracle_matches_table_entries() {
        let s = InputSpec::from_alpha2(1.0, 0.5).unwrap();
        let t = outcome_table(&s, PI / 2.0).unwrap();
        for ((nc, nd), want) in dense_probs(C::new(1.0, 0.0), 0.5, 0.0, PI / 2.0, 12) {
            if nc + nd <= 4 {
                assert!((t.get(nc as u32, nd as u32) - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn total_number_is_conserved() {
        let s = spec(3.0, 0.8);
        let tables: Vec<_> = [0.3, 1.1, 2.7]
            .iter()
            .map(|&th| outcome_table(&s, th).unwrap())
            .collect();
        let base = tables[0].total_number_distribution();
        for t in &tables[1..] {
            let other = t.total_number_distribution();
            assert_eq!(base.len(), other.len());
            for (a, b) in base.iter().zip(&other) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn normalization_audit() {
        let s = spec(10.0, 1.0);
        let t = outcome_table(&s, PI / 2.0).unwrap();
        assert!(t.kept_mass() >= 1.0 - 1e-8, "kept {}", t.kept_mass());
        assert!(t.kept_mass() <= 1.0 + 1e-12);
        assert!(1.0 - t.kept_mass() <= 2.0 * s.truncation.tail_tolerance + t.skipped_mass() + 1e-13);
        assert!(t.iter().all(|(_, _, p)| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn mean_difference_follows_cosine() {
        for &(a2, r) in &[(3.0, 0.5), (6.0, 1.0), (1.0, 1.2)] {
            let s = spec(a2, r);
            let sinh2 = f64::sinh(r).powi(2);
            for &theta in &[0.0, 0.4, PI / 2.0, 2.2, PI] {
                let m = moments(&outcome_table(&s, theta).unwrap());
                assert!(
                    (m.mean_m - (a2 - sinh2) * theta.cos()).abs() < 1e-6,
                    "θ={theta}: {}",
                    m.mean_m
                );
                assert!((m.mean_n - (a2 + sinh2)).abs() < 1e-6);
                assert!(!m.undercovered);
            }
        }
        let m = moments(&outcome_table(&spec(10.0, 1.0), PI / 2.0).unwrap());
        assert!(m.mean_m.abs() < 1e-8);
    }

    #[test]
    fn odd_totals_vanish_without_coherent_light() {
        let s = spec(0.0, 1.0);
        let t = outcome_table(&s, 0.9).unwrap();
        for (n_c, n_d, p) in t.iter() {
            if (n_c + n_d) % 2 == 1 {
                assert_eq!(p, 0.0);
            }
        }
        assert_eq!(outcome_probability(&s, 0.9, 2, 1).unwrap(), 0.0);
    }

    #[test]
    fn kept_mass_grows_as_tolerance_tightens() {
        let base = spec(5.0, 0.9);
        let mut last = 0.0;
        for tol in [1e-3, 1e-6, 1e-9, 1e-12] {
            let s = base.with_truncation(TruncationPolicy::new(tol, 4096).unwrap());
            let kept = outcome_table(&s, 1.0).unwrap().kept_mass();
            assert!(kept >= last - 1e-15);
            last = kept;
        }
    }

    #[test]
    fn memory_ceiling_is_enforced() {
        let s = spec(10.0, 1.0);
        let err = outcome_table_with_limits(&s, 1.0, BlockLimits { max_bytes: 1024 }).unwrap_err();
        assert!(matches!(err, Error::MemoryCeiling { limit: 1024, .. }));
    }

    #[test]
    fn csv_dump() {
        let t = outcome_table(&spec(0.0, 0.0), 0.5).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n_c,n_d,prob\n0,0,1.0\n");
    }

    #[test]
    fn rejects_bad_theta() {
        assert!(outcome_table(&spec(1.0, 0.0), -0.1).is_err());
        assert!(outcome_probability(&spec(1.0, 0.0), 4.0, 0, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn entries_are_probabilities(a2 in 0.0f64..6.0, r in 0.0f64..1.0, theta in 0.0f64..PI) {
            let t = outcome_table(&spec(a2, r), theta).unwrap();
            prop_assert!(t.iter().all(|(_, _, p)| (0.0..=1.0).contains(&p)));
            prop_assert!((t.kept_mass() - 1.0).abs() < 1e-8);
        }
    }
}
