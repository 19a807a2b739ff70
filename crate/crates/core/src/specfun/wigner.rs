//! Wigner small-d rotation matrix elements.
//!
//! Convention: `d^j_{μν}(θ) = <j μ| exp(-iθ J_y) |j ν>` with the Condon-Shortley phase, so
//! `d^{1/2}_{1/2,1/2} = cos(θ/2)` and `d^{1/2}_{1/2,-1/2} = -sin(θ/2)`.
//!
//! Column `ν` of `d^j(θ)` is the eigenvector, with eigenvalue `ν`, of the rotated generator
//! `J_z cos θ + J_x sin θ`. That operator is tridiagonal in the `J_z` basis with eigenvalues
//! spaced exactly one apart, so each column follows from a three-term recursion. The recursion
//! is run inward from both ends of the multiplet as continued fractions and joined at the twist
//! index where the two fractions agree best; this avoids the growth of the unwanted solution
//! that a one-sided recursion suffers for large `j`. Columns are normalized to unit length and
//! the overall sign is pinned by the closed form of whichever edge element is larger.

#[cfg(test)]
use super::factorial::log_binomial;
use super::HalfInt;
use crate::error::{Error, Result};

/// Default ceiling for a dense block allocation (1 GiB).
pub const DEFAULT_BLOCK_BYTES: usize = 1 << 30;

/// Allocation policy for dense rotation blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLimits {
    pub max_bytes: usize,
}

impl Default for BlockLimits {
    fn default() -> Self {
        BlockLimits {
            max_bytes: DEFAULT_BLOCK_BYTES,
        }
    }
}

/// Dense `(2j+1) x (2j+1)` block of `d^j_{μν}(θ)`, rows indexed by `μ`, columns by `ν`,
/// both running from `-j` to `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerBlock {
    j: HalfInt,
    theta: f64,
    entries: Vec<f64>,
}

impl WignerBlock {
    pub fn j(&self) -> HalfInt {
        self.j
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.j.doubled() as usize + 1
    }

    /// Element by zero-based indices, `row = μ + j`, `col = ν + j`.
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim() + col]
    }

    pub fn get(&self, mu: HalfInt, nu: HalfInt) -> Result<f64> {
        let row = multiplet_index(self.j, mu, "mu")?;
        let col = multiplet_index(self.j, nu, "nu")?;
        Ok(self.at(row, col))
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.dim();
        &self.entries[row * n..(row + 1) * n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

fn multiplet_index(j: HalfInt, m: HalfInt, what: &str) -> Result<usize> {
    if m.doubled().abs() > j.doubled() || !m.same_parity(j) {
        return Err(Error::OutOfMultiplet {
            j: j.value(),
            what: format!("{what}={m}"),
        });
    }
    Ok(((m.doubled() + j.doubled()) / 2) as usize)
}

fn check_j(j: HalfInt) -> Result<usize> {
    if j.doubled() < 0 {
        return Err(Error::invalid("j", format!("must be non-negative, got {j}")));
    }
    Ok(j.doubled() as usize)
}

/// `count * ln_x` with the convention `0 * ln 0 = 0`.
fn scaled_log(count: usize, ln_x: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * ln_x
    }
}

fn sign_pow(x: f64, count: usize) -> f64 {
    if x < 0.0 && count % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Column generator for `d^j(θ)` at fixed `j` and `θ`. Holds scratch space so repeated
/// columns of the same block do not allocate.
#[derive(Clone, Debug)]
pub struct WignerColumns {
    j2: usize,
    theta: f64,
    cos: f64,
    half_sin: f64,
    cos_half: f64,
    sin_half: f64,
    coupling: Vec<f64>,
    lower_pivot: Vec<f64>,
    upper_pivot: Vec<f64>,
    lower_ratio: Vec<f64>,
    upper_ratio: Vec<f64>,
}

impl WignerColumns {
    pub fn new(j: HalfInt, theta: f64) -> Result<Self> {
        let j2 = check_j(j)?;
        if !theta.is_finite() {
            return Err(Error::invalid("theta", "must be finite"));
        }
        Ok(Self::with_doubled(j2, theta))
    }

    pub(crate) fn with_doubled(j2: usize, theta: f64) -> Self {
        let n = j2;
        let coupling = (0..=n + 1)
            .map(|k| {
                if k == 0 || k > n {
                    0.0
                } else {
                    ((k * (n - k + 1)) as f64).sqrt()
                }
            })
            .collect();
        WignerColumns {
            j2,
            theta,
            cos: theta.cos(),
            half_sin: 0.5 * theta.sin(),
            cos_half: (0.5 * theta).cos(),
            sin_half: (0.5 * theta).sin(),
            coupling,
            lower_pivot: vec![0.0; n + 1],
            upper_pivot: vec![0.0; n + 1],
            lower_ratio: vec![0.0; n + 1],
            upper_ratio: vec![0.0; n + 1],
        }
    }

    pub fn dim(&self) -> usize {
        self.j2 + 1
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn diag(&self, k: usize, nu2: i64) -> f64 {
        0.5 * ((2 * k as i64 - self.j2 as i64) as f64 * self.cos - nu2 as f64)
    }

    /// Writes column `col` (that is `ν = col - j`) into `out[0..=2j]`, indexed by `μ + j`.
    pub fn column_into(&mut self, col: usize, out: &mut [f64]) {
        let n = self.j2;
        assert!(col <= n, "column index {col} outside multiplet of dimension {}", n + 1);
        let out = &mut out[..=n];

        if self.half_sin == 0.0 {
            out.iter_mut().for_each(|x| *x = 0.0);
            if self.cos_half.abs() >= self.sin_half.abs() {
                out[col] = sign_pow(self.cos_half, n);
            } else {
                out[n - col] = sign_pow(-1.0, n - col) * sign_pow(self.sin_half, n);
            }
            return;
        }

        let nu2 = 2 * col as i64 - n as i64;
        // Pivots smaller than this are nudged off zero so the continued fractions stay finite.
        let pivot_floor = f64::MIN_POSITIVE / f64::EPSILON;
        let guard = |d: f64| {
            if d.abs() < pivot_floor {
                if d.is_sign_negative() {
                    -pivot_floor
                } else {
                    pivot_floor
                }
            } else {
                d
            }
        };

        // Bottom-up: lower_ratio[k] = v_k / v_{k+1}.
        self.lower_pivot[0] = self.diag(0, nu2);
        for k in 0..n {
            let e = self.half_sin * self.coupling[k + 1];
            let r = -e / guard(self.lower_pivot[k]);
            self.lower_ratio[k] = r;
            self.lower_pivot[k + 1] = self.diag(k + 1, nu2) + e * r;
        }
        // Top-down: upper_ratio[k] = v_k / v_{k-1}.
        self.upper_pivot[n] = self.diag(n, nu2);
        for k in (1..=n).rev() {
            let e = self.half_sin * self.coupling[k];
            let q = -e / guard(self.upper_pivot[k]);
            self.upper_ratio[k] = q;
            self.upper_pivot[k - 1] = self.diag(k - 1, nu2) + e * q;
        }

        let mut twist = 0;
        let mut best = f64::INFINITY;
        for k in 0..=n {
            let gamma = (self.lower_pivot[k] + self.upper_pivot[k] - self.diag(k, nu2)).abs();
            if gamma < best {
                best = gamma;
                twist = k;
            }
        }

        out[twist] = 1.0;
        for k in (0..twist).rev() {
            out[k] = self.lower_ratio[k] * out[k + 1];
        }
        for k in twist + 1..=n {
            out[k] = self.upper_ratio[k] * out[k - 1];
        }

        // Edge elements in closed form:
        //   d_{ j,ν} = sqrt(C(2j, j+ν)) cos(θ/2)^{j+ν} (-sin(θ/2))^{j-ν}
        //   d_{-j,ν} = sqrt(C(2j, j+ν)) sin(θ/2)^{j+ν}   cos(θ/2)^{j-ν}
        let (up, down) = (col, n - col);
        let ln_p = self.cos_half.abs().ln();
        let ln_q = self.sin_half.abs().ln();
        let top_log = scaled_log(up, ln_p) + scaled_log(down, ln_q);
        let bottom_log = scaled_log(up, ln_q) + scaled_log(down, ln_p);
        let (anchor, expected) = if top_log >= bottom_log {
            (n, sign_pow(self.cos_half, up) * sign_pow(-self.sin_half, down))
        } else {
            (0, sign_pow(self.sin_half, up) * sign_pow(self.cos_half, down))
        };
        let actual = if out[anchor] != 0.0 {
            out[anchor].signum()
        } else {
            self.path_sign(twist, anchor)
        };

        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = expected * actual / norm;
        out.iter_mut().for_each(|x| *x *= scale);
    }

    /// Sign of `v_anchor / v_twist` from the ratio chain, used when the anchor underflows.
    fn path_sign(&self, twist: usize, anchor: usize) -> f64 {
        let negatives = if anchor < twist {
            self.lower_ratio[anchor..twist]
                .iter()
                .filter(|r| r.is_sign_negative())
                .count()
        } else {
            self.upper_ratio[twist + 1..=anchor]
                .iter()
                .filter(|r| r.is_sign_negative())
                .count()
        };
        if negatives % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn column(&mut self, col: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.column_into(col, &mut out);
        out
    }
}

/// Single rotation matrix element `d^j_{μν}(θ)`.
pub fn wigner_d(j: HalfInt, mu: HalfInt, nu: HalfInt, theta: f64) -> Result<f64> {
    check_j(j)?;
    let row = multiplet_index(j, mu, "mu")?;
    let col = multiplet_index(j, nu, "nu")?;
    let mut cols = WignerColumns::new(j, theta)?;
    let column = cols.column(col);
    Ok(column[row])
}

/// Full block `d^j(θ)` under the default allocation ceiling.
pub fn wigner_d_block(j: HalfInt, theta: f64) -> Result<WignerBlock> {
    wigner_d_block_with_limits(j, theta, BlockLimits::default())
}

pub fn wigner_d_block_with_limits(j: HalfInt, theta: f64, limits: BlockLimits) -> Result<WignerBlock> {
    let j2 = check_j(j)?;
    let dim = j2 + 1;
    let required = dim
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(std::mem::size_of::<f64>()))
        .unwrap_or(usize::MAX);
    if required > limits.max_bytes {
        return Err(Error::MemoryCeiling {
            required,
            limit: limits.max_bytes,
        });
    }
    let mut cols = WignerColumns::new(j, theta)?;
    let mut entries = vec![0.0; dim * dim];
    let mut column = vec![0.0; dim];
    for col in 0..dim {
        cols.column_into(col, &mut column);
        for (row, &v) in column.iter().enumerate() {
            entries[row * dim + col] = v;
        }
    }
    Ok(WignerBlock { j, theta, entries })
}

/// `ln |d^j_{μ,j}(θ)|`, the closed-form top column.
#[cfg(test)]
pub(crate) fn log_abs_top_column(j2: usize, row: usize, theta: f64) -> f64 {
    0.5 * log_binomial(j2 as u64, row as u64)
        + scaled_log(row, (0.5 * theta).cos().abs().ln())
        + scaled_log(j2 - row, (0.5 * theta).sin().abs().ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn h(twice: i64) -> HalfInt {
        HalfInt::from_doubled(twice)
    }

    fn ln_fact(n: i64) -> f64 {
        (1..=n).map(|k| (k as f64).ln()).sum()
    }

    /// Expansion of the rotated creation operators
    /// `(p a† + q b†)^{j+ν} (-q a† + p b†)^{j-ν}` onto `|j μ>`.
    fn binomial_oracle(j2: i64, mu2: i64, nu2: i64, theta: f64) -> f64 {
        let (p, q) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let a = (j2 + nu2) / 2;
        let b = (j2 - nu2) / 2;
        let k = (j2 + mu2) / 2;
        let norm = 0.5 * (ln_fact(k) + ln_fact(j2 - k) - ln_fact(a) - ln_fact(b));
        let mut sum = 0.0;
        for s in 0..=a.min(k) {
            let t = k - s;
            if t > b {
                continue;
            }
            let ln_binom = ln_fact(a) - ln_fact(s) - ln_fact(a - s) + ln_fact(b) - ln_fact(t) - ln_fact(b - t);
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * ln_binom.exp() * p.powi((s + b - t) as i32) * q.powi((a - s + t) as i32);
        }
        norm.exp() * sum
    }

    fn block(j2: i64, theta: f64) -> WignerBlock {
        wigner_d_block(h(j2), theta).unwrap()
    }

    #[test]
    fn spin_half_closed_form() {
        for &t in &[0.0, 0.3, 1.0, PI / 2.0, 2.5, PI] {
            let d = block(1, t);
            assert!((d.at(1, 1) - (t / 2.0).cos()).abs() < 1e-15);
            assert!((d.at(0, 0) - (t / 2.0).cos()).abs() < 1e-15);
            assert!((d.at(1, 0) + (t / 2.0).sin()).abs() < 1e-15);
            assert!((d.at(0, 1) - (t / 2.0).sin()).abs() < 1e-15);
        }
        let d = block(1, PI / 2.0);
        for v in d.entries() {
            assert!((v.abs() - FRAC_1_SQRT_2).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_at_zero() {
        for j2 in 0..12 {
            let d = block(j2, 0.0);
            for r in 0..d.dim() {
                for c in 0..d.dim() {
                    assert_eq!(d.at(r, c), if r == c { 1.0 } else { 0.0 });
                }
            }
        }
        assert_eq!(block(0, 1.3).entries(), &[1.0]);
    }

    #[test]
    fn half_turn_is_reflection() {
        for j2 in [1i64, 2, 5, 40, 301] {
            let d = block(j2, PI);
            let n = j2 as usize;
            for r in 0..=n {
                for c in 0..=n {
                    let want = if r == n - c {
                        if (n - c) % 2 == 0 {
                            1.0
                        } else {
                            -1.0
                        }
                    } else {
                        0.0
                    };
                    assert!((d.at(r, c) - want).abs() < 1e-10, "j2={j2} r={r} c={c}");
                }
            }
        }
    }

    #[test]
    fn matches_binomial_oracle_small_j() {
        for j2 in 0..=12i64 {
            for &t in &[PI / 3.0, 0.1, 1.7, 2.9, 3.1, -0.8, 4.0] {
                for mu2 in (-j2..=j2).step_by(2) {
                    for nu2 in (-j2..=j2).step_by(2) {
                        let got = wigner_d(h(j2), h(mu2), h(nu2), t).unwrap();
                        let want = binomial_oracle(j2, mu2, nu2, t);
                        assert!(
                            (got - want).abs() < 1e-12,
                            "j2={j2} mu2={mu2} nu2={nu2} t={t}: {got} vs {want}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn spin_one_at_pi_over_three() {
        // d^1 block in closed form.
        let t = PI / 3.0;
        let (c, s) = (t.cos(), t.sin());
        let want = [
            [(1.0 + c) / 2.0, -s / 2f64.sqrt(), (1.0 - c) / 2.0],
            [s / 2f64.sqrt(), c, -s / 2f64.sqrt()],
            [(1.0 - c) / 2.0, s / 2f64.sqrt(), (1.0 + c) / 2.0],
        ];
        // Rows/columns run from m = +1 down to -1 in `want`.
        let d = block(2, t);
        for (i, row) in want.iter().enumerate() {
            for (k, w) in row.iter().enumerate() {
                assert!((d.at(2 - i, 2 - k) - w).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_indices_outside_multiplet() {
        assert!(matches!(
            wigner_d(h(2), h(4), h(0), 0.3),
            Err(Error::OutOfMultiplet { .. })
        ));
        assert!(matches!(
            wigner_d(h(2), h(1), h(0), 0.3),
            Err(Error::OutOfMultiplet { .. })
        ));
        assert!(wigner_d(h(-1), h(0), h(0), 0.3).is_err());
    }

    #[test]
    fn block_refuses_above_ceiling() {
        let err = wigner_d_block_with_limits(h(100), 0.4, BlockLimits { max_bytes: 1000 }).unwrap_err();
        assert_eq!(
            err,
            Error::MemoryCeiling {
                required: 101 * 101 * 8,
                limit: 1000
            }
        );
    }

    #[test]
    fn unit_norms_at_j25() {
        let d = block(50, 1.234);
        let n = d.dim();
        for i in 0..n {
            let row: f64 = (0..n).map(|k| d.at(i, k).powi(2)).sum();
            let col: f64 = (0..n).map(|k| d.at(k, i).powi(2)).sum();
            assert!((row - 1.0).abs() < 1e-10 && (col - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn orthogonality_up_to_j200() {
        let grid: Vec<f64> = (0..20).map(|i| 0.05 + i as f64 * (PI - 0.1) / 19.0).collect();
        for &j2 in &[0i64, 1, 2, 3, 10, 25, 99, 200, 399, 400] {
            for &t in &grid {
                let d = block(j2, t);
                let n = d.dim();
                for a in 0..n {
                    for b in a..n {
                        let dot: f64 = (0..n).map(|m| d.at(m, a) * d.at(m, b)).sum();
                        let want = if a == b { 1.0 } else { 0.0 };
                        assert!((dot - want).abs() < 1e-9, "j2={j2} t={t} a={a} b={b}: {dot}");
                    }
                }
            }
        }
    }

    #[test]
    fn index_symmetries() {
        for &j2 in &[3i64, 8, 41, 120] {
            for &t in &[0.4, 1.9, 3.0] {
                let d = block(j2, t);
                let n = j2 as usize;
                for r in 0..=n {
                    for c in 0..=n {
                        let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
                        let x = d.at(r, c);
                        assert!((x - sign * d.at(c, r)).abs() < 1e-10);
                        assert!((x - d.at(n - c, n - r)).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn composition_up_to_j100() {
        for &j2 in &[1i64, 7, 30, 100, 200] {
            for &(t1, t2) in &[(0.3, 0.9), (1.2, 1.7), (2.5, 2.2)] {
                let a = block(j2, t1);
                let b = block(j2, t2);
                let ab = block(j2, t1 + t2);
                let n = a.dim();
                for r in 0..n {
                    for c in 0..n {
                        let prod: f64 = (0..n).map(|k| a.at(r, k) * b.at(k, c)).sum();
                        assert!((prod - ab.at(r, c)).abs() < 1e-8, "j2={j2} r={r} c={c}");
                    }
                }
            }
        }
    }

    #[test]
    fn top_column_matches_closed_form_at_j500() {
        let j2 = 1000usize;
        for &t in &[0.2, 1.1, PI / 2.0, 2.8] {
            let mut cols = WignerColumns::with_doubled(j2, t);
            let col = cols.column(j2);
            for (row, &v) in col.iter().enumerate() {
                let want = log_abs_top_column(j2, row, t).exp();
                assert!((v - want).abs() < 1e-10, "t={t} row={row}: {v} vs {want}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn bounded_with_unit_columns(j2 in 0usize..120, theta in -6.3f64..6.3, col_frac in 0.0f64..1.0) {
            let mut cols = WignerColumns::with_doubled(j2, theta);
            let col = ((j2 as f64) * col_frac).round() as usize;
            let v = cols.column(col);
            let norm: f64 = v.iter().map(|x| x * x).sum();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            prop_assert!(v.iter().all(|x| x.abs() <= 1.0 + 1e-12));
        }
    }
}
