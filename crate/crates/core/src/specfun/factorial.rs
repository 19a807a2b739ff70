use std::f64::consts::PI;
use std::sync::OnceLock;

use super::SignedLog;

const TABLE_LEN: usize = 256;

fn table() -> &'static [f64; TABLE_LEN] {
    static TABLE: OnceLock<[f64; TABLE_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; TABLE_LEN];
        for n in 2..TABLE_LEN {
            t[n] = t[n - 1] + (n as f64).ln();
        }
        t
    })
}

/// Stirling series for ln Γ(x); accurate to machine precision for x > 256.
fn ln_gamma_large(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series
}

/// ln(n!)
pub fn log_factorial(n: u64) -> f64 {
    if (n as usize) < TABLE_LEN {
        table()[n as usize]
    } else {
        ln_gamma_large(n as f64 + 1.0)
    }
}

/// ln C(n, k); `-inf` when `k > n`.
pub fn log_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        f64::NEG_INFINITY
    } else {
        log_factorial(n) - log_factorial(k) - log_factorial(n - k)
    }
}

/// Physicists' Hermite polynomial at the origin, H_m(0).
///
/// Zero for odd `m`; `(-1)^k (2k)!/k!` for `m = 2k`.
pub fn hermite_at_zero(m: u64) -> SignedLog {
    if m % 2 == 1 {
        return SignedLog::ZERO;
    }
    let k = m / 2;
    let sign = if k % 2 == 0 { 1 } else { -1 };
    SignedLog::new(log_factorial(m) - log_factorial(k), sign)
}
