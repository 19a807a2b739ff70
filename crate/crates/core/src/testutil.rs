//! Dense linear algebra for test oracles.

use num_complex::Complex64;

type C = Complex64;

pub fn matmul(a: &[Vec<C>], b: &[Vec<C>]) -> Vec<Vec<C>> {
    let n = a.len();
    let mut out = vec![vec![C::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == C::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// Scaling and squaring with a Taylor core.
pub fn expm(g: &[Vec<C>]) -> Vec<Vec<C>> {
    let n = g.len();
    let norm = g
        .iter()
        .map(|r| r.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let scaled: Vec<Vec<C>> = g.iter().map(|r| r.iter().map(|x| x / 2f64.powi(s)).collect()).collect();
    let mut result: Vec<Vec<C>> = (0..n)
        .map(|i| (0..n).map(|j| C::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
        .collect();
    let mut term = result.clone();
    for k in 1..30 {
        term = matmul(&term, &scaled);
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x /= k as f64;
            }
        }
        for i in 0..n {
            for j in 0..n {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        result = matmul(&result, &result);
    }
    result
}
