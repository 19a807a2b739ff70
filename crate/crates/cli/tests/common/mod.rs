use num_complex::Complex64 as C;

/// Matrix exponential by scaling and squaring of a Taylor series.
pub fn expm(a: &[Vec<C>]) -> Vec<Vec<C>> {
    let n = a.len();
    let norm = a
        .iter()
        .map(|row| row.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = 0.5f64.powi(squarings as i32);
    let mul = |x: &[Vec<C>], y: &[Vec<C>]| -> Vec<Vec<C>> {
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| x[i][k] * y[k][j]).sum()).collect())
            .collect()
    };
    let scaled: Vec<Vec<C>> = a.iter().map(|r| r.iter().map(|x| x * scale).collect()).collect();
    let mut result: Vec<Vec<C>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) })
                .collect()
        })
        .collect();
    let mut term = result.clone();
    for k in 1..30 {
        term = mul(&term, &scaled)
            .into_iter()
            .map(|r| r.into_iter().map(|x| x / k as f64).collect())
            .collect();
        for i in 0..n {
            for j in 0..n {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = mul(&result, &result);
    }
    result
}

pub fn fact(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}
