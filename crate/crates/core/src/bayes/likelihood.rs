//! Likelihood curves `φ ↦ P(n_c, n_d | φ)` on the uniform grid `φ_k = kπ/(G-1)`.
//!
//! Writing `Δ = d^j(π/2)`, the rotation factors as `e^{-iφJ_y} = U e^{iφJ_z} U†` with
//! `U_{μm} = i^μ Δ_{μm} i^{-m}`, so
//!
//! ```text
//! ψ_μ(φ) = i^μ Σ_m Δ_{μm} e^{imφ} h_m,      h_m = Σ_ν i^{-ν} Δ_{νm} c_ν
//! ```
//!
//! `h` depends only on the input sector; every outcome of the sector then costs one column of
//! `Δ` and one FFT of length `2(G-1)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::outcome::SectorInput;
use crate::specfun::WignerColumns;
use crate::states::InputSpec;

pub const MIN_GRID: usize = 64;

/// Uniform phase grid over `[0, π]`, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PhaseGrid {
    size: usize,
}

impl PhaseGrid {
    pub fn new(size: usize) -> Result<Self> {
        if size < MIN_GRID {
            return Err(Error::invalid(
                "grid size",
                format!("must be at least {MIN_GRID}, got {size}"),
            ));
        }
        Ok(PhaseGrid { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn spacing(&self) -> f64 {
        PI / (self.size - 1) as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        k as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.size).map(|k| self.point(k)).collect()
    }

    fn fft_len(&self) -> usize {
        2 * (self.size - 1)
    }
}

/// Shared FFT plan for one grid size.
#[derive(Clone)]
pub struct LikelihoodPlan {
    grid: PhaseGrid,
    fft: Arc<dyn Fft<f64>>,
}

impl LikelihoodPlan {
    pub fn new(grid: PhaseGrid) -> Self {
        let fft = FftPlanner::new().plan_fft_inverse(grid.fft_len());
        LikelihoodPlan { grid, fft }
    }

    pub fn grid(&self) -> PhaseGrid {
        self.grid
    }
}

/// `e^{iπk/4}` for integer `k`.
fn eighth_root(k: i64) -> Complex64 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match k.rem_euclid(8) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(h, h),
        2 => Complex64::new(0.0, 1.0),
        3 => Complex64::new(-h, h),
        4 => Complex64::new(-1.0, 0.0),
        5 => Complex64::new(-h, -h),
        6 => Complex64::new(0.0, -1.0),
        _ => Complex64::new(h, -h),
    }
}

/// Precomputed state of one total-photon-number sector.
pub struct SectorLikelihood {
    total_n: usize,
    h: Vec<Complex64>,
    log_scale: f64,
    quarter_turn: WignerColumns,
    plan: LikelihoodPlan,
}

impl SectorLikelihood {
    pub fn new(spec: &InputSpec, total_n: usize, plan: &LikelihoodPlan) -> Self {
        let input = SectorInput::new(spec, total_n);
        let dim = total_n + 1;
        let mut quarter_turn = WignerColumns::with_doubled(total_n, PI / 2.0);
        let mut h = vec![Complex64::new(0.0, 0.0); dim];
        let mut column = vec![0.0; dim];
        for &(l, c) in &input.coeffs {
            // i^{-ν} with ν = l - N/2
            let weighted = c * eighth_root(total_n as i64 - 2 * l as i64);
            quarter_turn.column_into(l, &mut column);
            // Δ_{νm} = (-1)^{ν-m} Δ_{mν}
            for (s, (hs, &d)) in h.iter_mut().zip(&column).enumerate() {
                let sign = if (l + s) % 2 == 0 { 1.0 } else { -1.0 };
                *hs += weighted * (sign * d);
            }
        }
        SectorLikelihood {
            total_n,
            h,
            log_scale: input.log_scale,
            quarter_turn,
            plan: plan.clone(),
        }
    }

    pub fn total_n(&self) -> usize {
        self.total_n
    }

    /// P(n_c, N - n_c | φ_k) for every grid point.
    pub fn curve(&mut self, n_c: usize) -> Vec<f64> {
        let len = self.plan.grid.fft_len();
        let dim = self.total_n + 1;
        let mut column = vec![0.0; dim];
        self.quarter_turn.column_into(n_c, &mut column);
        let mut buffer = vec![Complex64::new(0.0, 0.0); len];
        for (s, (&d, &hs)) in column.iter().zip(&self.h).enumerate() {
            let sign = if (n_c + s) % 2 == 0 { 1.0 } else { -1.0 };
            buffer[s % len] += hs * (sign * d);
        }
        self.plan.fft.process(&mut buffer);
        let scale = (2.0 * self.log_scale).exp();
        buffer[..self.plan.grid.size]
            .iter()
            .map(|z| (z.norm_sqr() * scale).min(1.0))
            .collect()
    }
}

/// Likelihood of a single outcome on a grid of `grid_size` points.
pub fn likelihood_curve(spec: &InputSpec, n_c: u32, n_d: u32, grid_size: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    let plan = LikelihoodPlan::new(PhaseGrid::new(grid_size)?);
    let mut sector = SectorLikelihood::new(spec, (n_c + n_d) as usize, &plan);
    Ok(sector.curve(n_c as usize))
}
