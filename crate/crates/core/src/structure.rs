//! Fixed-photon-number analysis of the input state: relative-number distributions, the 50:50
//! beam splitter `e^{-i(π/2)J_x}`, phase-state projections and NOON overlaps.
//!
//! A [`SectorState`] amplitude `A_μ` multiplies `|N/2-μ>_a |N/2+μ>_b`, so its `J_z` eigenvalue
//! is `-μ`. The beam splitter is applied through
//! `e^{-iβJ_x} = e^{iπ/2 J_z} e^{-iβJ_y} e^{-iπ/2 J_z}`, whose elements are
//! `i^{m'-m} d_{m'm}(β)`.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::specfun::WignerColumns;
use crate::states::{sector_amplitudes, InputSpec, SectorState, TruncationPolicy};

/// `P(μ) = |A_μ|²`, indexed by `μ + N/2`.
pub fn relative_number_distribution(sector: &SectorState) -> Vec<f64> {
    sector.amplitudes().iter().map(|a| a.norm_sqr()).collect()
}

/// `i^k` for integer `k`.
fn i_pow(k: i64) -> Complex64 {
    match k.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Applies `e^{-i(π/2)J_x}` within the multiplet.
pub fn beam_splitter_rotate(sector: &SectorState) -> SectorState {
    let n = sector.total_n();
    let a = sector.amplitudes();
    // s = m + N/2 = N - (μ + N/2)
    let mut out = vec![Complex64::new(0.0, 0.0); n + 1];
    let mut cols = WignerColumns::with_doubled(n, FRAC_PI_2);
    let mut column = vec![0.0; n + 1];
    for s in 0..=n {
        let amp = a[n - s];
        if amp == Complex64::new(0.0, 0.0) {
            continue;
        }
        cols.column_into(s, &mut column);
        for (t, &d) in column.iter().enumerate() {
            out[n - t] += amp * i_pow(t as i64 - s as i64) * d;
        }
    }
    SectorState::from_amplitudes(out).expect("a unitary image of a normalized state is normalized")
}

/// `P(φ)` on `K` uniform points of `[0, 2π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDistribution {
    pub grid: Vec<f64>,
    /// Normalized so that `Σ density · Δφ = 1`.
    pub density: Vec<f64>,
    /// The grid has fewer than `8(N+1)` points.
    pub under_resolved: bool,
}

impl PhaseDistribution {
    pub fn spacing(&self) -> f64 {
        TAU / self.grid.len() as f64
    }

    /// Harmonic `n ≥ 1` of largest magnitude in the density.
    pub fn dominant_harmonic(&self) -> usize {
        let k = self.density.len();
        let mut best = (0usize, 0.0f64);
        for n in 1..=k / 2 {
            let c: Complex64 = self
                .density
                .iter()
                .zip(&self.grid)
                .map(|(&d, &phi)| d * Complex64::from_polar(1.0, -(n as f64) * phi))
                .sum();
            if c.norm() > best.1 * (1.0 + 1e-12) {
                best = (n, c.norm());
            }
        }
        best.0
    }
}

/// `P(φ) ∝ |Σ_μ e^{iμφ} A_μ|²`.
pub fn phase_distribution(sector: &SectorState, grid_size: usize) -> Result<PhaseDistribution> {
    if grid_size < 2 {
        return Err(Error::invalid(
            "grid size",
            format!("must be at least 2, got {grid_size}"),
        ));
    }
    let n = sector.total_n();
    let amps = sector.amplitudes();
    let grid: Vec<f64> = (0..grid_size).map(|k| TAU * k as f64 / grid_size as f64).collect();
    let raw: Vec<f64> = grid
        .par_iter()
        .map(|&phi| {
            // The common factor e^{-iNφ/2} does not change the modulus.
            amps.iter()
                .enumerate()
                .map(|(k, &a)| a * Complex64::from_polar(1.0, k as f64 * phi))
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect();
    let spacing = TAU / grid_size as f64;
    let total: f64 = raw.iter().sum::<f64>() * spacing;
    Ok(PhaseDistribution {
        grid,
        density: raw.iter().map(|x| x / total).collect(),
        under_resolved: grid_size < 8 * (n + 1),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoonOverlap {
    /// `|<NOON|ψ>|²` with `|NOON> = (|N,0> + |0,N>)/√2`.
    pub probability: f64,
    /// `arg(A_{N/2} / A_{-N/2})`.
    pub relative_phase: f64,
}

pub fn noon_overlap(sector: &SectorState) -> Result<NoonOverlap> {
    let n = sector.total_n();
    if n == 0 {
        return Err(Error::invalid("total_n", "NOON overlap needs at least one photon"));
    }
    let a = sector.amplitudes();
    // |N,0> carries μ = -N/2 (index 0), |0,N> carries μ = N/2 (index N).
    let (low, high) = (a[0], a[n]);
    Ok(NoonOverlap {
        probability: 0.5 * (low + high).norm_sqr(),
        relative_phase: (high * low.conj()).arg(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoonScanPoint {
    /// |α|² / n̄
    pub split: f64,
    /// `None` when the sector carries no weight at this split.
    pub overlap: Option<NoonOverlap>,
}

/// NOON overlap of the rotated `total_n` sector across coherent fractions `|α|²/n̄`.
pub fn noon_scan(n_bar: f64, split_grid: &[f64], total_n: usize) -> Result<Vec<NoonScanPoint>> {
    noon_scan_with(n_bar, split_grid, total_n, TruncationPolicy::default())
}

pub fn noon_scan_with(
    n_bar: f64,
    split_grid: &[f64],
    total_n: usize,
    truncation: TruncationPolicy,
) -> Result<Vec<NoonScanPoint>> {
    if total_n == 0 {
        return Err(Error::invalid("total_n", "must be at least 1"));
    }
    split_grid
        .par_iter()
        .map(|&x| {
            let spec = InputSpec::with_split(n_bar, x, truncation)?;
            match sector_amplitudes(&spec, total_n) {
                Ok(sector) => Ok(NoonScanPoint {
                    split: x,
                    overlap: Some(noon_overlap(&beam_splitter_rotate(&sector))?),
                }),
                Err(Error::EmptySector { .. }) => Ok(NoonScanPoint {
                    split: x,
                    overlap: None,
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}
