//! Seeded random test fields.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conformal::MobiusMap;
use crate::grid::{DiscField, DiscGrid};

pub const DEFAULT_SEED: u64 = 42;

/// Highest Fourier mode and highest radial degree of random fields.
pub const MAX_DEGREE: usize = 6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smooth band-limited field: the terms `r^{m+2k} cos(m theta)`, `r^{m+2k} sin(m theta)`
/// with `m + 2k <= 6` (the polynomials of degree `<= 6` in `x, y`), coefficients
/// uniform in `[-1/2, 1/2]`.
pub fn band_limited(grid: &DiscGrid, rng: &mut impl Rng) -> DiscField {
    band_limited_scaled(grid, rng, 1.0)
}

pub fn band_limited_scaled(grid: &DiscGrid, rng: &mut impl Rng, scale: f64) -> DiscField {
    let mut terms = Vec::new();
    for m in 0..=MAX_DEGREE {
        for k in 0..=(MAX_DEGREE - m) / 2 {
            let c: f64 = rng.gen_range(-0.5..=0.5);
            let s: f64 = if m == 0 { 0.0 } else { rng.gen_range(-0.5..=0.5) };
            terms.push((m, m + 2 * k, c * scale, s * scale));
        }
    }
    grid.sample_polar(|r, t| {
        terms
            .iter()
            .map(|&(m, p, c, s)| {
                let mt = m as f64 * t;
                r.powi(p as i32) * (c * mt.cos() + s * mt.sin())
            })
            .sum()
    })
}

/// Random Möbius map with `|a| <= max_abs` and a uniform rotation.
pub fn mobius(rng: &mut impl Rng, max_abs: f64, rotate: bool) -> MobiusMap {
    let rad = max_abs * rng.gen::<f64>().sqrt();
    let arg = rng.gen_range(0.0..2.0 * PI);
    let theta = if rotate {
        rng.gen_range(0.0..2.0 * PI)
    } else {
        0.0
    };
    MobiusMap::new(Complex64::from_polar(rad, arg), theta).expect("|a| below 1")
}
