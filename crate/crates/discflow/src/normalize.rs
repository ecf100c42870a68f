//! Möbius normalization: the translation `Phi_a` that puts the center of mass
//! of the pulled-back metric, lifted to the sphere of scale `R`, at the pole.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conformal::{pullback_conformal_factor, scaling_radius, MobiusMap, MOBIUS_MARGIN};
use crate::error::{Error, Result};
use crate::flow::FlowRates;
use crate::grid::{DiscField, DiscGrid};
use crate::model::{self, ProblemData};

pub const TOLERANCE: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 50;
pub const MAX_HALVINGS: usize = 20;
const JACOBIAN_STEP: f64 = 1e-6;
/// `|a|` beyond which a normalization is flagged as near-degenerate.
pub const DEGENERATE_ABS: f64 = 1.0 - 1e-6;

/// Newton trials whose pulled-back field keeps less than this share of the
/// mass of `u` are rejected: they have pushed the mass off the grid, where
/// the discrete residual vanishes spuriously.
pub const MASS_RETENTION: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub phi: MobiusMap,
    pub v: DiscField,
    pub residual: [f64; 2],
    pub radius: f64,
    pub iterations: usize,
    /// The iteration pushed `|a|` against the boundary and was projected back.
    pub near_degenerate: bool,
}

impl Normalization {
    pub fn residual_norm(&self) -> f64 {
        self.residual[0].hypot(self.residual[1])
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if radius > 0.0 && radius <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("normalization radius {radius} outside (0, 1]")))
    }
}

/// `1/2 int_B psi_R e^{2v} + int_{dB} psi_R e^{v}` with `psi_R(z) = 2Rz / (1 + R^2 |z|^2)`.
pub fn center_of_mass_residual(grid: &DiscGrid, v: &DiscField, radius: f64) -> Result<[f64; 2]> {
    check_radius(radius)?;
    grid.check(v)?;
    let d = grid.sample(|x, y| 1.0 + radius * radius * (x * x + y * y));
    let px = grid.sample(|x, _| 2.0 * radius * x).zip_map(&d, |p, d| p / d);
    let py = grid.sample(|_, y| 2.0 * radius * y).zip_map(&d, |p, d| p / d);
    let area = v.map(|v| (2.0 * v).exp());
    let length = v.trace().map(f64::exp);
    let mut out = [0.0; 2];
    for (o, p) in out.iter_mut().zip([&px, &py]) {
        *o = 0.5 * grid.integrate_disc(&area.zip_map(p, |a, b| a * b))?
            + grid.integrate_boundary(&length.zip_map(&p.trace(), |a, b| a * b))?;
    }
    Ok(out)
}

/// `[min R(z), max R(z)]` over the grid nodes, with `j` extended harmonically.
pub fn radius_range(data: &ProblemData) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&f, &j) in data.f.values.iter().zip(&data.j_harm.values) {
        let r = scaling_radius(f, j.max(0.0))?;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

pub fn default_radius(data: &ProblemData) -> Result<f64> {
    let (lo, hi) = radius_range(data)?;
    Ok(0.5 * (lo + hi))
}

fn evaluate(grid: &DiscGrid, u: &DiscField, radius: f64, a: Complex64) -> Result<(DiscField, [f64; 2])> {
    let phi = MobiusMap::translation(a)?;
    let v = pullback_conformal_factor(grid, u, &phi)?;
    let res = center_of_mass_residual(grid, &v, radius)?;
    Ok((v, res))
}

/// Central-difference Jacobian of the center-of-mass residual of
/// `u ∘ Phi_a + log |Phi_a'|` with respect to `(Re a, Im a)`.
pub(crate) fn residual_jacobian(grid: &DiscGrid, u: &DiscField, radius: f64, a: Complex64) -> Result<[[f64; 2]; 2]> {
    let mut jac = [[0.0; 2]; 2];
    for (col, dir) in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)].into_iter().enumerate() {
        let h = JACOBIAN_STEP * dir;
        let plus = evaluate(grid, u, radius, project(a + h).0)?.1;
        let minus = evaluate(grid, u, radius, project(a - h).0)?.1;
        for row in 0..2 {
            jac[row][col] = (plus[row] - minus[row]) / (2.0 * JACOBIAN_STEP);
        }
    }
    Ok(jac)
}

fn project(a: Complex64) -> (Complex64, bool) {
    let limit = 1.0 - 2.0 * MOBIUS_MARGIN;
    if a.norm() >= limit {
        (a * (limit / a.norm()), true)
    } else {
        (a, false)
    }
}

fn norm(r: [f64; 2]) -> f64 {
    r[0].hypot(r[1])
}

/// Damped Newton solve for the translation `Phi_a` (no rotation) with
/// `center_of_mass_residual(u ∘ Phi_a + log |Phi_a'|) = 0`, starting from `guess.a`.
/// The Jacobian is a central difference in `(Re a, Im a)`; a step is halved
/// until the residual decreases and the mass stays resolved.
pub fn normalize(grid: &DiscGrid, u: &DiscField, radius: f64, guess: &MobiusMap) -> Result<Normalization> {
    check_radius(radius)?;
    grid.check(u)?;
    let (mut a, mut degenerate) = project(guess.a);
    let (mut v, mut res) = evaluate(grid, u, radius, a)?;
    let mass_floor = MASS_RETENTION * model::mass(grid, u)?;
    let mut iterations = 0;
    while norm(res) >= TOLERANCE {
        if iterations == MAX_ITERATIONS {
            return Err(stalled(a, v, res, radius, iterations, degenerate));
        }
        iterations += 1;
        let jac = residual_jacobian(grid, u, radius, a)?;
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !(det.abs() > 0.0 && det.is_finite()) {
            return Err(stalled(a, v, res, radius, iterations, degenerate));
        }
        let dx = (jac[1][1] * res[0] - jac[0][1] * res[1]) / det;
        let dy = (jac[0][0] * res[1] - jac[1][0] * res[0]) / det;
        let full = Complex64::new(-dx, -dy);
        let mut accepted = false;
        let mut scale = 1.0;
        for _ in 0..=MAX_HALVINGS {
            let (trial, hit) = project(a + scale * full);
            let (tv, tres) = evaluate(grid, u, radius, trial)?;
            if norm(tres) < norm(res) && model::mass(grid, &tv)? > mass_floor {
                a = trial;
                v = tv;
                res = tres;
                degenerate |= hit;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(stalled(a, v, res, radius, iterations, degenerate));
        }
    }
    Ok(Normalization {
        phi: MobiusMap::translation(a)?,
        v,
        residual: res,
        radius,
        iterations,
        near_degenerate: degenerate || a.norm() > DEGENERATE_ABS,
    })
}

fn stalled(a: Complex64, v: DiscField, res: [f64; 2], radius: f64, iterations: usize, degenerate: bool) -> Error {
    let best = Normalization {
        phi: MobiusMap::translation(a).unwrap_or_else(|_| MobiusMap::identity()),
        v,
        residual: res,
        radius,
        iterations,
        near_degenerate: degenerate,
    };
    Error::NormalizationStalled {
        iterations,
        residual: norm(res),
        best: Box::new(best),
    }
}

/// `(int_B u_t^2 e^{2u} + int_{dB} u_t^2 e^{u})^{1/2}`, which bounds the
/// velocity of the normalizing map along the flow.
pub fn drift_speed_bound(grid: &DiscGrid, u: &DiscField, rates: &FlowRates) -> Result<f64> {
    grid.check(u)?;
    let interior = grid.integrate_disc(&rates.interior_rate.zip_map(u, |d, u| d * d * (2.0 * u).exp()))?;
    let boundary = grid.integrate_boundary(&rates.du.trace().zip_map(&u.trace(), |d, u| d * d * u.exp()))?;
    Ok((interior + boundary).sqrt())
}
