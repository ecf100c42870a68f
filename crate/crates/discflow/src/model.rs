//! Curvatures of `g = e^{2u} |dz|^2`, the multipliers, the energy and the
//! conserved mass of the flow.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundaryField, DiscField, DiscGrid};

/// Prescribed curvatures: `f` in the disc, `j` on the circle.
#[derive(Clone, Debug)]
pub struct ProblemData {
    pub f: DiscField,
    pub j: BoundaryField,
    /// Harmonic extension of `j`.
    pub j_harm: DiscField,
}

impl ProblemData {
    pub fn new(grid: &DiscGrid, f: DiscField, j: BoundaryField) -> Result<Self> {
        grid.check(&f)?;
        grid.check_boundary(&j)?;
        if !f.values.iter().all(|&v| v > 0.0 && v.is_finite()) {
            return Err(Error::Domain("f must be finite and positive".into()));
        }
        if !j.values.iter().all(|&v| v > 0.0 && v.is_finite()) {
            return Err(Error::Domain("j must be finite and positive".into()));
        }
        let j_harm = grid.harmonic_extension(&j)?;
        Ok(Self { f, j, j_harm })
    }

    pub fn constant(grid: &DiscGrid, f: f64, j: f64) -> Result<Self> {
        Self::new(grid, grid.constant(f), BoundaryField::constant(grid.n_theta(), j))
    }
}

/// Conformal factor, auxiliary budget variable and time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub u: DiscField,
    pub rho: f64,
    pub t: f64,
}

impl FlowState {
    pub fn new(u: DiscField, rho: f64) -> Self {
        Self { u, rho, t: 0.0 }
    }
}

#[derive(Clone, Debug)]
pub struct CurvatureData {
    pub gauss: DiscField,
    pub geodesic: BoundaryField,
    pub alpha: f64,
    pub beta: f64,
}

pub fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < PI {
        Ok(())
    } else {
        Err(Error::State(format!("rho = {rho} outside (0, pi)")))
    }
}

/// `K = e^{-2u} (-Laplacian u)`.
pub fn gauss_curvature(grid: &DiscGrid, u: &DiscField) -> Result<DiscField> {
    let lap = grid.laplacian(u)?;
    Ok(u.zip_map(&lap, |u, l| -(-2.0 * u).exp() * l))
}

/// `k = e^{-u} (du/dnu + 1)` on the circle.
pub fn geodesic_curvature(grid: &DiscGrid, u: &DiscField) -> Result<BoundaryField> {
    let dn = grid.normal_derivative(u)?;
    Ok(u.trace().zip_map(&dn, |u, d| (-u).exp() * (d + 1.0)))
}

/// `int_B f e^{2u} dz`.
pub fn interior_weight(grid: &DiscGrid, u: &DiscField, data: &ProblemData) -> Result<f64> {
    grid.integrate_disc(&u.zip_map(&data.f, |u, f| f * (2.0 * u).exp()))
}

/// `int_{dB} j e^{u} ds`.
pub fn boundary_weight(grid: &DiscGrid, u: &DiscField, data: &ProblemData) -> Result<f64> {
    grid.integrate_boundary(&u.trace().zip_map(&data.j, |u, j| j * u.exp()))
}

/// `alpha = 2 rho / int f e^{2u}`, `beta = 2 (pi - rho) / int j e^{u}`.
pub fn multipliers(grid: &DiscGrid, state: &FlowState, data: &ProblemData) -> Result<(f64, f64)> {
    check_rho(state.rho)?;
    let wi = interior_weight(grid, &state.u, data)?;
    let wb = boundary_weight(grid, &state.u, data)?;
    Ok((2.0 * state.rho / wi, 2.0 * (PI - state.rho) / wb))
}

pub fn curvature_data(grid: &DiscGrid, state: &FlowState, data: &ProblemData) -> Result<CurvatureData> {
    let (alpha, beta) = multipliers(grid, state, data)?;
    Ok(CurvatureData {
        gauss: gauss_curvature(grid, &state.u)?,
        geodesic: geodesic_curvature(grid, &state.u)?,
        alpha,
        beta,
    })
}

pub fn energy(grid: &DiscGrid, state: &FlowState, data: &ProblemData) -> Result<f64> {
    let rho = state.rho;
    check_rho(rho)?;
    let u = &state.u;
    let dirichlet = grid.dirichlet_integral(u)?;
    let boundary = grid.integrate_boundary(&u.trace())?;
    let wi = interior_weight(grid, u, data)?;
    let wb = boundary_weight(grid, u, data)?;
    let rest = PI - rho;
    Ok(0.5 * dirichlet + boundary - rho * wi.ln() - 2.0 * rest * wb.ln()
        + 2.0 * rest * (2.0 * rest).ln()
        + rho
        + rho * (2.0 * rho).ln())
}

/// `dE/drho = log(alpha) - log(beta^2)`.
pub fn denergy_drho(grid: &DiscGrid, state: &FlowState, data: &ProblemData) -> Result<f64> {
    let rho = state.rho;
    check_rho(rho)?;
    let wi = interior_weight(grid, &state.u, data)?;
    let wb = boundary_weight(grid, &state.u, data)?;
    Ok((2.0 * rho / wi).ln() - 2.0 * (2.0 * (PI - rho) / wb).ln())
}

/// First variation of the energy in `u` along `phi`, by quadrature:
/// `int grad u . grad phi + int_{dB} phi - alpha int f e^{2u} phi - beta int j e^u phi`.
pub fn energy_directional_derivative(
    grid: &DiscGrid,
    state: &FlowState,
    data: &ProblemData,
    phi: &DiscField,
) -> Result<f64> {
    grid.check(phi)?;
    let (alpha, beta) = multipliers(grid, state, data)?;
    let u = &state.u;
    let (ux, uy) = grid.gradient(u)?;
    let (px, py) = grid.gradient(phi)?;
    let dot = ux
        .zip_map(&px, |a, b| a * b)
        .zip_map(&uy.zip_map(&py, |a, b| a * b), |a, b| a + b);
    let weighted = u
        .zip_map(&data.f, |u, f| f * (2.0 * u).exp())
        .zip_map(phi, |w, p| w * p);
    let bweighted = u
        .trace()
        .zip_map(&data.j, |u, j| j * u.exp())
        .zip_map(&phi.trace(), |w, p| w * p);
    Ok(grid.integrate_disc(&dot)? + grid.integrate_boundary(&phi.trace())?
        - alpha * grid.integrate_disc(&weighted)?
        - beta * grid.integrate_boundary(&bweighted)?)
}

/// `m0 = 1/2 int_B e^{2u} + int_{dB} e^{u}`.
pub fn mass(grid: &DiscGrid, u: &DiscField) -> Result<f64> {
    let area = grid.integrate_disc(&u.map(|v| (2.0 * v).exp()))?;
    let length = grid.integrate_boundary(&u.trace().map(f64::exp))?;
    Ok(0.5 * area + length)
}

/// `int K dA_g + int k ds_g - 2 pi`, which vanishes identically in the continuum.
pub fn gauss_bonnet_residual(grid: &DiscGrid, u: &DiscField) -> Result<f64> {
    let k = gauss_curvature(grid, u)?;
    let kg = geodesic_curvature(grid, u)?;
    let interior = grid.integrate_disc(&k.zip_map(u, |k, u| k * (2.0 * u).exp()))?;
    let boundary = grid.integrate_boundary(&kg.zip_map(&u.trace(), |k, u| k * u.exp()))?;
    Ok(interior + boundary - 2.0 * PI)
}

/// `(1/4pi) int |grad u|^2 + mean_{dB} u - log mean_{dB} e^u`, non-negative.
pub fn lebedev_milin_deficit(grid: &DiscGrid, u: &DiscField) -> Result<f64> {
    let dirichlet = grid.dirichlet_integral(u)?;
    let trace = u.trace();
    let mean = grid.integrate_boundary(&trace)? / (2.0 * PI);
    let mean_exp = grid.integrate_boundary(&trace.map(f64::exp))? / (2.0 * PI);
    Ok(dirichlet / (4.0 * PI) + mean - mean_exp.ln())
}

/// L2 norm of `-Laplacian u - f e^{2u}` over the disc plus L2 norm of
/// `du/dnu + 1 - j e^u` over the circle.
pub fn problem_residual(grid: &DiscGrid, u: &DiscField, data: &ProblemData) -> Result<f64> {
    let (interior, boundary) = problem_residual_fields(grid, u, data)?;
    let a = grid.integrate_disc(&interior.map(|v| v * v))?;
    let b = grid.integrate_boundary(&boundary.map(|v| v * v))?;
    Ok(a.sqrt() + b.sqrt())
}

pub fn problem_residual_fields(
    grid: &DiscGrid,
    u: &DiscField,
    data: &ProblemData,
) -> Result<(DiscField, BoundaryField)> {
    grid.check(&data.f)?;
    let lap = grid.laplacian(u)?;
    let interior = DiscField {
        values: lap
            .values
            .iter()
            .zip(&u.values)
            .zip(&data.f.values)
            .map(|((&l, &u), &f)| -l - f * (2.0 * u).exp())
            .collect(),
        ..lap
    };
    let dn = grid.normal_derivative(u)?;
    let boundary = BoundaryField {
        values: dn
            .values
            .iter()
            .zip(&u.trace().values)
            .zip(&data.j.values)
            .map(|((&d, &u), &j)| d + 1.0 - j * u.exp())
            .collect(),
    };
    Ok((interior, boundary))
}
