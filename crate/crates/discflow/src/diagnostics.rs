//! Scalar monitors of a flow state, the CSV record schema and the
//! convergence/concentration classifier.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{BoundaryField, DiscField, DiscGrid};
use crate::model::{self, FlowState, ProblemData};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Converged,
    Concentrating,
    Undecided,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Converged => "converged",
            Classification::Concentrating => "concentrating",
            Classification::Undecided => "undecided",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub mass: f64,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub deviation_f: f64,
    pub deviation_g: f64,
    pub gauss_bonnet_residual: f64,
    pub min_k_minus_alpha_f: f64,
    pub compat_defect: f64,
    pub center: Option<Complex64>,
    pub epsilon: Option<f64>,
    pub classifier: Classification,
}

pub const CSV_HEADER: &str = "t,E,m0,rho,alpha,beta,F,G,gauss_bonnet_residual,min_K_minus_alpha_f,compat_defect,a_re,a_im,epsilon,classifier";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

impl DiagnosticsRecord {
    pub fn csv_row(&self) -> String {
        [
            num(self.t),
            num(self.energy),
            num(self.mass),
            num(self.rho),
            num(self.alpha),
            num(self.beta),
            num(self.deviation_f),
            num(self.deviation_g),
            num(self.gauss_bonnet_residual),
            num(self.min_k_minus_alpha_f),
            num(self.compat_defect),
            opt(self.center.map(|a| a.re)),
            opt(self.center.map(|a| a.im)),
            opt(self.epsilon),
            self.classifier.to_string(),
        ]
        .join(",")
    }
}

pub fn write_csv(mut out: impl Write, records: &[DiagnosticsRecord]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Pointwise rates of the flow: `alpha f - K` in the disc with the boundary row
/// replaced by `beta j - k`, plus `rho_t = log(beta^2 / alpha)`.
pub(crate) struct Rates {
    pub interior_gap: DiscField,
    pub boundary_gap: BoundaryField,
    pub alpha: f64,
    pub beta: f64,
    pub rho_rate: f64,
}

pub(crate) fn rates(grid: &DiscGrid, state: &FlowState, data: &ProblemData) -> Result<Rates> {
    let c = model::curvature_data(grid, state, data)?;
    let interior_gap = data.f.zip_map(&c.gauss, |f, k| c.alpha * f - k);
    let boundary_gap = data.j.zip_map(&c.geodesic, |j, k| c.beta * j - k);
    Ok(Rates {
        interior_gap,
        boundary_gap,
        alpha: c.alpha,
        beta: c.beta,
        rho_rate: (c.beta * c.beta / c.alpha).ln(),
    })
}

/// `F = int |alpha f - K|^2 dA_g + int |beta j - k|^2 ds_g + rho_t^2`.
pub fn deviation_f(grid: &DiscGrid, state: &FlowState, data: &ProblemData) -> Result<f64> {
    let r = rates(grid, state, data)?;
    deviation_f_from(grid, state, &r)
}

pub(crate) fn deviation_f_from(grid: &DiscGrid, state: &FlowState, r: &Rates) -> Result<f64> {
    let u = &state.u;
    let interior = grid.integrate_disc(&r.interior_gap.zip_map(u, |d, u| d * d * (2.0 * u).exp()))?;
    let boundary =
        grid.integrate_boundary(&r.boundary_gap.zip_map(&u.trace(), |d, u| d * d * u.exp()))?;
    Ok(interior + boundary + r.rho_rate * r.rho_rate)
}

/// `G = int |grad (K - alpha f)|^2 dz`.
pub fn deviation_g(grid: &DiscGrid, state: &FlowState, data: &ProblemData) -> Result<f64> {
    let r = rates(grid, state, data)?;
    grid.dirichlet_integral(&r.interior_gap)
}

/// `min_B (K - alpha f)`.
pub fn curvature_floor_monitor(grid: &DiscGrid, state: &FlowState, data: &ProblemData) -> Result<f64> {
    let r = rates(grid, state, data)?;
    Ok(-r.interior_gap.max())
}

/// `min_{dB} (k - beta j)`.
pub fn boundary_floor_monitor(grid: &DiscGrid, state: &FlowState, data: &ProblemData) -> Result<f64> {
    let r = rates(grid, state, data)?;
    Ok(-r.boundary_gap.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

/// `max_{dB} |(alpha f - K) - (beta j - k)|`, the mismatch of the two rate laws on the circle.
pub fn compatibility_defect(grid: &DiscGrid, state: &FlowState, data: &ProblemData) -> Result<f64> {
    let r = rates(grid, state, data)?;
    Ok(compat_from(&r))
}

fn compat_from(r: &Rates) -> f64 {
    r.interior_gap
        .trace()
        .zip_map(&r.boundary_gap, |a, b| a - b)
        .max_abs()
}

pub fn record(grid: &DiscGrid, state: &FlowState, data: &ProblemData) -> Result<DiagnosticsRecord> {
    let r = rates(grid, state, data)?;
    Ok(DiagnosticsRecord {
        t: state.t,
        energy: model::energy(grid, state, data)?,
        mass: model::mass(grid, &state.u)?,
        rho: state.rho,
        alpha: r.alpha,
        beta: r.beta,
        deviation_f: deviation_f_from(grid, state, &r)?,
        deviation_g: grid.dirichlet_integral(&r.interior_gap)?,
        gauss_bonnet_residual: model::gauss_bonnet_residual(grid, &state.u)?,
        min_k_minus_alpha_f: -r.interior_gap.max(),
        compat_defect: compat_from(&r),
        center: None,
        epsilon: None,
        classifier: Classification::Undecided,
    })
}

/// Lower curvature bound `kappa < 0` for the floor monitor: the more negative of
/// `-2 (|K_0| + alpha_1 |f| + beta_1 |j|)` and the negative root of
/// `kappa^2 + 2 m0 C kappa - C = 0`, where `C` bounds the multiplier growth terms.
/// `alpha_1`, `beta_1` are the initial multipliers times `bracket_factor`.
pub fn curvature_floor_bound(
    grid: &DiscGrid,
    state: &FlowState,
    data: &ProblemData,
    bracket_factor: f64,
) -> Result<f64> {
    let r = rates(grid, state, data)?;
    let k0 = model::gauss_curvature(grid, &state.u)?.max_abs();
    let m0 = model::mass(grid, &state.u)?;
    let f_sup = data.f.max_abs();
    let j_sup = data.j.max_abs();
    let alpha1 = bracket_factor * r.alpha;
    let beta1 = bracket_factor * r.beta;
    let rho = state.rho;
    let rho_t = r.rho_rate.abs();
    let c1 = (alpha1 * rho_t / rho * f_sup).max(alpha1 * alpha1 / rho * f_sup * f_sup);
    let c2 = (2.0 * beta1 * rho_t / (PI - rho) * j_sup).max(beta1 * beta1 / (PI - rho) * j_sup * j_sup);
    let mut kappa = -2.0 * (k0 + alpha1 * f_sup + beta1 * j_sup);
    for c in [c1, c2] {
        let root = -m0 * c - (m0 * m0 * c * c + c).sqrt();
        kappa = kappa.min(root);
    }
    Ok(kappa - 1e-6 * kappa.abs())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifierThresholds {
    pub steady_tol: f64,
    pub concentration_window: f64,
    pub mass_fraction: f64,
    /// Below this `epsilon` the concentration is no longer resolved.
    pub epsilon_floor: f64,
}

impl Default for ClassifierThresholds {
    fn default() -> Self {
        Self {
            steady_tol: 1e-6,
            concentration_window: 1e-2,
            mass_fraction: 0.9,
            epsilon_floor: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifierSample {
    pub deviation_f: f64,
    pub epsilon: Option<f64>,
    pub mass_fraction: Option<f64>,
}

impl From<&DiagnosticsRecord> for ClassifierSample {
    fn from(r: &DiagnosticsRecord) -> Self {
        Self {
            deviation_f: r.deviation_f,
            epsilon: r.epsilon,
            mass_fraction: None,
        }
    }
}

pub const MIN_TAIL: usize = 10;

/// Converged: `F` below the steady tolerance and `epsilon` bounded away from 0
/// over the tail. Concentrating: `F` inside the concentration window, `epsilon`
/// at least halved over the tail and the mass fraction near the concentration
/// point above the threshold. Anything else, or fewer than 10 samples, is undecided.
pub fn classify(tail: &[ClassifierSample], th: &ClassifierThresholds) -> Classification {
    if tail.len() < MIN_TAIL {
        return Classification::Undecided;
    }
    let last = tail[tail.len() - 1];
    let eps: Vec<f64> = tail.iter().filter_map(|s| s.epsilon).collect();
    let (eps_first, eps_last, eps_min) = match (eps.first(), eps.last()) {
        (Some(&a), Some(&b)) => (Some(a), Some(b), eps.iter().cloned().fold(f64::INFINITY, f64::min)),
        _ => (None, None, f64::INFINITY),
    };
    let eps_bounded = match eps_first {
        None => true,
        Some(first) => eps_min >= 0.5 * first && eps_min > th.epsilon_floor,
    };
    if last.deviation_f < th.steady_tol && eps_bounded {
        return Classification::Converged;
    }
    if let (Some(first), Some(eps_last), Some(fraction)) = (eps_first, eps_last, last.mass_fraction) {
        if last.deviation_f < th.concentration_window
            && eps_last <= 0.5 * first
            && fraction > th.mass_fraction
        {
            return Classification::Concentrating;
        }
    }
    Classification::Undecided
}

/// Share of the mass `m0` carried by the part of the closed disc within
/// distance `radius` of the boundary point `target`.
pub fn mass_fraction_near(grid: &DiscGrid, u: &DiscField, target: Complex64, radius: f64) -> Result<f64> {
    let total = model::mass(grid, u)?;
    let near = |x: f64, y: f64| {
        if (Complex64::new(x, y) - target).norm() < radius {
            1.0
        } else {
            0.0
        }
    };
    let mask = grid.sample(near);
    let area = grid.integrate_disc(&u.zip_map(&mask, |u, m| m * (2.0 * u).exp()))?;
    let length =
        grid.integrate_boundary(&u.trace().zip_map(&mask.trace(), |u, m| m * u.exp()))?;
    Ok((0.5 * area + length) / total)
}
