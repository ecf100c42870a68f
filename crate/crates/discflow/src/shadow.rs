//! Concentration tracking: the center of mass `P = Phi(0)` of the normalized
//! metric, its distance `epsilon = (1 - |a|) / (1 + |a|)` to the boundary, the
//! moment vector `Xi` that drives it, and the reduced two-dimensional ODE for
//! the center.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cap::coordinate_functions;
use crate::conformal::{
    compose_boundary, compose_field, driving_gradient, log_derivative_modulus, scaling_radius, MobiusMap,
};
use crate::diagnostics::{self, Classification, ClassifierSample, ClassifierThresholds, MIN_TAIL};
use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::grid::{BoundaryField, DiscField, DiscGrid};
use crate::model::{self, FlowState, ProblemData};
use crate::normalize::{self, Normalization};

/// `(1 - |a|) / (1 + |a|)`.
pub fn epsilon_of(a: Complex64) -> f64 {
    let r = a.norm();
    (1.0 - r) / (1.0 + r)
}

/// `|a|` with the given `epsilon`.
pub fn abs_of_epsilon(epsilon: f64) -> f64 {
    (1.0 - epsilon) / (1.0 + epsilon)
}

/// Smallest `epsilon` the angular resolution admits.
pub fn resolution_floor(grid: &DiscGrid) -> f64 {
    4.0 / grid.n_theta() as f64
}

/// Moments of the curvature gaps of `state` against the coordinate functions
/// of the cap of radius `radius`, in the normalized frame:
/// `int psi_i (alpha f - K)∘Phi e^{2v} dz + int psi_i (beta j - k)∘Phi e^{v} ds`.
pub fn xi_moment(
    grid: &DiscGrid,
    state: &FlowState,
    data: &ProblemData,
    normalization: &Normalization,
    radius: f64,
) -> Result<[f64; 2]> {
    grid.check(&normalization.v)?;
    let (area, length) = pulled_back_densities(grid, state, data, &normalization.phi, 2.0)?;
    let mut out = [0.0; 2];
    for (o, psi) in out.iter_mut().zip(coordinate_functions(grid, radius)) {
        *o = grid.integrate_disc(&area.zip_map(&psi, |a, p| a * p))?
            + grid.integrate_boundary(&length.zip_map(&psi.trace(), |a, p| a * p))?;
    }
    Ok(out)
}

/// `(alpha f - K) e^{s u}` and `(beta j - k) e^{s u / 2}` composed with `Phi`
/// and multiplied by `|Phi'|^s`, `|Phi'|^{s/2}`: the curvature gaps of the
/// pulled-back metric times `e^{s v}`, `e^{s v / 2}`. Composing these products
/// instead of the bare gaps avoids interpolating the large values the gaps
/// take where the metric is small.
fn pulled_back_densities(
    grid: &DiscGrid,
    state: &FlowState,
    data: &ProblemData,
    phi: &MobiusMap,
    power: f64,
) -> Result<(DiscField, BoundaryField)> {
    let r = diagnostics::rates(grid, state, data)?;
    let u = &state.u;
    let interior = r.interior_gap.zip_map(u, |g, u| g * (power * u).exp());
    let boundary = r.boundary_gap.zip_map(&u.trace(), |g, u| g * (0.5 * power * u).exp());
    let log_d = log_derivative_modulus(grid, phi);
    let area = compose_field(grid, &interior, phi)?.zip_map(&log_d, |q, l| q * (power * l).exp());
    let length = compose_boundary(grid, &boundary, phi)?
        .zip_map(&log_d.trace(), |q, l| q * (0.5 * power * l).exp());
    Ok((area, length))
}

/// Leading term `16 pi eps R^3 sqrt(f + j^2) / ((1 + R^2)^2 f) grad J` of the
/// moment vector for data concentrated at a boundary point with values `f`, `j`
/// and driving gradient `grad_j` there.
pub fn xi_asymptotic(f: f64, j: f64, grad_j: [f64; 2], epsilon: f64) -> Result<[f64; 2]> {
    let radius = scaling_radius(f, j)?;
    let r2 = 1.0 + radius * radius;
    let c = 16.0 * std::f64::consts::PI * epsilon * radius.powi(3) * (f + j * j).sqrt() / (r2 * r2 * f);
    Ok([c * grad_j[0], c * grad_j[1]])
}

/// Velocity of the center of mass implied by the normalization condition:
/// the residual `Z(a, t)` stays zero, its time derivative at fixed `a` is the
/// moment vector, so `da/dt = -(dZ/da)^{-1} Xi`.
pub fn center_velocity(
    grid: &DiscGrid,
    state: &FlowState,
    data: &ProblemData,
    normalization: &Normalization,
) -> Result<Complex64> {
    let radius = normalization.radius;
    let xi = xi_moment(grid, state, data, normalization, radius)?;
    let jac = normalize::residual_jacobian(grid, &state.u, radius, normalization.phi.a)?;
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    if !(det.abs() > 0.0 && det.is_finite()) {
        return Err(Error::Solvability("singular normalization Jacobian".into()));
    }
    let dx = (jac[1][1] * xi[0] - jac[0][1] * xi[1]) / det;
    let dy = (jac[0][0] * xi[1] - jac[1][0] * xi[0]) / det;
    Ok(Complex64::new(-dx, -dy))
}

/// Splitting of the squared curvature deviation along the cap coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationSplit {
    /// `rho_t^2`.
    pub rate: f64,
    /// Squared component along the constants.
    pub constant: f64,
    /// Squared components along the two coordinate functions.
    pub coordinate: f64,
    /// Remainder orthogonal to constants and coordinates.
    pub remainder: f64,
}

impl DeviationSplit {
    /// `rho_t^2 + coordinate + remainder`, the approximation of `F` that drops the constant part.
    pub fn reduced(&self) -> f64 {
        self.rate + self.coordinate + self.remainder
    }

    pub fn total(&self) -> f64 {
        self.reduced() + self.constant
    }
}

/// Expands the curvature gaps, pulled back to the normalized frame, in
/// `L^2(e^{2v} dz + e^{v} ds)` against the orthonormalized span of
/// `{1, X_1, X_2}`; the remainder is the rest of the squared norm.
pub fn deviation_split(
    grid: &DiscGrid,
    state: &FlowState,
    data: &ProblemData,
    normalization: &Normalization,
) -> Result<DeviationSplit> {
    let w = pulled_back_densities(grid, state, data, &normalization.phi, 1.0)?;
    let weight = (normalization.v.map(f64::exp), normalization.v.trace().map(|v| (0.5 * v).exp()));
    // Inner product of (interior, boundary) pairs, `a` already carrying its weight.
    let inner = |a: &(DiscField, BoundaryField), b: &(DiscField, BoundaryField)| -> Result<f64> {
        let area = grid.integrate_disc(&a.0.zip_map(&b.0, |x, y| x * y))?;
        let length = grid.integrate_boundary(&a.1.zip_map(&b.1, |x, y| x * y))?;
        Ok(area + length)
    };
    let [x1, x2] = coordinate_functions(grid, normalization.radius);
    let mut basis: Vec<(DiscField, BoundaryField)> = Vec::new();
    for f in [grid.constant(1.0), x1, x2] {
        let mut e = (f.zip_map(&weight.0, |f, w| f * w), f.trace().zip_map(&weight.1, |f, w| f * w));
        for b in &basis {
            let c = inner(&e, b)?;
            e = (e.0.zip_map(&b.0, |x, y| x - c * y), e.1.zip_map(&b.1, |x, y| x - c * y));
        }
        let n = inner(&e, &e)?.sqrt();
        if !(n > 0.0) {
            return Err(Error::Solvability("degenerate cap coordinate basis".into()));
        }
        basis.push((e.0.map(|x| x / n), e.1.map(|x| x / n)));
    }
    // The squared norm is Möbius invariant; it is taken in the original frame,
    // where the far field of a concentrated metric is resolved.
    let r = diagnostics::rates(grid, state, data)?;
    let total = diagnostics::deviation_f_from(grid, state, &r)? - r.rho_rate * r.rho_rate;
    let k: Vec<f64> = basis.iter().map(|b| inner(&w, b)).collect::<Result<_>>()?;
    let constant = k[0] * k[0];
    let coordinate = k[1] * k[1] + k[2] * k[2];
    Ok(DeviationSplit {
        rate: r.rho_rate * r.rho_rate,
        constant,
        coordinate,
        remainder: (total - constant - coordinate).max(0.0),
    })
}

/// Euclidean barycenter of `1/2 e^{2u} dz + e^{u} ds`, a starting point for
/// the normalization of a state with no better guess.
pub fn center_guess(grid: &DiscGrid, u: &DiscField) -> Result<Complex64> {
    let m = model::mass(grid, u)?;
    let area = u.map(|u| (2.0 * u).exp());
    let length = u.trace().map(f64::exp);
    let mut c = [0.0; 2];
    for (o, coord) in c.iter_mut().zip([grid.sample(|x, _| x), grid.sample(|_, y| y)]) {
        *o = 0.5 * grid.integrate_disc(&area.zip_map(&coord, |a, x| a * x))?
            + grid.integrate_boundary(&length.zip_map(&coord.trace(), |a, x| a * x))?;
    }
    Ok(Complex64::new(c[0], c[1]) / m)
}

/// Cartesian gradient of the driving function on the circle, for evaluation
/// at arbitrary boundary angles.
#[derive(Clone, Debug)]
pub struct BoundaryGradient {
    x: BoundaryField,
    y: BoundaryField,
}

impl BoundaryGradient {
    pub fn new(grid: &DiscGrid, data: &ProblemData) -> Result<Self> {
        let (gx, gy) = driving_gradient(grid, &data.f, &data.j_harm)?;
        Ok(Self { x: gx.trace(), y: gy.trace() })
    }

    /// `grad J(e^{i theta})` in Cartesian components.
    pub fn cartesian(&self, grid: &DiscGrid, theta: f64) -> [f64; 2] {
        [grid.interpolate_boundary(&self.x, theta), grid.interpolate_boundary(&self.y, theta)]
    }

    /// `grad J(e^{i theta})` in the frame rotated so that `e^{i theta}` sits
    /// on the positive real axis: (outward normal, counterclockwise tangential).
    pub fn rotated(&self, grid: &DiscGrid, theta: f64) -> [f64; 2] {
        rotate_to_frame(self.cartesian(grid, theta), theta)
    }
}

/// Components of `v` along `e^{i theta}` and `i e^{i theta}`.
pub fn rotate_to_frame(v: [f64; 2], theta: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c * v[0] + s * v[1], -s * v[0] + c * v[1]]
}

/// One tracked snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterSample {
    pub t: f64,
    /// Center of mass `Phi(0)`.
    pub a: Complex64,
    /// `arg a`.
    pub phi: f64,
    pub epsilon: f64,
    pub xi: [f64; 2],
    /// Cartesian `grad J` at the projected target `a / |a|`.
    pub grad_j: [f64; 2],
    pub deviation_f: f64,
    pub normalization_residual: f64,
}

impl CenterSample {
    /// `grad J` at the target in the rotated frame (normal, tangential).
    pub fn grad_j_rotated(&self) -> [f64; 2] {
        rotate_to_frame(self.grad_j, self.phi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackGap {
    pub t: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterTrack {
    pub radius: f64,
    pub samples: Vec<CenterSample>,
    /// Snapshots whose normalization failed.
    pub gaps: Vec<TrackGap>,
    /// Time of the first snapshot with `epsilon` below the resolution floor; tracking stops there.
    pub stopped_at: Option<f64>,
}

/// Normalizes each snapshot in turn, warm-starting from the previous center,
/// and records the center, `epsilon`, `Xi` and `grad J` at the target.
pub fn track_centers(
    grid: &DiscGrid,
    snapshots: &[FlowState],
    data: &ProblemData,
    radius: f64,
) -> Result<CenterTrack> {
    let gradient = BoundaryGradient::new(grid, data)?;
    let floor = resolution_floor(grid);
    let mut track = CenterTrack {
        radius,
        samples: Vec::new(),
        gaps: Vec::new(),
        stopped_at: None,
    };
    let mut guess: Option<MobiusMap> = None;
    for snap in snapshots {
        let start = match &guess {
            Some(g) => *g,
            None => MobiusMap::translation(center_guess(grid, &snap.u)?)
                .unwrap_or_else(|_| MobiusMap::identity()),
        };
        let n = match normalize::normalize(grid, &snap.u, radius, &start) {
            Ok(n) => n,
            Err(e @ Error::NormalizationStalled { .. }) => {
                track.gaps.push(TrackGap { t: snap.t, reason: e.to_string() });
                continue;
            }
            Err(e) => return Err(e),
        };
        let a = n.phi.a;
        let epsilon = epsilon_of(a);
        if epsilon < floor {
            track.stopped_at = Some(snap.t);
            break;
        }
        let phi = if a.norm() > 0.0 { a.arg() } else { 0.0 };
        track.samples.push(CenterSample {
            t: snap.t,
            a,
            phi,
            epsilon,
            xi: xi_moment(grid, snap, data, &n, radius)?,
            grad_j: gradient.cartesian(grid, phi),
            deviation_f: diagnostics::deviation_f(grid, snap, data)?,
            normalization_residual: n.residual_norm(),
        });
        guess = Some(n.phi);
    }
    Ok(track)
}

/// Finite-difference rates `(d|a|/dt, d(arg a)/dt)` at each sample: central
/// differences inside, one-sided at the ends. Needs at least two samples.
pub fn measured_rates(track: &CenterTrack) -> Vec<[f64; 2]> {
    let s = &track.samples;
    if s.len() < 2 {
        return vec![[0.0; 2]; s.len()];
    }
    let coords: Vec<[f64; 2]> = {
        let mut out = Vec::with_capacity(s.len());
        let mut phi = s[0].phi;
        for (k, x) in s.iter().enumerate() {
            if k > 0 {
                let mut d = x.phi - s[k - 1].phi;
                d -= (d / std::f64::consts::TAU).round() * std::f64::consts::TAU;
                phi += d;
            }
            out.push([x.a.norm(), phi]);
        }
        out
    };
    let n = s.len();
    (0..n)
        .map(|k| {
            let (lo, hi) = (k.saturating_sub(1), (k + 1).min(n - 1));
            let dt = s[hi].t - s[lo].t;
            [(coords[hi][0] - coords[lo][0]) / dt, (coords[hi][1] - coords[lo][1]) / dt]
        })
        .collect()
}

/// Constants of the reduced ODE
/// `(da/dt, dphi/dt) = -eps^2 (c_normal dJ/dnu, c_tangential dJ/dtau)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowConstants {
    pub c_normal: f64,
    pub c_tangential: f64,
}

/// Root-mean-square gradient component below which the matching constant is
/// not identifiable from a track. An unidentifiable tangential constant is
/// set equal to the normal one.
const IDENTIFIABLE: f64 = 1e-8;

/// Least-squares fit of the constants to `rates / eps^2` of a reference track,
/// skipping samples before `t_start`.
pub fn calibrate(track: &CenterTrack, t_start: f64) -> Result<ShadowConstants> {
    let rates = measured_rates(track);
    let (mut sn, mut nn, mut st, mut tt) = (0.0, 0.0, 0.0, 0.0);
    let mut used = 0;
    for (s, r) in track.samples.iter().zip(&rates) {
        if s.t < t_start {
            continue;
        }
        used += 1;
        let e2 = s.epsilon * s.epsilon;
        let [gn, gt] = s.grad_j_rotated();
        sn += (r[0] / e2) * gn;
        nn += gn * gn;
        st += (r[1] / e2) * gt;
        tt += gt * gt;
    }
    let floor = used as f64 * IDENTIFIABLE * IDENTIFIABLE;
    if used < 2 || !(nn > floor) {
        return Err(Error::Precondition(
            "calibration needs two samples with a nonzero normal gradient".into(),
        ));
    }
    let c_normal = -sn / nn;
    let c_tangential = if tt > floor { -st / tt } else { c_normal };
    Ok(ShadowConstants { c_normal, c_tangential })
}

/// Center of mass in polar form `a e^{i phi}`, `0 <= a < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowState {
    pub a: f64,
    pub phi: f64,
}

impl ShadowState {
    pub fn epsilon(&self) -> f64 {
        (1.0 - self.a) / (1.0 + self.a)
    }

    pub fn center(&self) -> Complex64 {
        Complex64::from_polar(self.a, self.phi)
    }
}

/// Largest `a` an ODE step may produce.
pub const MAX_ABS: f64 = 1.0 - 1e-12;

/// Explicit Euler step of the reduced ODE with `grad J` given in the rotated
/// frame of the current target. Returns the new state and whether `a` had to
/// be clamped back into `[0, 1)`.
pub fn shadow_ode_step(
    state: ShadowState,
    grad_j_rotated: [f64; 2],
    constants: &ShadowConstants,
    dt: f64,
) -> (ShadowState, bool) {
    let e2 = state.epsilon().powi(2);
    let a = state.a - dt * e2 * constants.c_normal * grad_j_rotated[0];
    let phi = state.phi - dt * e2 * constants.c_tangential * grad_j_rotated[1];
    let clamped = a.clamp(0.0, MAX_ABS);
    (ShadowState { a: clamped, phi }, clamped != a)
}

/// Integrates the reduced ODE from `start` at `t0` with step `dt`, reporting
/// the state at each requested time (sorted, not before `t0`). The number of
/// clamped steps is returned alongside.
pub fn integrate_shadow(
    grid: &DiscGrid,
    gradient: &BoundaryGradient,
    start: ShadowState,
    t0: f64,
    times: &[f64],
    constants: &ShadowConstants,
    dt: f64,
) -> Result<(Vec<ShadowState>, usize)> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("shadow step {dt} must be positive")));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut state = start;
    let mut t = t0;
    let mut clamps = 0;
    for &target in times {
        if target < t {
            return Err(Error::Config("shadow output times must be sorted and after t0".into()));
        }
        while t < target {
            let h = dt.min(target - t);
            let (next, clamped) = shadow_ode_step(state, gradient.rotated(grid, state.phi), constants, h);
            clamps += usize::from(clamped);
            state = next;
            t = if target - t <= dt { target } else { t + h };
        }
        out.push(state);
    }
    Ok((out, clamps))
}

/// The largest `c` with `eps(t) <= eps(t0) / (1 + c eps(t0) (t - t0))` at every
/// sample, and the largest violation of the bound with that `c` (rounding only).
pub fn hyperbolic_fit(times: &[f64], epsilons: &[f64]) -> Result<(f64, f64)> {
    if times.len() != epsilons.len() || times.len() < 2 {
        return Err(Error::Dimension("need matching series of length >= 2".into()));
    }
    let (t0, e0) = (times[0], epsilons[0]);
    let c = times
        .iter()
        .zip(epsilons)
        .skip(1)
        .map(|(&t, &e)| (1.0 / e - 1.0 / e0) / (t - t0))
        .fold(f64::INFINITY, f64::min);
    let violation = times
        .iter()
        .zip(epsilons)
        .map(|(&t, &e)| e - e0 / (1.0 + c * e0 * (t - t0)))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((c, violation))
}

/// Radius of the boundary neighborhood, in units of `epsilon`, whose mass
/// share the classifier inspects.
pub const NEIGHBORHOOD_FACTOR: f64 = 20.0;

/// Center tracking over the snapshots of a run plus the classification of
/// each record's tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunAnalysis {
    pub track: CenterTrack,
    pub classification: Classification,
    /// Projected concentration point `a / |a|` of the last tracked center.
    pub target: Option<Complex64>,
}

/// Tracks the centers of the snapshots (normalizing at `radius`), writes
/// center and `epsilon` into the records taken at snapshot times, and
/// classifies the tail ending at each record. The classification of the last
/// record is returned.
pub fn analyze_run(
    grid: &DiscGrid,
    data: &ProblemData,
    trajectory: &mut Trajectory,
    radius: f64,
    thresholds: &ClassifierThresholds,
) -> Result<RunAnalysis> {
    let track = track_centers(grid, &trajectory.snapshots, data, radius)?;
    let mut samples = Vec::with_capacity(trajectory.records.len());
    for rec in trajectory.records.iter_mut() {
        let mut sample = ClassifierSample::from(&*rec);
        if let Some(c) = track.samples.iter().find(|c| c.t == rec.t) {
            rec.center = Some(c.a);
            rec.epsilon = Some(c.epsilon);
            sample.epsilon = Some(c.epsilon);
            if let Some(snap) = trajectory.snapshots.iter().find(|s| s.t == rec.t) {
                let target = if c.a.norm() > 0.0 { c.a / c.a.norm() } else { Complex64::new(1.0, 0.0) };
                sample.mass_fraction = Some(diagnostics::mass_fraction_near(
                    grid,
                    &snap.u,
                    target,
                    NEIGHBORHOOD_FACTOR * c.epsilon,
                )?);
            }
        }
        samples.push(sample);
    }
    for k in 0..samples.len() {
        let start = (k + 1).saturating_sub(MIN_TAIL);
        trajectory.records[k].classifier = diagnostics::classify(&samples[start..=k], thresholds);
    }
    let classification = trajectory
        .records
        .last()
        .map(|r| r.classifier)
        .unwrap_or(Classification::Undecided);
    let target = track
        .samples
        .last()
        .filter(|c| c.a.norm() > 0.0)
        .map(|c| c.a / c.a.norm());
    Ok(RunAnalysis {
        track,
        classification,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cap::cap_profile;
    use crate::flow::balanced_rho;
    use std::f64::consts::PI;

    fn cap_state(grid: &DiscGrid, u: DiscField, data: &ProblemData) -> FlowState {
        let rho = balanced_rho(grid, &u, data).unwrap();
        FlowState::new(u, rho)
    }

    #[test]
    fn moment_vanishes_at_rest_point() {
        let g = DiscGrid::new(24, 48).unwrap();
        let r = 1.0 / 3f64.sqrt();
        let d = ProblemData::constant(&g, 1.0, r).unwrap();
        let s = cap_state(&g, cap_profile(&g, r, 1.0).unwrap(), &d);
        let n = normalize::normalize(&g, &s.u, r, &MobiusMap::identity()).unwrap();
        let xi = xi_moment(&g, &s, &d, &n, r).unwrap();
        assert!(xi[0].hypot(xi[1]) < 1e-6, "{xi:?}");
    }

    #[test]
    fn moment_respects_reflection_symmetry() {
        let g = DiscGrid::new(24, 48).unwrap();
        let r = 0.6;
        let d = ProblemData::constant(&g, 1.0, (1.0 - r * r) / (2.0 * r)).unwrap();
        let cap = cap_profile(&g, r, 1.0).unwrap();
        let bump = g.sample(|x, y| 0.1 * x + 0.05 * (x * x - y * y) + 0.03 * y * y * x);
        let s = cap_state(&g, cap.zip_map(&bump, |a, b| a + b), &d);
        let n = normalize::normalize(&g, &s.u, r, &MobiusMap::identity()).unwrap();
        assert!(n.phi.a.im.abs() < 1e-12);
        let xi = xi_moment(&g, &s, &d, &n, r).unwrap();
        assert!(xi[1].abs() < 1e-8, "{xi:?}");
        assert!(xi[0].abs() > 1e-6);
    }

    #[test]
    fn asymptotic_term() {
        assert_eq!(xi_asymptotic(1.3, 1.0, [0.0, 0.0], 0.1).unwrap(), [0.0, 0.0]);
        let xi = xi_asymptotic(1.0, 0.0, [0.2, -0.1], 0.05).unwrap();
        let c = 4.0 * PI * 0.05;
        assert!((xi[0] - 0.2 * c).abs() < 1e-15 && (xi[1] + 0.1 * c).abs() < 1e-15);
        assert!(xi_asymptotic(0.0, 1.0, [1.0, 0.0], 0.1).is_err());
    }

    #[test]
    fn epsilon_round_trip() {
        for eps in [1.0, 0.5, 0.1, 1e-3] {
            let a = Complex64::from_polar(abs_of_epsilon(eps), 1.3);
            assert!((epsilon_of(a) - eps).abs() < 1e-14);
        }
        assert_eq!(epsilon_of(Complex64::new(0.0, 0.0)), 1.0);
    }

    #[test]
    fn rotation_to_target_frame() {
        let v = rotate_to_frame([0.0, 1.0], PI / 2.0);
        assert!((v[0] - 1.0).abs() < 1e-15 && v[1].abs() < 1e-15);
        let v = rotate_to_frame([1.0, 0.0], PI / 2.0);
        assert!(v[0].abs() < 1e-15 && (v[1] + 1.0).abs() < 1e-15);
    }

    const UNIT: ShadowConstants = ShadowConstants {
        c_normal: 1.0,
        c_tangential: 2.0,
    };

    #[test]
    fn ode_step_signs() {
        let s = ShadowState { a: 0.9, phi: 0.3 };
        let (n, clamped) = shadow_ode_step(s, [0.5, 0.0], &UNIT, 0.1);
        assert!(n.a < s.a && n.phi == s.phi && !clamped);
        let (n, _) = shadow_ode_step(s, [-0.5, 0.2], &UNIT, 0.1);
        assert!(n.a > s.a && n.phi < s.phi);
        let (n, _) = shadow_ode_step(s, [0.0, 0.0], &UNIT, 0.1);
        assert_eq!(n, s);
    }

    #[test]
    fn ode_step_clamps() {
        let s = ShadowState { a: 1.0 - 1e-9, phi: 0.0 };
        let (n, clamped) = shadow_ode_step(s, [-1e9, 0.0], &UNIT, 1e3);
        assert!(clamped && n.a == MAX_ABS);
        let s = ShadowState { a: 0.0, phi: 0.0 };
        let (n, clamped) = shadow_ode_step(s, [1.0, 0.0], &UNIT, 1.0);
        assert!(clamped && n.a == 0.0);
    }

    #[test]
    fn hyperbolic_decay_under_outward_descent() {
        let mut s = ShadowState { a: 0.9, phi: 0.0 };
        let (mut ts, mut es) = (vec![0.0], vec![s.epsilon()]);
        let dt = 0.5;
        for k in 1..=2000 {
            s = shadow_ode_step(s, [-0.1, 0.0], &UNIT, dt).0;
            ts.push(k as f64 * dt);
            es.push(s.epsilon());
        }
        let (c, violation) = hyperbolic_fit(&ts, &es).unwrap();
        assert!(c > 0.0, "{c}");
        // -deps/dt = (1 + eps)^2 / 2 * C g eps^2 >= C g eps^2 / 2
        assert!(c >= 0.5 * 0.1 - 1e-12);
        assert!(violation < 1e-10);
        assert!(es.last().unwrap() < &es[0]);
    }

    fn synthetic_track(rates: [f64; 2], grad: [f64; 2]) -> CenterTrack {
        let samples = (0..6)
            .map(|k| {
                let t = k as f64 * 0.5;
                let a = Complex64::from_polar(0.9 + rates[0] * t, 0.2 + rates[1] * t);
                CenterSample {
                    t,
                    a,
                    phi: a.arg(),
                    epsilon: epsilon_of(a),
                    xi: [0.0; 2],
                    grad_j: grad,
                    deviation_f: 0.0,
                    normalization_residual: 0.0,
                }
            })
            .collect();
        CenterTrack {
            radius: 0.5,
            samples,
            gaps: Vec::new(),
            stopped_at: None,
        }
    }

    #[test]
    fn measured_rates_of_uniform_motion() {
        let track = synthetic_track([1e-3, -2e-3], [0.0; 2]);
        for r in measured_rates(&track) {
            assert!((r[0] - 1e-3).abs() < 1e-12 && (r[1] + 2e-3).abs() < 1e-12);
        }
    }

    #[test]
    fn calibration_inverts_the_reduced_law() {
        // grad J along the target direction only: tangential constant unidentifiable.
        let track = synthetic_track([1e-4, 0.0], [0.0; 2]);
        assert!(calibrate(&track, 0.0).is_err());
        let phi: f64 = 0.2;
        let track = synthetic_track([1e-4, 0.0], [-0.3 * phi.cos(), -0.3 * phi.sin()]);
        let c = calibrate(&track, 0.0).unwrap();
        let e2: f64 = track.samples.iter().map(|s| 1e-4 / s.epsilon.powi(2) / 0.3).sum::<f64>() / 6.0;
        assert!((c.c_normal - e2).abs() / e2 < 0.05);
        assert_eq!(c.c_tangential, c.c_normal);
    }

    #[test]
    fn tracking_a_translated_cap() {
        let g = DiscGrid::new(16, 64).unwrap();
        let r = 1.0 / 3f64.sqrt();
        let d = ProblemData::constant(&g, 1.0, r).unwrap();
        let cap = cap_profile(&g, r, 1.0).unwrap();
        let snaps: Vec<FlowState> = [0.0, 0.2, 0.4]
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let phi = MobiusMap::translation(Complex64::new(-x, 0.1 * x)).unwrap();
                let u = crate::conformal::pullback_conformal_factor(&g, &cap, &phi).unwrap();
                let mut s = cap_state(&g, u, &d);
                s.t = k as f64;
                s
            })
            .collect();
        let track = track_centers(&g, &snaps, &d, r).unwrap();
        assert!(track.gaps.is_empty() && track.stopped_at.is_none());
        for (s, x) in track.samples.iter().zip([0.0, 0.2, 0.4]) {
            assert!((s.a - Complex64::new(x, -0.1 * x)).norm() < 1e-7, "{:?}", s.a);
            assert!(s.xi[0].hypot(s.xi[1]) < 1e-6);
        }
    }

    #[test]
    fn tracking_stops_below_resolution_floor() {
        let g = DiscGrid::new(12, 32).unwrap();
        let d = ProblemData::constant(&g, 1.0, 0.5).unwrap();
        let a = Complex64::new(abs_of_epsilon(0.5 * resolution_floor(&g)), 0.0);
        let s = crate::flow::concentrated_initial_data(&g, a, &d).unwrap();
        let radius = scaling_radius(1.0, 0.5).unwrap();
        let track = track_centers(&g, &[s], &d, radius).unwrap();
        assert!(track.samples.is_empty());
        assert!(track.stopped_at.is_some() || !track.gaps.is_empty());
    }
}
