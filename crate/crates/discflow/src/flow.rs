//! Time integration of the coupled flow for `(u, rho)`.
//!
//! Interior nodes follow `u_t = alpha f - K`, boundary nodes carry their own law
//! `u_t = beta j - k`, and `rho_t = log(beta^2 / alpha)`. Two schemes are offered:
//! classical RK4 under a diffusive step restriction, and a variable-step BDF2
//! scheme that treats the Laplacian and the normal derivative implicitly with a
//! frozen coefficient `e^{-2 u_ref}` (refrozen when `u` drifts away from it) and
//! everything else by extrapolation.

use std::f64::consts::PI;

use faer::solvers::{PartialPivLu, SpSolver};
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cap;
use crate::conformal::{scaling_radius, MobiusMap};
use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::grid::{DiscField, DiscGrid};
use crate::model::{self, FlowState, ProblemData};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExplicitRk4,
    SemiImplicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub dt_init: f64,
    pub dt_max: f64,
    pub cfl_safety: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub steady_tol: f64,
    pub record_every: usize,
    /// Stop as soon as a record has `F < steady_tol`.
    pub stop_at_steady: bool,
    /// Keep a full state every this many steps.
    pub snapshot_every: Option<usize>,
    /// Semi-implicit only: steps between doublings of the step size.
    pub dt_growth_interval: usize,
    /// Semi-implicit only: refreeze the coefficient when `max |u - u_ref|` exceeds this.
    pub refreeze_tol: f64,
    /// Factor applied to the initial multipliers in the curvature floor bound.
    pub bracket_factor: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-4,
            dt_max: 1e-2,
            cfl_safety: 0.5,
            t_end: 20.0,
            scheme: Scheme::SemiImplicit,
            steady_tol: 1e-6,
            record_every: 10,
            stop_at_steady: true,
            snapshot_every: None,
            dt_growth_interval: 25,
            refreeze_tol: 0.05,
            bracket_factor: 2.0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.dt_init > 0.0 && self.dt_max > 0.0 && self.dt_init.is_finite() && self.dt_max.is_finite()) {
            return bad("time steps must be positive");
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety < 1.0) {
            return bad("cfl_safety must lie in (0, 1)");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be finite and non-negative");
        }
        if !(self.steady_tol > 0.0) {
            return bad("steady_tol must be positive");
        }
        if self.record_every == 0 || self.dt_growth_interval == 0 || self.snapshot_every == Some(0) {
            return bad("step intervals must be positive");
        }
        if !(self.refreeze_tol > 0.0 && self.bracket_factor >= 1.0) {
            return bad("refreeze_tol must be positive and bracket_factor at least 1");
        }
        Ok(())
    }
}

/// Time derivatives of a state. The boundary row of `du` holds `beta j - k`;
/// `interior_rate` is `alpha f - K` at every node, boundary included.
#[derive(Clone, Debug)]
pub struct FlowRates {
    pub du: DiscField,
    pub interior_rate: DiscField,
    pub drho: f64,
    pub alpha: f64,
    pub beta: f64,
}

pub fn rhs(grid: &DiscGrid, state: &FlowState, data: &ProblemData) -> Result<FlowRates> {
    let r = diagnostics::rates(grid, state, data)?;
    let mut du = r.interior_gap.clone();
    du.values[..grid.n_theta()].copy_from_slice(&r.boundary_gap.values);
    Ok(FlowRates {
        du,
        interior_rate: r.interior_gap,
        drho: r.rho_rate,
        alpha: r.alpha,
        beta: r.beta,
    })
}

/// `int u_t^2 e^{2u} + int_{dB} u_t^2 e^{u} + rho_t^2`, the energy dissipation rate.
pub fn dissipation_rate(grid: &DiscGrid, u: &DiscField, rates: &FlowRates) -> Result<f64> {
    let interior = grid.integrate_disc(&rates.interior_rate.zip_map(u, |d, u| d * d * (2.0 * u).exp()))?;
    let boundary = grid.integrate_boundary(&rates.du.trace().zip_map(&u.trace(), |d, u| d * d * u.exp()))?;
    Ok(interior + boundary + rates.drho * rates.drho)
}

/// Previous step of the two-step scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub u_prev: DiscField,
    pub rho_prev: f64,
    pub dt_prev: f64,
}

/// Quantities fixed at the start of a run that the blow-up guard and the
/// curvature floor monitor compare against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Guard {
    pub u_sup0: f64,
    pub alpha_max: f64,
    pub beta_max: f64,
    pub kappa: f64,
}

/// Everything needed to continue a run bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub state: FlowState,
    pub step: usize,
    pub dt_nominal: f64,
    pub steps_since_growth: usize,
    pub history: Option<History>,
    pub frozen: Option<DiscField>,
    pub guard: Guard,
    pub dissipation: f64,
}

pub const DT_FLOOR: f64 = 1e-10;
pub const BLOW_UP_MARGIN: f64 = 5.0;

struct Implicit {
    lap: Mat<f64>,
    normal_rows: Vec<Vec<(usize, f64)>>,
    key: Option<u64>,
    lu: Option<PartialPivLu<f64>>,
}

/// Stateful integrator around a [`Checkpoint`].
pub struct Flow<'a> {
    grid: &'a DiscGrid,
    data: &'a ProblemData,
    config: FlowConfig,
    cp: Checkpoint,
    current: FlowRates,
    implicit: Option<Implicit>,
}

impl<'a> Flow<'a> {
    pub fn new(grid: &'a DiscGrid, data: &'a ProblemData, initial: FlowState, config: FlowConfig) -> Result<Self> {
        config.validate()?;
        grid.check(&initial.u)?;
        model::check_rho(initial.rho)?;
        if !initial.u.is_finite() {
            return Err(Error::State("initial u is not finite".into()));
        }
        let current = rhs(grid, &initial, data)?;
        let kappa = diagnostics::curvature_floor_bound(grid, &initial, data, config.bracket_factor)?;
        let guard = Guard {
            u_sup0: initial.u.max(),
            alpha_max: current.alpha,
            beta_max: current.beta,
            kappa,
        };
        let cp = Checkpoint {
            state: initial,
            step: 0,
            dt_nominal: config.dt_init.min(config.dt_max),
            steps_since_growth: 0,
            history: None,
            frozen: None,
            guard,
            dissipation: 0.0,
        };
        Ok(Self::assemble(grid, data, config, cp, current))
    }

    pub fn resume(grid: &'a DiscGrid, data: &'a ProblemData, checkpoint: Checkpoint, config: FlowConfig) -> Result<Self> {
        config.validate()?;
        grid.check(&checkpoint.state.u)?;
        let current = rhs(grid, &checkpoint.state, data)?;
        Ok(Self::assemble(grid, data, config, checkpoint, current))
    }

    fn assemble(grid: &'a DiscGrid, data: &'a ProblemData, config: FlowConfig, cp: Checkpoint, current: FlowRates) -> Self {
        let implicit = (config.scheme == Scheme::SemiImplicit).then(|| Implicit {
            lap: grid.nodal_laplacian(),
            normal_rows: (0..grid.n_theta()).map(|k| grid.nodal_normal_derivative_row(k)).collect(),
            key: None,
            lu: None,
        });
        Self {
            grid,
            data,
            config,
            cp,
            current,
            implicit,
        }
    }

    pub fn state(&self) -> &FlowState {
        &self.cp.state
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.cp
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    /// Rates at the current state.
    pub fn rates(&self) -> &FlowRates {
        &self.current
    }

    pub fn is_finished(&self) -> bool {
        self.cp.state.t >= self.config.t_end
    }

    /// Largest stable explicit step at the current state.
    pub fn explicit_dt(&self) -> f64 {
        let h = self.grid.h_min();
        let min_weight = (2.0 * self.cp.state.u.min()).exp();
        self.config.cfl_safety * min_weight * h * h
    }

    fn next_dt(&self) -> f64 {
        let dt = match self.config.scheme {
            Scheme::ExplicitRk4 => self.config.dt_max.min(self.explicit_dt()),
            Scheme::SemiImplicit => self.cp.dt_nominal,
        };
        let remaining = self.config.t_end - self.cp.state.t;
        if dt >= remaining {
            remaining
        } else {
            dt
        }
    }

    /// Advances one step and returns its size.
    pub fn step(&mut self) -> Result<f64> {
        if self.is_finished() {
            return Err(Error::Precondition("run already reached t_end".into()));
        }
        if self.explicit_dt() < DT_FLOOR {
            return Err(self.blow_up("min e^{2u} h^2 below the step floor"));
        }
        let dt = self.next_dt();
        let old = self.cp.state.clone();
        let next = match self.config.scheme {
            Scheme::ExplicitRk4 => self.rk4_step(dt)?,
            Scheme::SemiImplicit => self.implicit_step(dt)?,
        };
        if !next.u.is_finite() || !next.rho.is_finite() {
            return Err(self.blow_up("non-finite state"));
        }
        if !(next.rho > 0.0 && next.rho < PI) {
            return Err(Error::Monitor {
                t: next.t,
                what: format!("rho = {} left (0, pi)", next.rho),
            });
        }
        let g = &self.cp.guard;
        let ceiling = g.u_sup0
            + next.t * (g.alpha_max * self.data.f.max_abs() + g.beta_max * self.data.j.max_abs())
            + BLOW_UP_MARGIN;
        if next.u.max() > ceiling {
            return Err(self.blow_up(&format!("max u = {} above {ceiling}", next.u.max())));
        }
        let rates = rhs(self.grid, &next, self.data)?;
        let d0 = dissipation_rate(self.grid, &old.u, &self.current)?;
        let d1 = dissipation_rate(self.grid, &next.u, &rates)?;
        self.cp.dissipation += 0.5 * dt * (d0 + d1);
        self.cp.guard.alpha_max = self.cp.guard.alpha_max.max(rates.alpha);
        self.cp.guard.beta_max = self.cp.guard.beta_max.max(rates.beta);
        self.cp.history = Some(History {
            u_prev: old.u,
            rho_prev: old.rho,
            dt_prev: dt,
        });
        self.cp.state = next;
        self.current = rates;
        self.cp.step += 1;
        if self.config.scheme == Scheme::SemiImplicit {
            self.cp.steps_since_growth += 1;
            if self.cp.steps_since_growth >= self.config.dt_growth_interval && self.cp.dt_nominal < self.config.dt_max {
                self.cp.dt_nominal = (2.0 * self.cp.dt_nominal).min(self.config.dt_max);
                self.cp.steps_since_growth = 0;
            }
        }
        Ok(dt)
    }

    fn blow_up(&self, reason: &str) -> Error {
        Error::BlowUp {
            t: self.cp.state.t,
            reason: reason.to_string(),
            last_valid: Box::new(self.cp.state.clone()),
        }
    }

    fn rk4_step(&self, dt: f64) -> Result<FlowState> {
        let s0 = &self.cp.state;
        let shifted = |k: &FlowRates, h: f64| FlowState {
            u: s0.u.zip_map(&k.du, |u, d| u + h * d),
            rho: s0.rho + h * k.drho,
            t: s0.t + h,
        };
        let k1 = &self.current;
        let k2 = rhs(self.grid, &shifted(k1, 0.5 * dt), self.data)?;
        let k3 = rhs(self.grid, &shifted(&k2, 0.5 * dt), self.data)?;
        let k4 = rhs(self.grid, &shifted(&k3, dt), self.data)?;
        let mut u = s0.u.clone();
        for (p, v) in u.values.iter_mut().enumerate() {
            *v += dt / 6.0 * (k1.du.values[p] + 2.0 * k2.du.values[p] + 2.0 * k3.du.values[p] + k4.du.values[p]);
        }
        let rho = s0.rho + dt / 6.0 * (k1.drho + 2.0 * k2.drho + 2.0 * k3.drho + k4.drho);
        Ok(FlowState { u, rho, t: s0.t + dt })
    }

    fn implicit_step(&mut self, dt: f64) -> Result<FlowState> {
        let grid = self.grid;
        let nt = grid.n_theta();
        let s = &self.cp.state;
        // Variable-step BDF2 weights: a0 y^{n+1} + a1 y^n + a2 y^{n-1} = dt y'.
        let (a0, a1, a2, star) = match &self.cp.history {
            None => (1.0, -1.0, 0.0, s.clone()),
            Some(h) => {
                let w = dt / h.dt_prev;
                let star = FlowState {
                    u: s.u.zip_map(&h.u_prev, |u, p| (1.0 + w) * u - w * p),
                    rho: (1.0 + w) * s.rho - w * h.rho_prev,
                    t: s.t,
                };
                (
                    (1.0 + 2.0 * w) / (1.0 + w),
                    -(1.0 + w),
                    w * w / (1.0 + w),
                    star,
                )
            }
        };
        let prev_u = self.cp.history.as_ref().map(|h| &h.u_prev);
        let prev_rho = self.cp.history.as_ref().map_or(0.0, |h| h.rho_prev);
        let (alpha, beta) = model::multipliers(grid, &star, self.data)?;
        let lap = grid.laplacian(&star.u)?;
        let dn = grid.normal_derivative(&star.u)?;

        let refreeze = match &self.cp.frozen {
            None => true,
            Some(f) => f.max_abs_diff(&s.u) > self.config.refreeze_tol,
        };
        if refreeze {
            self.cp.frozen = Some(s.u.clone());
        }
        let frozen = self.cp.frozen.as_ref().expect("frozen coefficient set above");
        let coef = a0 / dt;
        let imp = self.implicit.as_mut().expect("implicit operators for the semi-implicit scheme");
        if refreeze || imp.key != Some(coef.to_bits()) {
            let n = grid.len();
            let lap_m = &imp.lap;
            let rows = &imp.normal_rows;
            let m = Mat::from_fn(n, n, |p, q| {
                let diag = if p == q { coef } else { 0.0 };
                if p < nt {
                    diag
                } else {
                    diag - (-2.0 * frozen.values[p]).exp() * lap_m.read(p, q)
                }
            });
            let mut m = m;
            for (k, row) in rows.iter().enumerate() {
                let w = (-frozen.values[k]).exp();
                for &(q, c) in row {
                    m.write(k, q, m.read(k, q) + w * c);
                }
            }
            imp.lu = Some(m.partial_piv_lu());
            imp.key = Some(coef.to_bits());
        }

        let n = grid.len();
        let mut b = Mat::<f64>::zeros(n, 1);
        for p in 0..n {
            let past = a1 * s.u.values[p] + prev_u.map_or(0.0, |u| a2 * u.values[p]);
            let us = star.u.values[p];
            let ub = frozen.values[p];
            let explicit = if p < nt {
                beta * self.data.j.values[p] - ((-us).exp() - (-ub).exp()) * dn.values[p] - (-us).exp()
            } else {
                alpha * self.data.f.values[p] + ((-2.0 * us).exp() - (-2.0 * ub).exp()) * lap.values[p]
            };
            b.write(p, 0, explicit - past / dt);
        }
        let x = imp.lu.as_ref().expect("factorization built above").solve(&b);
        let u = DiscField::from_values(grid.n_r(), nt, (0..n).map(|p| x.read(p, 0)).collect())?;
        let rho = (dt * (beta * beta / alpha).ln() - a1 * s.rho - a2 * prev_rho) / a0;
        Ok(FlowState { u, rho, t: s.t + dt })
    }
}

/// One step from `state` with a fresh integrator: RK4 under the step
/// restriction, or one backward-Euler-type semi-implicit solve with `dt_init`.
pub fn step(grid: &DiscGrid, state: &FlowState, data: &ProblemData, config: &FlowConfig) -> Result<FlowState> {
    let cfg = FlowConfig {
        t_end: f64::MAX,
        ..config.clone()
    };
    let mut flow = Flow::new(grid, data, state.clone(), cfg)?;
    flow.step()?;
    Ok(flow.cp.state)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EndTime,
    Steady,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorEvent {
    pub t: f64,
    pub what: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    /// Cumulative dissipation `int_0^t D dt` at each record.
    pub dissipation: Vec<f64>,
    pub snapshots: Vec<FlowState>,
    /// First occurrence of each kind of bracket or floor violation.
    pub events: Vec<MonitorEvent>,
    pub stop: Option<StopReason>,
    pub checkpoint: Checkpoint,
}

impl Trajectory {
    pub fn final_state(&self) -> &FlowState {
        &self.checkpoint.state
    }

    pub fn write_csv(&self, out: impl std::io::Write) -> std::io::Result<()> {
        diagnostics::write_csv(out, &self.records)
    }
}

pub const RHO_BRACKET: f64 = 0.02;
pub const MULTIPLIER_BRACKET: (f64, f64) = (1e-3, 1e3);

struct Recorder {
    traj: Trajectory,
}

impl Recorder {
    fn event(&mut self, t: f64, kind: &str, detail: String) {
        if !self.traj.events.iter().any(|e| e.what.starts_with(kind)) {
            self.traj.events.push(MonitorEvent {
                t,
                what: format!("{kind}: {detail}"),
            });
        }
    }

    fn record(&mut self, flow: &Flow) -> Result<f64> {
        let s = flow.state();
        let rec = diagnostics::record(flow.grid, s, flow.data)?;
        if !(s.rho > RHO_BRACKET && s.rho < PI - RHO_BRACKET) {
            self.event(s.t, "rho bracket", format!("rho = {}", s.rho));
        }
        let (lo, hi) = MULTIPLIER_BRACKET;
        if !(rec.alpha > lo && rec.alpha < hi && rec.beta > lo && rec.beta < hi) {
            self.event(s.t, "multiplier bracket", format!("alpha = {}, beta = {}", rec.alpha, rec.beta));
        }
        let kappa = flow.checkpoint().guard.kappa;
        if rec.min_k_minus_alpha_f < kappa {
            self.event(
                s.t,
                "curvature floor",
                format!("min(K - alpha f) = {} below {kappa}", rec.min_k_minus_alpha_f),
            );
        }
        let f = rec.deviation_f;
        self.traj.records.push(rec);
        self.traj.dissipation.push(flow.checkpoint().dissipation);
        Ok(f)
    }
}

fn drive(mut flow: Flow, record_start: bool) -> Result<Trajectory> {
    let mut rec = Recorder {
        traj: Trajectory {
            records: Vec::new(),
            dissipation: Vec::new(),
            snapshots: Vec::new(),
            events: Vec::new(),
            stop: None,
            checkpoint: flow.checkpoint().clone(),
        },
    };
    let outcome = (|| -> Result<()> {
        let cfg = flow.config().clone();
        if record_start {
            let f = rec.record(&flow)?;
            if cfg.snapshot_every.is_some() {
                rec.traj.snapshots.push(flow.state().clone());
            }
            if cfg.stop_at_steady && f < cfg.steady_tol {
                rec.traj.stop = Some(StopReason::Steady);
                return Ok(());
            }
        }
        while !flow.is_finished() {
            flow.step()?;
            let step = flow.checkpoint().step;
            let last = flow.is_finished();
            if let Some(every) = cfg.snapshot_every {
                if step.is_multiple_of(every) || last {
                    rec.traj.snapshots.push(flow.state().clone());
                }
            }
            if step.is_multiple_of(cfg.record_every) || last {
                let f = rec.record(&flow)?;
                if cfg.stop_at_steady && f < cfg.steady_tol {
                    rec.traj.stop = Some(StopReason::Steady);
                    return Ok(());
                }
            }
        }
        rec.traj.stop = Some(StopReason::EndTime);
        Ok(())
    })();
    rec.traj.checkpoint = flow.checkpoint().clone();
    match outcome {
        Ok(()) => Ok(rec.traj),
        Err(e) => Err(Error::RunAborted {
            source: Box::new(e),
            partial: Box::new(rec.traj),
        }),
    }
}

/// Integrates from `initial` until `t_end`, or until a record reaches `F < steady_tol`.
pub fn run(grid: &DiscGrid, initial: &FlowState, data: &ProblemData, config: &FlowConfig) -> Result<Trajectory> {
    let flow = Flow::new(grid, data, initial.clone(), config.clone())?;
    drive(flow, true)
}

/// Continues a run from a checkpoint; the starting state is not recorded again.
pub fn resume(grid: &DiscGrid, checkpoint: &Checkpoint, data: &ProblemData, config: &FlowConfig) -> Result<Trajectory> {
    let flow = Flow::resume(grid, data, checkpoint.clone(), config.clone())?;
    drive(flow, false)
}

/// Rescales a steady state to a solution of the prescribed curvature problem: `u + log beta`.
pub fn extract_solution(grid: &DiscGrid, state: &FlowState, data: &ProblemData, steady_tol: f64) -> Result<DiscField> {
    let f = diagnostics::deviation_f(grid, state, data)?;
    if !(f < steady_tol) {
        return Err(Error::Precondition(format!(
            "state is not steady: F = {f:e} >= {steady_tol:e}"
        )));
    }
    let (_, beta) = model::multipliers(grid, state, data)?;
    Ok(state.u.add_scalar(beta.ln()))
}

/// Cap data concentrated at `a`: the cap profile at the scaling radius of the
/// boundary point `a / |a|` (of the origin when `a = 0`), pulled back by the
/// Möbius map sending `a` to 0, with `rho` chosen so that `alpha = beta^2`.
pub fn concentrated_initial_data(grid: &DiscGrid, a: Complex64, data: &ProblemData) -> Result<FlowState> {
    let phi = MobiusMap::translation(-a)?;
    let (f0, j0) = if a.norm() > 0.0 {
        let target = a / a.norm();
        (
            grid.interpolate(&data.f, target.re, target.im),
            grid.interpolate_boundary(&data.j, target.arg()),
        )
    } else {
        (grid.interpolate(&data.f, 0.0, 0.0), grid.interpolate(&data.j_harm, 0.0, 0.0))
    };
    let radius = scaling_radius(f0, j0).map_err(|e| Error::Config(e.to_string()))?;
    let u = grid.sample(|x, y| {
        let z = Complex64::new(x, y);
        cap::cap_profile_at(radius, f0, phi.eval(z)) + phi.derivative_modulus(z).ln()
    });
    let rho = balanced_rho(grid, &u, data)?;
    Ok(FlowState::new(u, rho))
}

/// The `rho` in `(0, pi)` with `alpha = beta^2`, by bisection on
/// `2 rho W_b^2 - 4 (pi - rho)^2 W_i`, which increases from negative to positive.
pub fn balanced_rho(grid: &DiscGrid, u: &DiscField, data: &ProblemData) -> Result<f64> {
    let wi = model::interior_weight(grid, u, data)?;
    let wb = model::boundary_weight(grid, u, data)?;
    if !(wi > 0.0 && wb > 0.0 && wi.is_finite() && wb.is_finite()) {
        return Err(Error::Config("weights of the initial data are degenerate".into()));
    }
    let g = |rho: f64| 2.0 * rho * wb * wb - 4.0 * (PI - rho) * (PI - rho) * wi;
    let (mut lo, mut hi) = (0.0, PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let rho = 0.5 * (lo + hi);
    if !(rho > 0.0 && rho < PI) || g(lo) > 0.0 || g(hi) < 0.0 {
        return Err(Error::Config("root finding for rho failed".into()));
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> DiscGrid {
        DiscGrid::new(16, 32).unwrap()
    }

    #[test]
    fn rates_of_flat_disc() {
        let g = grid();
        let d = ProblemData::constant(&g, 1.0, 1.0).unwrap();
        let r = rhs(&g, &FlowState::new(g.zeros(), PI / 2.0), &d).unwrap();
        for i in 0..g.n_r() {
            for k in 0..g.n_theta() {
                let expect = if i == 0 { -0.5 } else { 1.0 };
                assert!((r.du.get(i, k) - expect).abs() < 1e-10);
            }
        }
        assert!((r.drho - 0.25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rho_out_of_range_is_state_error() {
        let g = grid();
        let d = ProblemData::constant(&g, 1.0, 1.0).unwrap();
        let e = rhs(&g, &FlowState::new(g.zeros(), PI), &d).unwrap_err();
        assert!(matches!(e, Error::State(_)));
    }

    #[test]
    fn config_validation() {
        assert!(FlowConfig::default().validate().is_ok());
        let bad = FlowConfig {
            cfl_safety: 1.0,
            ..FlowConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = FlowConfig {
            dt_init: 0.0,
            ..FlowConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn balanced_rho_gives_alpha_equal_beta_squared() {
        let g = grid();
        let d = ProblemData::constant(&g, 1.3, 0.7).unwrap();
        let u = g.sample(|x, y| 0.2 * x - 0.1 * y * y);
        let rho = balanced_rho(&g, &u, &d).unwrap();
        let (a, b) = model::multipliers(&g, &FlowState::new(u, rho), &d).unwrap();
        assert!((a - b * b).abs() < 1e-12);
    }

    #[test]
    fn centered_concentrated_data_is_the_cap_budget() {
        let g = grid();
        let d = ProblemData::constant(&g, 1.0, 1.0).unwrap();
        let s = concentrated_initial_data(&g, Complex64::new(0.0, 0.0), &d).unwrap();
        let r = scaling_radius(1.0, 1.0).unwrap();
        assert!((s.rho - 2.0 * PI * r * r / (1.0 + r * r)).abs() < 1e-10);
    }

    #[test]
    fn extract_requires_steady_state() {
        let g = grid();
        let d = ProblemData::constant(&g, 1.0, 1.0).unwrap();
        let e = extract_solution(&g, &FlowState::new(g.zeros(), 1.0), &d, 1e-6).unwrap_err();
        assert!(matches!(e, Error::Precondition(_)));
    }

    #[test]
    fn explicit_step_respects_restriction() {
        let g = grid();
        let d = ProblemData::constant(&g, 1.0, 1.0).unwrap();
        let cfg = FlowConfig {
            scheme: Scheme::ExplicitRk4,
            dt_max: 1.0,
            ..FlowConfig::default()
        };
        let s0 = FlowState::new(g.zeros(), PI / 2.0);
        let s1 = step(&g, &s0, &d, &cfg).unwrap();
        let h = g.h_min();
        assert!((s1.t - 0.5 * h * h).abs() < 1e-15);
    }
}
