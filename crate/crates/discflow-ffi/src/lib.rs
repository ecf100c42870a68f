//! C ABI for the discflow library.
//!
//! Objects are opaque handles created by `*_new` and released by `*_free`.
//! Every fallible call returns a [`DfStatus`]; on failure the message is kept
//! per thread and read with [`df_last_error_message`]. Panics are caught at
//! the boundary and reported as [`DfStatus::Panic`].
//!
//! Fields are passed as flat `double` arrays of length `n_r * n_theta` in the
//! grid's node order (radial index outer, angle inner); boundary data as
//! arrays of length `n_theta`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use discflow::cap;
use discflow::diagnostics;
use discflow::flow::{Flow, FlowConfig, Scheme};
use discflow::grid::{BoundaryField, DiscField, DiscGrid};
use discflow::model::{self, FlowState, ProblemData};
use discflow::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidState = 3,
    NotSolvable = 4,
    NoConvergence = 5,
    BlowUp = 6,
    MonitorViolation = 7,
    Finished = 8,
    Io = 9,
    Panic = 10,
}

/// Time integrator.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DfScheme {
    SemiImplicit = 0,
    ExplicitRk4 = 1,
}

/// Integrator settings; obtain defaults from [`df_flow_config_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DfFlowConfig {
    pub dt_init: f64,
    pub dt_max: f64,
    pub cfl_safety: f64,
    pub t_end: f64,
    pub scheme: DfScheme,
}

/// Scalar diagnostics of a state.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct DfDiagnostics {
    pub t: f64,
    pub energy: f64,
    pub mass: f64,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub deviation_f: f64,
    pub deviation_g: f64,
    pub gauss_bonnet_residual: f64,
}

/// Collocation grid on the closed unit disc.
pub struct DfGrid(DiscGrid);

/// Prescribed interior and boundary curvatures on a grid.
pub struct DfData {
    grid: DiscGrid,
    data: ProblemData,
}

/// Running integrator. Owns copies of its grid and data.
pub struct DfFlow {
    // Borrows `grid` and `data`; dropped before them.
    flow: Option<Flow<'static>>,
    grid: *mut DiscGrid,
    data: *mut ProblemData,
}

impl Drop for DfFlow {
    fn drop(&mut self) {
        self.flow = None;
        // SAFETY: both pointers come from `Box::into_raw` in `df_flow_new`
        // and nothing borrows them once `flow` is gone.
        unsafe {
            drop(Box::from_raw(self.grid));
            drop(Box::from_raw(self.data));
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DfStatus {
    match e {
        Error::Dimension(_) | Error::Domain(_) | Error::Config(_) => DfStatus::InvalidArgument,
        Error::Precondition(_) => DfStatus::Finished,
        Error::State(_) => DfStatus::InvalidState,
        Error::Solvability(_) => DfStatus::NotSolvable,
        Error::Convergence(_) | Error::NormalizationStalled { .. } => DfStatus::NoConvergence,
        Error::BlowUp { .. } => DfStatus::BlowUp,
        Error::Monitor { .. } => DfStatus::MonitorViolation,
        Error::RunAborted { source, .. } => status_of(source),
        Error::Io(_) | Error::Json(_) => DfStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `body`, records any failure and converts it to a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> DfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DfStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            DfStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DfStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &'static str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn field(grid: &DiscGrid, values: &[f64]) -> Result<DiscField, Failure> {
    Ok(DiscField::from_values(grid.n_r(), grid.n_theta(), values.to_vec())?)
}

/// Grids are deterministic in their sizes, so an equal grid is rebuilt.
fn rebuild(grid: &DiscGrid) -> Result<DiscGrid, Failure> {
    Ok(DiscGrid::new(grid.n_r(), grid.n_theta())?)
}

fn copy_out(src: &[f64], dst: &mut [f64]) -> Result<(), Failure> {
    if src.len() != dst.len() {
        return Err(Error::Dimension(format!("buffer holds {} values, need {}", dst.len(), src.len())).into());
    }
    dst.copy_from_slice(src);
    Ok(())
}

fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    // SAFETY: checked non-null; the caller provides a writable slot.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Length in bytes of the last error message on this thread, excluding the
/// terminator; 0 when the last call succeeded.
#[no_mangle]
pub extern "C" fn df_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes().len()))
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len - 1` bytes). Returns the number of bytes written, excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn df_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[][..], |c| c.as_bytes());
        let n = bytes.len().min(len - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
        *buf.add(n) = 0;
        n
    })
}

/// Creates a grid with `n_r` radial and `n_theta` angular nodes.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn df_grid_new(n_r: usize, n_theta: usize, out: *mut *mut DfGrid) -> DfStatus {
    guard(|| store(out, DfGrid(DiscGrid::new(n_r, n_theta)?)))
}

/// Releases a grid; null is ignored.
///
/// # Safety
/// `grid` must come from [`df_grid_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn df_grid_free(grid: *mut DfGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of nodes, `n_r * n_theta`; 0 for a null grid.
///
/// # Safety
/// `grid` must be null or a live grid handle.
#[no_mangle]
pub unsafe extern "C" fn df_grid_len(grid: *const DfGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.len())
}

/// Writes the Cartesian coordinates of every node.
///
/// # Safety
/// `x` and `y` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn df_grid_nodes(grid: *const DfGrid, x: *mut f64, y: *mut f64, len: usize) -> DfStatus {
    guard(|| {
        let g = &borrow(grid, "grid")?.0;
        let (xs, ys) = (slice_mut(x, len, "x")?, slice_mut(y, len, "y")?);
        copy_out(&g.sample(|x, _| x).values, xs)?;
        copy_out(&g.sample(|_, y| y).values, ys)
    })
}

/// Creates data from nodal values of `f` (`n_r * n_theta`) and boundary
/// values of `j` (`n_theta`).
///
/// # Safety
/// `f` and `j` must point to `f_len` and `j_len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn df_data_new(
    grid: *const DfGrid,
    f: *const f64,
    f_len: usize,
    j: *const f64,
    j_len: usize,
    out: *mut *mut DfData,
) -> DfStatus {
    guard(|| {
        let g = &borrow(grid, "grid")?.0;
        let f = field(g, slice(f, f_len, "f")?)?;
        let j = BoundaryField {
            values: slice(j, j_len, "j")?.to_vec(),
        };
        let data = ProblemData::new(g, f, j)?;
        store(out, DfData { grid: rebuild(g)?, data })
    })
}

/// Creates constant data `f`, `j`.
///
/// # Safety
/// `grid` must be a live grid handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn df_data_new_constant(grid: *const DfGrid, f: f64, j: f64, out: *mut *mut DfData) -> DfStatus {
    guard(|| {
        let g = &borrow(grid, "grid")?.0;
        let data = ProblemData::constant(g, f, j)?;
        store(out, DfData { grid: rebuild(g)?, data })
    })
}

/// Releases data; null is ignored.
///
/// # Safety
/// `data` must come from a `df_data_new*` call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn df_data_free(data: *mut DfData) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Writes the cap conformal factor of the given radius and scale.
///
/// # Safety
/// `u` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn df_cap_profile(grid: *const DfGrid, radius: f64, scale: f64, u: *mut f64, len: usize) -> DfStatus {
    guard(|| {
        let g = &borrow(grid, "grid")?.0;
        copy_out(&cap::cap_profile(g, radius, scale)?.values, slice_mut(u, len, "u")?)
    })
}

/// Residual of the stationary problem for the conformal factor `u`.
///
/// # Safety
/// `u` must point to `len` readable doubles and `residual` be writable.
#[no_mangle]
pub unsafe extern "C" fn df_problem_residual(data: *const DfData, u: *const f64, len: usize, residual: *mut f64) -> DfStatus {
    guard(|| {
        let d = borrow(data, "data")?;
        let u = field(&d.grid, slice(u, len, "u")?)?;
        let r = model::problem_residual(&d.grid, &u, &d.data)?;
        *borrow_mut(residual, "residual")? = r;
        Ok(())
    })
}

/// Default integrator settings.
#[no_mangle]
pub extern "C" fn df_flow_config_default() -> DfFlowConfig {
    let c = FlowConfig::default();
    DfFlowConfig {
        dt_init: c.dt_init,
        dt_max: c.dt_max,
        cfl_safety: c.cfl_safety,
        t_end: c.t_end,
        scheme: DfScheme::SemiImplicit,
    }
}

/// Starts a flow from `(u, rho)` at `t = 0`.
///
/// # Safety
/// `u` must point to `len` readable doubles; `config` must be null (defaults)
/// or valid; `out` must be a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn df_flow_new(
    data: *const DfData,
    u: *const f64,
    len: usize,
    rho: f64,
    config: *const DfFlowConfig,
    out: *mut *mut DfFlow,
) -> DfStatus {
    guard(|| {
        let d = borrow(data, "data")?;
        let u = field(&d.grid, slice(u, len, "u")?)?;
        let c = config.as_ref().copied().unwrap_or_else(|| df_flow_config_default());
        let cfg = FlowConfig {
            dt_init: c.dt_init,
            dt_max: c.dt_max,
            cfl_safety: c.cfl_safety,
            t_end: c.t_end,
            scheme: match c.scheme {
                DfScheme::SemiImplicit => Scheme::SemiImplicit,
                DfScheme::ExplicitRk4 => Scheme::ExplicitRk4,
            },
            ..FlowConfig::default()
        };
        let grid = Box::into_raw(Box::new(rebuild(&d.grid)?));
        let problem = Box::into_raw(Box::new(d.data.clone()));
        // `handle` owns both boxes from here on, so they are freed on error too.
        let mut handle = DfFlow {
            flow: None,
            grid,
            data: problem,
        };
        // SAFETY: the boxes live until `handle` drops, after `flow`.
        let (g, p): (&'static DiscGrid, &'static ProblemData) = (&*grid, &*problem);
        handle.flow = Some(Flow::new(g, p, FlowState::new(u, rho), cfg)?);
        store(out, handle)
    })
}

/// Releases a flow; null is ignored.
///
/// # Safety
/// `flow` must come from [`df_flow_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn df_flow_free(flow: *mut DfFlow) {
    if !flow.is_null() {
        drop(Box::from_raw(flow));
    }
}

fn flow_ref<'a>(flow: *mut DfFlow) -> Result<&'a mut Flow<'static>, Failure> {
    // SAFETY: callers pass a live handle or null.
    let h = unsafe { borrow_mut(flow, "flow")? };
    Ok(h.flow.as_mut().expect("flow handle is initialized"))
}

/// Advances one step; the step size goes to `dt` when it is non-null.
/// Returns [`DfStatus::Finished`] once `t_end` has been reached.
///
/// # Safety
/// `flow` must be a live flow handle; `dt` null or writable.
#[no_mangle]
pub unsafe extern "C" fn df_flow_step(flow: *mut DfFlow, dt: *mut f64) -> DfStatus {
    guard(|| {
        let taken = flow_ref(flow)?.step()?;
        if let Some(dt) = dt.as_mut() {
            *dt = taken;
        }
        Ok(())
    })
}

/// Steps until `t_end`.
///
/// # Safety
/// `flow` must be a live flow handle.
#[no_mangle]
pub unsafe extern "C" fn df_flow_run(flow: *mut DfFlow) -> DfStatus {
    guard(|| {
        let f = flow_ref(flow)?;
        while !f.is_finished() {
            f.step()?;
        }
        Ok(())
    })
}

/// Current time and `rho`.
///
/// # Safety
/// `flow` must be a live flow handle; `t` and `rho` null or writable.
#[no_mangle]
pub unsafe extern "C" fn df_flow_time(flow: *mut DfFlow, t: *mut f64, rho: *mut f64) -> DfStatus {
    guard(|| {
        let s = flow_ref(flow)?.state();
        if let Some(t) = t.as_mut() {
            *t = s.t;
        }
        if let Some(rho) = rho.as_mut() {
            *rho = s.rho;
        }
        Ok(())
    })
}

/// Copies the current conformal factor.
///
/// # Safety
/// `u` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn df_flow_state(flow: *mut DfFlow, u: *mut f64, len: usize) -> DfStatus {
    guard(|| {
        let f = flow_ref(flow)?;
        copy_out(&f.state().u.values, slice_mut(u, len, "u")?)
    })
}

/// Diagnostics of the current state.
///
/// # Safety
/// `flow` must be a live flow handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn df_flow_diagnostics(flow: *mut DfFlow, out: *mut DfDiagnostics) -> DfStatus {
    guard(|| {
        let h = borrow(flow, "flow")?;
        let f = h.flow.as_ref().expect("flow handle is initialized");
        let r = diagnostics::record(&*h.grid, f.state(), &*h.data)?;
        *borrow_mut(out, "out")? = DfDiagnostics {
            t: r.t,
            energy: r.energy,
            mass: r.mass,
            rho: r.rho,
            alpha: r.alpha,
            beta: r.beta,
            deviation_f: r.deviation_f,
            deviation_g: r.deviation_g,
            gauss_bonnet_residual: r.gauss_bonnet_residual,
        };
        Ok(())
    })
}
