//! Command implementations behind the `discflow` executable. Each command
//! reads a [`RunConfig`], writes its artifacts below an output directory and
//! returns a report the binary turns into an exit code.
//!
//! A run directory holds `config.toml`, `diagnostics.csv`,
//! `snapshots/NNNNN.json` (one [`FlowState`] each), `checkpoint.json` and
//! `summary.json`.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cap;
use crate::checks::{self, CheckOutcome, Suite};
use crate::config::{read_json, write_json, InitialSpec, RunConfig, Start};
use crate::diagnostics::{ClassifierThresholds, Classification};
use crate::error::{Error, Result};
use crate::flow::{self, MonitorEvent, StopReason, Trajectory};
use crate::grid::{DiscField, DiscGrid};
use crate::model::{self, FlowState};
use crate::normalize;
use crate::shadow::{self, ShadowConstants};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const SOLUTION_FILE: &str = "solution.json";
pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const SHADOW_FILE: &str = "shadow.csv";
pub const CALIBRATION_FILE: &str = "calibration.json";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub stop: Option<StopReason>,
    /// Reason the integration was cut short; the files hold the partial run.
    pub aborted: Option<String>,
    pub t_final: f64,
    pub steps: usize,
    pub records: usize,
    pub deviation_f: Option<f64>,
    pub classification: Classification,
    /// Last tracked center of mass.
    pub center: Option<Complex64>,
    pub target: Option<Complex64>,
    pub events: Vec<MonitorEvent>,
    pub track_gaps: usize,
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_snapshots(dir: &Path, snapshots: &[FlowState]) -> Result<()> {
    let snaps = dir.join(SNAPSHOT_DIR);
    if snaps.exists() {
        fs::remove_dir_all(&snaps)?;
    }
    fs::create_dir_all(&snaps)?;
    for (k, s) in snapshots.iter().enumerate() {
        write_json(&snaps.join(format!("{k:05}.json")), s)?;
    }
    Ok(())
}

/// Snapshots of a run directory in file-name order.
pub fn read_snapshots(dir: &Path) -> Result<Vec<FlowState>> {
    let snaps = dir.join(SNAPSHOT_DIR);
    let mut paths: Vec<PathBuf> = fs::read_dir(&snaps)
        .map_err(|e| Error::Config(format!("{}: {e}", snaps.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_json(p)).collect()
}

/// Integrates the configured run and persists it below `out`. Snapshots are
/// kept every `record_every` steps unless the configuration says otherwise,
/// so that every record carries a tracked center. An aborted integration
/// still writes everything up to the failure and reports it in the summary.
pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let grid = cfg.build_grid()?;
    let data = cfg.build_data(&grid)?;
    let mut flow_cfg = cfg.flow.clone();
    flow_cfg.snapshot_every.get_or_insert(flow_cfg.record_every);
    let start = cfg.build_start(&grid, &data)?;
    fs::create_dir_all(out)?;
    fs::write(out.join(CONFIG_FILE), cfg.to_toml()?)?;
    let result = match &start {
        Start::Fresh(s) => flow::run(&grid, s, &data, &flow_cfg),
        Start::Resume(cp) => flow::resume(&grid, cp, &data, &flow_cfg),
    };
    let (mut trajectory, aborted) = match result {
        Ok(t) => (t, None),
        Err(Error::RunAborted { source, partial }) => (*partial, Some(source.to_string())),
        Err(e) => return Err(e),
    };
    let radius = normalize::default_radius(&data)?;
    let thresholds = ClassifierThresholds {
        steady_tol: flow_cfg.steady_tol,
        epsilon_floor: shadow::resolution_floor(&grid),
        ..ClassifierThresholds::default()
    };
    let analysis = shadow::analyze_run(&grid, &data, &mut trajectory, radius, &thresholds)?;
    trajectory.write_csv(BufWriter::new(fs::File::create(out.join(DIAGNOSTICS_FILE))?))?;
    write_snapshots(out, &trajectory.snapshots)?;
    write_json(&out.join(CHECKPOINT_FILE), &trajectory.checkpoint)?;
    let summary = summarize(&trajectory, aborted, &analysis);
    fs::write(out.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

fn summarize(t: &Trajectory, aborted: Option<String>, analysis: &shadow::RunAnalysis) -> RunSummary {
    RunSummary {
        stop: t.stop,
        aborted,
        t_final: t.checkpoint.state.t,
        steps: t.checkpoint.step,
        records: t.records.len(),
        deviation_f: t.records.last().map(|r| r.deviation_f),
        classification: analysis.classification,
        center: analysis.track.samples.last().map(|s| s.a),
        target: analysis.target,
        events: t.events.clone(),
        track_gaps: analysis.track.gaps.len(),
    }
}

/// `F` at which a steady state is polished before its solution is extracted.
/// The extracted residual scales like `F^{1/2}`, so stopping at the steady
/// tolerance alone leaves a residual near `sqrt(steady_tol)`.
pub const SOLUTION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyReport {
    /// First record with `F` below the steady tolerance.
    pub t_steady: f64,
    /// Time of the extracted state.
    pub t: f64,
    pub deviation_f: f64,
    pub problem_residual: f64,
    /// `u + log beta`, solving the prescribed curvature problem.
    pub solution: DiscField,
}

/// Runs until the steady tolerance is met and writes the run files, then
/// keeps integrating until `F < SOLUTION_TOL` or `t_end` and writes the
/// extracted solution to `solution.json`.
pub fn cmd_steady(cfg: &RunConfig, out: &Path) -> Result<SteadyReport> {
    let mut steady = cfg.clone();
    steady.flow.stop_at_steady = true;
    let summary = cmd_run(&steady, out)?;
    if let Some(reason) = summary.aborted {
        return Err(Error::Convergence(format!("run aborted before reaching a steady state: {reason}")));
    }
    if summary.stop != Some(StopReason::Steady) {
        return Err(Error::Convergence(format!(
            "F = {:e} at t_end = {}: no steady state",
            summary.deviation_f.unwrap_or(f64::NAN),
            summary.t_final
        )));
    }
    let grid = cfg.build_grid()?;
    let data = cfg.build_data(&grid)?;
    let cp: flow::Checkpoint = read_json(&out.join(CHECKPOINT_FILE))?;
    let mut state = cp.state.clone();
    let mut deviation_f = summary.deviation_f.unwrap_or(f64::NAN);
    if deviation_f >= SOLUTION_TOL && state.t < cfg.flow.t_end {
        let polish = flow::FlowConfig {
            steady_tol: SOLUTION_TOL,
            snapshot_every: None,
            ..steady.flow.clone()
        };
        let t = flow::resume(&grid, &cp, &data, &polish)?;
        if let Some(r) = t.records.last() {
            deviation_f = r.deviation_f;
        }
        state = t.checkpoint.state;
    }
    let solution = flow::extract_solution(&grid, &state, &data, cfg.flow.steady_tol)?;
    let report = SteadyReport {
        t_steady: summary.t_final,
        t: state.t,
        deviation_f,
        problem_residual: model::problem_residual(&grid, &solution, &data)?,
        solution,
    };
    write_json(&out.join(SOLUTION_FILE), &report)?;
    Ok(report)
}

pub const DEFAULT_SPECTRUM_RADII: [f64; 4] = [0.3, 0.5, 0.577_350_269_189_625_8, 0.8];

/// Lowest `n_eigs` Steklov eigenvalues at each radius as CSV
/// `R,lambda_0,...`; written to `out/spectrum.csv` when `out` is given.
pub fn cmd_spectrum(grid: &DiscGrid, radii: &[f64], n_eigs: usize, out: Option<&Path>) -> Result<String> {
    let mut csv = String::from("R");
    for k in 0..n_eigs {
        write!(csv, ",lambda_{k}").unwrap();
    }
    csv.push('\n');
    for &r in radii {
        let spec = cap::steklov_spectrum(grid, r, n_eigs)?;
        csv.push_str(&fmt_num(r));
        for v in &spec.eigenvalues {
            csv.push(',');
            csv.push_str(&fmt_num(*v));
        }
        csv.push('\n');
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(SPECTRUM_FILE), &csv)?;
    }
    Ok(csv)
}

pub const SHADOW_HEADER: &str =
    "t,a_re,a_im,epsilon,xi_1,xi_2,predicted_da_dt_re,predicted_da_dt_im,measured_da_dt_re,measured_da_dt_im";

/// Velocity of `a = |a| e^{i phi}` from the rates of `|a|` and `phi`.
fn polar_velocity(a: Complex64, rates: [f64; 2]) -> Complex64 {
    let unit = if a.norm() > 0.0 { a / a.norm() } else { Complex64::new(1.0, 0.0) };
    unit * Complex64::new(rates[0], a.norm() * rates[1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowReport {
    pub constants: ShadowConstants,
    pub samples: usize,
    pub gaps: usize,
    pub stopped_at: Option<f64>,
}

/// Tracks the centers of a run directory's snapshots and compares the
/// measured center velocity with the reduced ODE. The constants come from
/// `calibration` when given and are otherwise fitted to this run; either way
/// they are written to `calibration.json` beside `shadow.csv` in the run directory.
pub fn cmd_shadow(dir: &Path, calibration: Option<&Path>) -> Result<ShadowReport> {
    let cfg = RunConfig::load(&dir.join(CONFIG_FILE))?;
    let grid = cfg.build_grid()?;
    let data = cfg.build_data(&grid)?;
    let snapshots = read_snapshots(dir)?;
    let radius = normalize::default_radius(&data)?;
    let track = shadow::track_centers(&grid, &snapshots, &data, radius)?;
    let constants = match calibration {
        Some(p) => read_json(p)?,
        None => shadow::calibrate(&track, track.samples.first().map_or(0.0, |s| s.t))?,
    };
    let measured = shadow::measured_rates(&track);
    let mut csv = String::from(SHADOW_HEADER);
    csv.push('\n');
    for (s, m) in track.samples.iter().zip(&measured) {
        let e2 = s.epsilon * s.epsilon;
        let [gn, gt] = s.grad_j_rotated();
        let predicted = polar_velocity(s.a, [-e2 * constants.c_normal * gn, -e2 * constants.c_tangential * gt]);
        let measured = polar_velocity(s.a, *m);
        let row = [
            s.t, s.a.re, s.a.im, s.epsilon, s.xi[0], s.xi[1], predicted.re, predicted.im, measured.re, measured.im,
        ];
        csv.push_str(&row.map(fmt_num).join(","));
        csv.push('\n');
    }
    fs::write(dir.join(SHADOW_FILE), csv)?;
    write_json(&dir.join(CALIBRATION_FILE), &constants)?;
    Ok(ShadowReport {
        constants,
        samples: track.samples.len(),
        gaps: track.gaps.len(),
        stopped_at: track.stopped_at,
    })
}

/// Runs the requested identity suites (all when empty).
pub fn cmd_check(grid: &DiscGrid, seed: u64, suites: &[Suite]) -> Result<Vec<CheckOutcome>> {
    let suites = if suites.is_empty() { &Suite::ALL[..] } else { suites };
    let mut out = Vec::new();
    for &s in suites {
        out.extend(checks::run_suite(s, grid, seed)?);
    }
    Ok(out)
}

/// Half-width of the default sweep lattice: its corners lie on `|a| = 0.7`.
pub const SWEEP_HALF_WIDTH: f64 = 0.7 / std::f64::consts::SQRT_2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub a: Complex64,
    pub classification: Classification,
    /// Last tracked center of mass of the run.
    pub end_center: Option<Complex64>,
    pub aborted: Option<String>,
}

/// Square lattice of `n x n` points on `[-half_width, half_width]^2`.
pub fn sweep_lattice(n: usize, half_width: f64) -> Vec<Complex64> {
    let coord = |k: usize| {
        if n == 1 {
            0.0
        } else {
            half_width * (2.0 * k as f64 / (n - 1) as f64 - 1.0)
        }
    };
    (0..n)
        .flat_map(|i| (0..n).map(move |k| Complex64::new(coord(k), coord(i))))
        .collect()
}

/// Concentrated runs started at each lattice point, on `workers` threads.
/// Every run continues to `t_end` so that its classification sees a full
/// tail; its files go to `out/run_NNN`. The map `a -> (classification, end
/// center)` is written to `sweep.csv` in lattice order.
pub fn cmd_sweep(cfg: &RunConfig, lattice: &[Complex64], workers: usize, out: &Path) -> Result<Vec<SweepEntry>> {
    if lattice.iter().any(|a| !(a.norm() < 1.0)) {
        return Err(Error::Config("sweep points must lie in the open disc".into()));
    }
    fs::create_dir_all(out)?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<SweepEntry>>>> = Mutex::new((0..lattice.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, lattice.len().max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= lattice.len() {
                    break;
                }
                let a = lattice[k];
                let mut run = cfg.clone();
                run.initial = InitialSpec::Concentrated { a: [a.re, a.im] };
                run.flow.stop_at_steady = false;
                let dir = out.join(format!("run_{k:03}"));
                run.output.dir = dir.clone();
                let entry = cmd_run(&run, &dir).map(|s| SweepEntry {
                    a,
                    classification: s.classification,
                    end_center: s.center,
                    aborted: s.aborted,
                });
                results.lock().unwrap()[k] = Some(entry);
            });
        }
    });
    let entries = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every lattice point is run"))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("a_re,a_im,classification,z_re,z_im\n");
    for e in &entries {
        let z = e.end_center.map_or([String::new(), String::new()], |z| [fmt_num(z.re), fmt_num(z.im)]);
        writeln!(csv, "{},{},{},{},{}", fmt_num(e.a.re), fmt_num(e.a.im), e.classification, z[0], z[1]).unwrap();
    }
    fs::write(out.join(SWEEP_FILE), csv)?;
    Ok(entries)
}
