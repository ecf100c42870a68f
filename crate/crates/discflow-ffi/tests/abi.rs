use std::ffi::c_char;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use discflow_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { df_last_error_message(buf.as_mut_ptr(), buf.len()) };
    buf[..n].iter().map(|&c| c as u8 as char).collect()
}

fn new_grid(n_r: usize, n_theta: usize) -> *mut DfGrid {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { df_grid_new(n_r, n_theta, &mut g) }, DfStatus::Ok);
    g
}

#[test]
fn cap_solves_the_constant_problem_through_the_abi() {
    let radius = 1.0 / 3f64.sqrt();
    unsafe {
        let g = new_grid(16, 32);
        let n = df_grid_len(g);
        assert_eq!(n, 16 * 32);
        let mut data = ptr::null_mut();
        assert_eq!(df_data_new_constant(g, 1.0, radius, &mut data), DfStatus::Ok);
        let mut u = vec![0.0; n];
        assert_eq!(df_cap_profile(g, radius, 1.0, u.as_mut_ptr(), n), DfStatus::Ok);
        let mut residual = f64::NAN;
        assert_eq!(df_problem_residual(data, u.as_ptr(), n, &mut residual), DfStatus::Ok);
        assert!(residual < 1e-10, "{residual}");
        df_data_free(data);
        df_grid_free(g);
    }
}

#[test]
fn flow_steps_and_reports_diagnostics() {
    unsafe {
        let g = new_grid(12, 24);
        let n = df_grid_len(g);
        let (mut x, mut y) = (vec![0.0; n], vec![0.0; n]);
        assert_eq!(df_grid_nodes(g, x.as_mut_ptr(), y.as_mut_ptr(), n), DfStatus::Ok);
        let f: Vec<f64> = x.iter().map(|x| 1.0 + 0.3 * x).collect();
        let j = [1.0; 24];
        let mut data = ptr::null_mut();
        assert_eq!(df_data_new(g, f.as_ptr(), n, j.as_ptr(), j.len(), &mut data), DfStatus::Ok);
        let mut u = vec![0.0; n];
        assert_eq!(df_cap_profile(g, 0.6, 1.0, u.as_mut_ptr(), n), DfStatus::Ok);
        for (v, y) in u.iter_mut().zip(&y) {
            *v += 0.05 * y;
        }
        let mut cfg = df_flow_config_default();
        cfg.t_end = 0.2;
        let mut flow = ptr::null_mut();
        assert_eq!(df_flow_new(data, u.as_ptr(), n, 1.5, &cfg, &mut flow), DfStatus::Ok);
        // The flow owns its copies, so the inputs can go first.
        df_data_free(data);
        df_grid_free(g);

        let mut start = DfDiagnostics::default();
        assert_eq!(df_flow_diagnostics(flow, &mut start), DfStatus::Ok);
        let mut dt = 0.0;
        assert_eq!(df_flow_step(flow, &mut dt), DfStatus::Ok);
        assert_eq!(dt, cfg.dt_init);
        assert_eq!(df_flow_run(flow), DfStatus::Ok);
        let (mut t, mut rho) = (0.0, 0.0);
        assert_eq!(df_flow_time(flow, &mut t, &mut rho), DfStatus::Ok);
        assert_eq!(t, 0.2);
        assert!(rho > 0.0 && rho < std::f64::consts::PI);
        let mut end = DfDiagnostics::default();
        assert_eq!(df_flow_diagnostics(flow, &mut end), DfStatus::Ok);
        assert!(end.energy < start.energy);
        assert!(((end.mass - start.mass) / start.mass).abs() < 1e-6);
        assert_eq!(df_flow_step(flow, ptr::null_mut()), DfStatus::Finished);
        let mut state = vec![0.0; n];
        assert_eq!(df_flow_state(flow, state.as_mut_ptr(), n), DfStatus::Ok);
        assert!(state.iter().all(|v| v.is_finite()));
        df_flow_free(flow);
    }
}

#[test]
fn errors_map_to_codes_and_messages() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(df_grid_new(1, 32, &mut g), DfStatus::InvalidArgument);
        assert!(g.is_null());
        assert!(df_last_error_length() > 0);
        assert!(!last_error().is_empty());

        assert_eq!(df_grid_new(8, 16, ptr::null_mut()), DfStatus::NullPointer);
        assert!(last_error().contains("null"));

        let g = new_grid(8, 16);
        assert_eq!(df_last_error_length(), 0);
        let mut short = vec![0.0; 3];
        assert_eq!(df_cap_profile(g, 0.5, 1.0, short.as_mut_ptr(), 3), DfStatus::InvalidArgument);
        let mut data = ptr::null_mut();
        assert_eq!(df_data_new_constant(g, 1.0, 1.0, &mut data), DfStatus::Ok);
        let u = vec![0.0; df_grid_len(g)];
        let mut flow = ptr::null_mut();
        assert_eq!(df_flow_new(data, u.as_ptr(), u.len(), 4.0, ptr::null(), &mut flow), DfStatus::InvalidState);
        assert!(flow.is_null());
        df_data_free(data);
        df_grid_free(g);
        df_grid_free(ptr::null_mut());
        df_flow_free(ptr::null_mut());
    }
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_is_generated_and_compiles_as_c() {
    let header = crate_dir().join("include").join("discflow.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["df_grid_new", "df_flow_step", "df_last_error_message", "DF_STATUS_PANIC", "typedef struct DfFlow DfFlow"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let probe = Path::new(env!("CARGO_TARGET_TMPDIR")).join("header_probe.c");
    std::fs::write(
        &probe,
        "#include \"discflow.h\"\nint main(void) { DfFlowConfig c = df_flow_config_default(); return c.t_end > 0 ? 0 : 1; }\n",
    )
    .unwrap();
    let Ok(status) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&probe)
        .status()
    else {
        eprintln!("no C compiler on PATH; syntax check skipped");
        return;
    };
    assert!(status.success());
}

/// Builds the static library into a private target directory, since
/// `cargo test` only refreshes the rlib.
fn static_library() -> Option<PathBuf> {
    let target = Path::new(env!("CARGO_TARGET_TMPDIR")).join("ffi-build");
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let status = Command::new(cargo)
        .args(["build", "--offline", "--release", "-p", "discflow-ffi", "--lib", "--target-dir"])
        .arg(&target)
        .current_dir(crate_dir())
        .status()
        .ok()?;
    assert!(status.success(), "static library build failed");
    Some(target.join("release").join("libdiscflow_ffi.a"))
}

#[test]
fn c_program_links_against_the_static_library() {
    let Some(lib) = static_library() else {
        eprintln!("cargo not runnable; link check skipped");
        return;
    };
    let exe = Path::new(env!("CARGO_TARGET_TMPDIR")).join("roundtrip");
    let Ok(status) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(crate_dir().join("include"))
        .arg(crate_dir().join("tests").join("c").join("roundtrip.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
    else {
        eprintln!("no C compiler on PATH; link check skipped");
        return;
    };
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("residual"));
}
