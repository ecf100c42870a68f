use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use discflow::checks::Suite;
use discflow::cli;
use discflow::config::RunConfig;
use discflow::flow::Scheme;
use discflow::Error;

#[derive(Parser)]
#[command(name = "discflow", version, about = "Prescribed curvature flow on the unit disc")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized suites; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid size; overrides `grid`.
    #[arg(long, global = true, num_args = 2, value_names = ["NR", "NT"])]
    resolution: Option<Vec<usize>>,
    /// Time integrator; overrides `flow.scheme`.
    #[arg(long, global = true, value_enum)]
    scheme: Option<SchemeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    SemiImplicit,
    ExplicitRk4,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow and write diagnostics, snapshots and a checkpoint.
    Run,
    /// Integrate to a steady state and extract the solution.
    Steady,
    /// Steklov eigenvalues of caps.
    Spectrum {
        /// Cap radii.
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long, default_value_t = 6)]
        n_eigs: usize,
    },
    /// Center tracking and reduced-ODE comparison for a run directory.
    Shadow {
        dir: PathBuf,
        /// JSON constants `{c_normal, c_tangential}`; fitted to the run when absent.
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
    /// Identity suites.
    Check {
        /// Suites to run; all when absent.
        #[arg(long, value_delimiter = ',')]
        suite: Vec<Suite>,
    },
    /// Concentrated runs over a square lattice of starting centers.
    Sweep {
        #[arg(long, default_value_t = 8)]
        points: usize,
        #[arg(long, default_value_t = cli::SWEEP_HALF_WIDTH)]
        half_width: f64,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        workers: Option<usize>,
    },
}

impl Common {
    fn config(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = Some(seed);
        }
        if let Some(r) = &self.resolution {
            cfg.grid.n_r = r[0];
            cfg.grid.n_theta = r[1];
        }
        if let Some(s) = self.scheme {
            cfg.flow.scheme = match s {
                SchemeArg::SemiImplicit => Scheme::SemiImplicit,
                SchemeArg::ExplicitRk4 => Scheme::ExplicitRk4,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn complex(z: Option<num_complex::Complex64>) -> String {
    z.map_or("-".into(), |z| format!("({:.6}, {:.6})", z.re, z.im))
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    let cfg = cli.common.config()?;
    let out: &Path = &cfg.output.dir;
    match cli.command {
        Command::Run => {
            let s = cli::cmd_run(&cfg, out)?;
            println!(
                "t = {}  steps = {}  F = {:.3e}  {}  center {}",
                s.t_final,
                s.steps,
                s.deviation_f.unwrap_or(f64::NAN),
                s.classification,
                complex(s.center)
            );
            for e in &s.events {
                println!("monitor at t = {}: {}", e.t, e.what);
            }
            if let Some(reason) = &s.aborted {
                eprintln!("run aborted: {reason}");
                return Ok(false);
            }
            Ok(true)
        }
        Command::Steady => {
            let r = cli::cmd_steady(&cfg, out)?;
            println!(
                "steady at t = {}, extracted at t = {}  F = {:.3e}  problem residual = {:.3e}",
                r.t_steady, r.t, r.deviation_f, r.problem_residual
            );
            Ok(true)
        }
        Command::Spectrum { radii, n_eigs } => {
            let grid = cfg.build_grid()?;
            let radii = radii.unwrap_or_else(|| cli::DEFAULT_SPECTRUM_RADII.to_vec());
            let target = cli.common.out.as_deref();
            print!("{}", cli::cmd_spectrum(&grid, &radii, n_eigs, target)?);
            Ok(true)
        }
        Command::Shadow { dir, calibration } => {
            let r = cli::cmd_shadow(&dir, calibration.as_deref())?;
            println!(
                "{} samples, {} gaps, c_normal = {:.6}, c_tangential = {:.6}",
                r.samples, r.gaps, r.constants.c_normal, r.constants.c_tangential
            );
            if let Some(t) = r.stopped_at {
                println!("tracking stopped at t = {t}: epsilon below the resolution floor");
            }
            Ok(true)
        }
        Command::Check { suite } => {
            let grid = cfg.build_grid()?;
            let outcomes = cli::cmd_check(&grid, cfg.seed(), &suite)?;
            for o in &outcomes {
                println!("{o}");
            }
            Ok(outcomes.iter().all(|o| o.passed))
        }
        Command::Sweep { points, half_width, workers } => {
            if points == 0 || !(half_width >= 0.0 && half_width * std::f64::consts::SQRT_2 < 1.0) {
                bail!("need at least one point and a lattice inside the open disc");
            }
            let workers = workers
                .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
                .unwrap_or(1);
            let lattice = cli::sweep_lattice(points, half_width);
            let entries = cli::cmd_sweep(&cfg, &lattice, workers, out).context("sweep failed")?;
            for e in &entries {
                println!("a = {}  {}  end center {}", complex(Some(e.a)), e.classification, complex(e.end_center));
            }
            Ok(entries.iter().all(|e| e.aborted.is_none()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.chain().any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Config(_))));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
