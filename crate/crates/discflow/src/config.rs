//! Run configuration read from TOML:
//!
//! ```toml
//! seed = 42
//!
//! [grid]
//! n_r = 32
//! n_theta = 64
//!
//! [data]
//! f = "1 + 0.3*x"
//! j = "1"
//!
//! [initial]
//! kind = "cap"           # zero | cap | concentrated | snapshot | checkpoint
//! radius = 0.5773502691896258
//! scale = 1.0
//! perturbation = "0.05*x"
//!
//! [flow]
//! t_end = 20.0
//! dt_max = 0.05
//!
//! [output]
//! dir = "out"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cap;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::flow::{self, Checkpoint, FlowConfig};
use crate::grid::{BoundaryField, DiscField, DiscGrid};
use crate::model::{FlowState, ProblemData};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_r: usize,
    pub n_theta: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n_r: 32, n_theta: 64 }
    }
}

/// A field given by an expression in `x, y, r, theta` or by a JSON file of
/// nodal values on the run's grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Expression(String),
    File { file: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub f: FieldSpec,
    pub j: FieldSpec,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            f: FieldSpec::Expression("1".into()),
            j: FieldSpec::Expression("1".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `u = perturbation`; `rho` balanced unless given.
    Zero {
        #[serde(default)]
        perturbation: Option<String>,
        #[serde(default)]
        rho: Option<f64>,
    },
    /// `u = cap profile + perturbation`; `rho` balanced unless given.
    Cap {
        radius: f64,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        perturbation: Option<String>,
        #[serde(default)]
        rho: Option<f64>,
    },
    /// Cap data concentrated at `a = [re, im]`.
    Concentrated { a: [f64; 2] },
    /// A flow state saved by an earlier run; the integrator starts afresh.
    Snapshot { path: PathBuf },
    /// A checkpoint saved by an earlier run; the integrator resumes with its
    /// step size, history and frozen coefficient.
    Checkpoint { path: PathBuf },
}

/// Where a run starts.
#[derive(Clone, Debug)]
pub enum Start {
    Fresh(FlowState),
    Resume(Box<Checkpoint>),
}

fn one() -> f64 {
    1.0
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Zero {
            perturbation: None,
            rho: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub grid: GridSpec,
    pub data: DataSpec,
    pub initial: InitialSpec,
    pub flow: FlowConfig,
    pub output: OutputSpec,
}

impl RunConfig {
    /// Parses and validates; TOML syntax and type errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// Checks everything that can be checked without allocating the grid.
    pub fn validate(&self) -> Result<()> {
        let GridSpec { n_r, n_theta } = self.grid;
        if n_r < 8 || n_theta < 8 || n_theta % 2 != 0 {
            return Err(Error::Config(format!(
                "grid {n_r}x{n_theta}: need n_r >= 8 and even n_theta >= 8"
            )));
        }
        for (name, spec) in [("f", &self.data.f), ("j", &self.data.j)] {
            if let FieldSpec::Expression(s) = spec {
                Expr::parse(s).map_err(|e| Error::Config(format!("data.{name}: {e}")))?;
            }
        }
        match &self.initial {
            InitialSpec::Zero { perturbation, rho } => {
                check_perturbation(perturbation)?;
                check_rho(*rho)?;
            }
            InitialSpec::Cap {
                radius,
                scale,
                perturbation,
                rho,
            } => {
                if !(*radius > 0.0 && *radius < 1.0) {
                    return Err(Error::Config(format!("initial.radius = {radius} must lie in (0, 1)")));
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(Error::Config(format!("initial.scale = {scale} must be positive")));
                }
                check_perturbation(perturbation)?;
                check_rho(*rho)?;
            }
            InitialSpec::Concentrated { a } => {
                if !(a[0].hypot(a[1]) < 1.0) {
                    return Err(Error::Config(format!("initial.a = {a:?} must lie in the open disc")));
                }
            }
            InitialSpec::Snapshot { .. } | InitialSpec::Checkpoint { .. } => {}
        }
        self.flow.validate().map_err(|e| Error::Config(format!("flow: {e}")))
    }

    pub fn build_grid(&self) -> Result<DiscGrid> {
        DiscGrid::new(self.grid.n_r, self.grid.n_theta)
    }

    pub fn build_data(&self, grid: &DiscGrid) -> Result<ProblemData> {
        let f = match &self.data.f {
            FieldSpec::Expression(s) => {
                let e = Expr::parse(s)?;
                grid.sample(|x, y| e.eval(x, y))
            }
            FieldSpec::File { file } => read_json::<DiscField>(file)?,
        };
        let j = match &self.data.j {
            FieldSpec::Expression(s) => {
                let e = Expr::parse(s)?;
                grid.sample_boundary(|t| e.eval_boundary(t))
            }
            FieldSpec::File { file } => read_json::<BoundaryField>(file)?,
        };
        ProblemData::new(grid, f, j).map_err(|e| Error::Config(format!("data: {e}")))
    }

    pub fn build_start(&self, grid: &DiscGrid, data: &ProblemData) -> Result<Start> {
        if let InitialSpec::Checkpoint { path } = &self.initial {
            let cp: Checkpoint = read_json(path)?;
            grid.check(&cp.state.u)?;
            return Ok(Start::Resume(Box::new(cp)));
        }
        self.build_initial(grid, data).map(Start::Fresh)
    }

    /// The initial state; for a checkpoint, its state.
    pub fn build_initial(&self, grid: &DiscGrid, data: &ProblemData) -> Result<FlowState> {
        match &self.initial {
            InitialSpec::Zero { perturbation, rho } => {
                let u = add_perturbation(grid, grid.zeros(), perturbation)?;
                with_rho(grid, u, data, *rho)
            }
            InitialSpec::Cap {
                radius,
                scale,
                perturbation,
                rho,
            } => {
                let u = add_perturbation(grid, cap::cap_profile(grid, *radius, *scale)?, perturbation)?;
                with_rho(grid, u, data, *rho)
            }
            InitialSpec::Concentrated { a } => {
                flow::concentrated_initial_data(grid, Complex64::new(a[0], a[1]), data)
            }
            InitialSpec::Snapshot { path } => {
                let s: FlowState = read_json(path)?;
                grid.check(&s.u)?;
                Ok(s)
            }
            InitialSpec::Checkpoint { path } => {
                let cp: Checkpoint = read_json(path)?;
                grid.check(&cp.state.u)?;
                Ok(cp.state)
            }
        }
    }
}

fn check_perturbation(p: &Option<String>) -> Result<()> {
    if let Some(s) = p {
        Expr::parse(s).map_err(|e| Error::Config(format!("initial.perturbation: {e}")))?;
    }
    Ok(())
}

fn check_rho(rho: Option<f64>) -> Result<()> {
    match rho {
        Some(r) if !(r > 0.0 && r < std::f64::consts::PI) => {
            Err(Error::Config(format!("initial.rho = {r} must lie in (0, pi)")))
        }
        _ => Ok(()),
    }
}

fn add_perturbation(grid: &DiscGrid, u: DiscField, p: &Option<String>) -> Result<DiscField> {
    match p {
        None => Ok(u),
        Some(s) => {
            let e = Expr::parse(s)?;
            Ok(u.zip_map(&grid.sample(|x, y| e.eval(x, y)), |a, b| a + b))
        }
    }
}

fn with_rho(grid: &DiscGrid, u: DiscField, data: &ProblemData, rho: Option<f64>) -> Result<FlowState> {
    let rho = match rho {
        Some(r) => r,
        None => flow::balanced_rho(grid, &u, data)?,
    };
    Ok(FlowState::new(u, rho))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string(value)?)?;
    Ok(())
}
