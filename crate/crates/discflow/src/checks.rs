//! Identity suites over seeded random conformal factors: Gauss–Bonnet,
//! Kazdan–Warner, Lebedev–Milin and conformal invariance of energy and mass.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cap;
use crate::conformal::{compose_boundary, compose_field, log_derivative_modulus, pullback_conformal_factor};
use crate::error::{Error, Result};
use crate::grid::DiscGrid;
use crate::model::{self, FlowState, ProblemData};
use crate::random;

/// Smallest grid on which the Kazdan–Warner direct form and the invariance
/// suite are evaluated; the random fields are not resolved to the tolerances
/// below on coarser grids.
pub const REFINED_GRID: (usize, usize) = (48, 96);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    GaussBonnet,
    KazdanWarner,
    LebedevMilin,
    ConformalInvariance,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::GaussBonnet,
        Suite::KazdanWarner,
        Suite::LebedevMilin,
        Suite::ConformalInvariance,
    ];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::GaussBonnet => "gauss-bonnet",
            Suite::KazdanWarner => "kazdan-warner",
            Suite::LebedevMilin => "lebedev-milin",
            Suite::ConformalInvariance => "conformal-invariance",
        })
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

/// One line of a check table: the worst value seen against its tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn below(name: &str, worst: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            worst,
            tolerance,
            passed: worst < tolerance,
        }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict}  {:<44} worst {:.3e}  tolerance {:.1e}", self.name, self.worst, self.tolerance)
    }
}

fn refined(grid: &DiscGrid) -> Result<DiscGrid> {
    DiscGrid::new(grid.n_r().max(REFINED_GRID.0), grid.n_theta().max(REFINED_GRID.1))
}

/// `|int K dA + int k ds - 2 pi|` over 50 random factors.
pub fn gauss_bonnet(grid: &DiscGrid, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = random::rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let u = random::band_limited(grid, &mut rng);
        worst = worst.max(model::gauss_bonnet_residual(grid, &u)?.abs());
    }
    Ok(vec![CheckOutcome::below("Gauss-Bonnet, 50 random factors", worst, 1e-8)])
}

/// Kazdan–Warner residual over 20 random factors on caps of three radii, in
/// the direct form on the refined grid and the integrated-by-parts form on `grid`.
pub fn kazdan_warner(grid: &DiscGrid, seed: u64) -> Result<Vec<CheckOutcome>> {
    let fine = refined(grid)?;
    let radii = [0.4, 1.0 / 3f64.sqrt(), 0.7];
    let mut out = Vec::new();
    for (g, weak) in [(&fine, false), (grid, true)] {
        let mut rng = random::rng(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let u = random::band_limited(g, &mut rng);
            for r in radii {
                let res = if weak {
                    cap::kazdan_warner_residual_weak(g, &u, r)?
                } else {
                    cap::kazdan_warner_residual(g, &u, r)?
                };
                worst = worst.max(res[0].hypot(res[1]));
            }
        }
        let form = if weak { "weak" } else { "direct" };
        let name = format!("Kazdan-Warner {form}, {}x{}", g.n_r(), g.n_theta());
        out.push(CheckOutcome::below(&name, worst, 1e-6));
    }
    Ok(out)
}

/// Lebedev–Milin deficit: non-negative over 100 random factors, zero on
/// `log |Phi'|` for 5 random Möbius maps.
pub fn lebedev_milin(grid: &DiscGrid, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = random::rng(seed);
    let mut most_negative: f64 = 0.0;
    for _ in 0..100 {
        let u = random::band_limited(grid, &mut rng);
        most_negative = most_negative.min(model::lebedev_milin_deficit(grid, &u)?);
    }
    let mut equality: f64 = 0.0;
    for _ in 0..5 {
        let phi = random::mobius(&mut rng, 0.5, true);
        let u = log_derivative_modulus(grid, &phi);
        equality = equality.max(model::lebedev_milin_deficit(grid, &u)?.abs());
    }
    Ok(vec![
        CheckOutcome::below("Lebedev-Milin deficit >= -1e-9 (negative part)", 0.0 - most_negative, 1e-9),
        CheckOutcome::below("Lebedev-Milin equality on Mobius factors", equality, 1e-9),
    ])
}

/// Largest `|a|` of the random Möbius maps in the invariance suite.
pub const INVARIANCE_MAX_ABS: f64 = 0.3;

/// `E_{f,j}(u, rho) = E_{f∘Phi, j∘Phi}(v, rho)` and `m0(u) = m0(v)` for the
/// pullback `v` over 10 random pairs `(u, Phi)`, on the refined grid.
pub fn conformal_invariance(grid: &DiscGrid, seed: u64) -> Result<Vec<CheckOutcome>> {
    let g = refined(grid)?;
    let f = g.sample(|x, y| 1.0 + 0.3 * x + 0.1 * y * y);
    let j = g.sample_boundary(|t| 1.0 + 0.2 * t.cos());
    let data = ProblemData::new(&g, f.clone(), j.clone())?;
    let mut rng = random::rng(seed);
    let (mut energy, mut mass): (f64, f64) = (0.0, 0.0);
    for k in 0..10 {
        let u = random::band_limited(&g, &mut rng);
        let phi = random::mobius(&mut rng, INVARIANCE_MAX_ABS, true);
        let v = pullback_conformal_factor(&g, &u, &phi)?;
        let moved = ProblemData::new(&g, compose_field(&g, &f, &phi)?, compose_boundary(&g, &j, &phi)?)?;
        let rho = 0.3 + 0.25 * k as f64;
        let e_u = model::energy(&g, &FlowState::new(u.clone(), rho), &data)?;
        let e_v = model::energy(&g, &FlowState::new(v.clone(), rho), &moved)?;
        energy = energy.max((e_u - e_v).abs());
        mass = mass.max((model::mass(&g, &u)? - model::mass(&g, &v)?).abs());
    }
    let tag = format!("{}x{}, |a| <= {INVARIANCE_MAX_ABS}", g.n_r(), g.n_theta());
    Ok(vec![
        CheckOutcome::below(&format!("energy invariance, {tag}"), energy, 1e-8),
        CheckOutcome::below(&format!("mass invariance, {tag}"), mass, 1e-8),
    ])
}

pub fn run_suite(suite: Suite, grid: &DiscGrid, seed: u64) -> Result<Vec<CheckOutcome>> {
    match suite {
        Suite::GaussBonnet => gauss_bonnet(grid, seed),
        Suite::KazdanWarner => kazdan_warner(grid, seed),
        Suite::LebedevMilin => lebedev_milin(grid, seed),
        Suite::ConformalInvariance => conformal_invariance(grid, seed),
    }
}
