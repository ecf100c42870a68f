use std::f64::consts::PI;
use std::sync::OnceLock;

use discflow::cli::sweep_lattice;
use discflow::conformal::{pullback_conformal_factor, CapGeometry, MobiusMap};
use discflow::config::RunConfig;
use discflow::diagnostics::{deviation_f, deviation_g};
use discflow::grid::DiscGrid;
use discflow::model::{self, FlowState, ProblemData};
use discflow::normalize::normalize;
use discflow::{cap, random};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid() -> &'static DiscGrid {
    static GRID: OnceLock<DiscGrid> = OnceLock::new();
    GRID.get_or_init(|| DiscGrid::new(32, 64).unwrap())
}

fn fine_grid() -> &'static DiscGrid {
    static GRID: OnceLock<DiscGrid> = OnceLock::new();
    GRID.get_or_init(|| DiscGrid::new(48, 96).unwrap())
}

fn double_factorial(n: i64) -> f64 {
    if n <= 0 {
        1.0
    } else {
        n as f64 * double_factorial(n - 2)
    }
}

/// `int_B x^a y^b dz` in closed form.
fn monomial_integral(a: u32, b: u32) -> f64 {
    if a % 2 == 1 || b % 2 == 1 {
        return 0.0;
    }
    let (a, b) = (a as i64, b as i64);
    2.0 * PI * double_factorial(a - 1) * double_factorial(b - 1) / double_factorial(a + b) / (a + b + 2) as f64
}

fn disc_point() -> impl Strategy<Value = Complex64> {
    (0.0f64..1.0, 0.0..2.0 * PI).prop_map(|(r, t)| Complex64::from_polar(r.sqrt(), t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quadrature_is_exact_on_monomials(a in 0u32..=6, b in 0u32..=6) {
        prop_assume!(a + b <= 6);
        let g = grid();
        let w = g.sample(|x, y| x.powi(a as i32) * y.powi(b as i32));
        let got = g.integrate_disc(&w).unwrap();
        prop_assert!((got - monomial_integral(a, b)).abs() < 1e-10, "{got}");
    }

    #[test]
    fn mobius_inverse_composes_to_identity(a in disc_point(), theta in 0.0..2.0 * PI, z in disc_point()) {
        let a = a * 0.95;
        let phi = MobiusMap::new(a, theta).unwrap();
        let id = phi.inverse().compose(&phi);
        prop_assert!((id.eval(z) - z).norm() < 1e-12);
        prop_assert!((phi.inverse().eval(phi.eval(z)) - z).norm() < 1e-12);
    }

    #[test]
    fn mobius_maps_circle_to_circle(a in disc_point(), theta in 0.0..2.0 * PI, t in 0.0..2.0 * PI) {
        let phi = MobiusMap::new(a * 0.95, theta).unwrap();
        let w = phi.eval(Complex64::from_polar(1.0, t));
        prop_assert!((w.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cap_geometry_identities(radius in 0.05f64..1.0) {
        let c = CapGeometry::new(radius).unwrap();
        prop_assert!((c.rim * c.rim + c.height * c.height - 1.0).abs() < 1e-14);
        prop_assert!((c.rim_curvature * c.rim - c.height).abs() < 1e-14);
        let d = 1.0 + radius * radius;
        prop_assert!((2.0 * radius * radius / d + c.rim_curvature * 2.0 * radius / d - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_bonnet_holds_for_random_factors(seed in any::<u64>()) {
        let g = grid();
        let u = random::band_limited(g, &mut random::rng(seed));
        prop_assert!(model::gauss_bonnet_residual(g, &u).unwrap().abs() < 1e-8);
    }

    #[test]
    fn lebedev_milin_deficit_is_nonnegative(seed in any::<u64>()) {
        let g = grid();
        let u = random::band_limited(g, &mut random::rng(seed));
        prop_assert!(model::lebedev_milin_deficit(g, &u).unwrap() >= -1e-9);
    }

    #[test]
    fn deviations_are_nonnegative(seed in any::<u64>(), rho in 0.1f64..3.0) {
        let g = grid();
        let mut rng = random::rng(seed);
        let u = random::band_limited(g, &mut rng);
        let data = ProblemData::new(g, g.sample(|x, y| 1.0 + 0.3 * x - 0.2 * y * y), g.sample_boundary(|t| 1.0 + 0.2 * t.sin())).unwrap();
        let s = FlowState::new(u, rho);
        prop_assert!(deviation_f(g, &s, &data).unwrap() >= 0.0);
        prop_assert!(deviation_g(g, &s, &data).unwrap() >= 0.0);
    }

    #[test]
    fn rho_derivative_is_log_multiplier_ratio(seed in any::<u64>(), rho in 0.1f64..3.0) {
        let g = grid();
        let u = random::band_limited(g, &mut random::rng(seed));
        let data = ProblemData::new(g, g.sample(|x, _| 1.0 + 0.3 * x), g.sample_boundary(|_| 1.0)).unwrap();
        let s = FlowState::new(u, rho);
        let (alpha, beta) = model::multipliers(g, &s, &data).unwrap();
        let d = model::denergy_drho(g, &s, &data).unwrap();
        prop_assert!((d - (alpha / (beta * beta)).ln()).abs() < 1e-12);
    }

    #[test]
    fn config_round_trips(n_r in 8usize..64, half in 4usize..64, seed in any::<u64>(), t_end in 0.0f64..50.0) {
        let text = format!("seed = {seed}\n[grid]\nn_r = {n_r}\nn_theta = {}\n[flow]\nt_end = {t_end:?}\n", 2 * half);
        let cfg = RunConfig::from_toml(&text).unwrap();
        prop_assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn sweep_lattice_is_symmetric_and_inside(n in 1usize..10, half_width in 0.0f64..0.7) {
        let pts = sweep_lattice(n, half_width);
        prop_assert_eq!(pts.len(), n * n);
        for p in &pts {
            prop_assert!(p.norm() < 1.0);
            prop_assert!(pts.iter().any(|q| (q + p).norm() < 1e-15));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn mass_is_conformally_invariant(seed in any::<u64>()) {
        let g = fine_grid();
        let mut rng = random::rng(seed);
        let u = random::band_limited(g, &mut rng);
        let phi = random::mobius(&mut rng, 0.3, true);
        let v = pullback_conformal_factor(g, &u, &phi).unwrap();
        let (m_u, m_v) = (model::mass(g, &u).unwrap(), model::mass(g, &v).unwrap());
        prop_assert!((m_u - m_v).abs() < 1e-7 * m_u, "{m_u} vs {m_v}");
    }

    #[test]
    fn normalization_recovers_translated_cap(a in disc_point(), radius in 0.4f64..0.8) {
        let g = fine_grid();
        let a = a * 0.7;
        let centered = cap::cap_profile(g, radius, 1.0).unwrap();
        let moved = pullback_conformal_factor(g, &centered, &MobiusMap::translation(-a).unwrap()).unwrap();
        let n = normalize(g, &moved, radius, &MobiusMap::identity()).unwrap();
        prop_assert!(n.residual_norm() < 1e-9);
        prop_assert!((n.phi.a - a).norm() < 1e-7, "{} vs {}", n.phi.a, a);
        prop_assert!(n.v.max_abs_diff(&centered) < 1e-7);
    }
}
