use discflow::cap;
use discflow::flow::{self, FlowConfig, Scheme};
use discflow::grid::DiscGrid;
use discflow::model::{FlowState, ProblemData};

fn setup(n_r: usize, n_theta: usize) -> (DiscGrid, ProblemData, FlowState) {
    let g = DiscGrid::new(n_r, n_theta).unwrap();
    let data = ProblemData::new(
        &g,
        g.sample(|x, _| 1.0 + 0.3 * x),
        g.sample_boundary(|t| 1.0 + 0.1 * t.cos()),
    )
    .unwrap();
    let u = cap::cap_profile(&g, 0.6, 1.0).unwrap().zip_map(&g.sample(|x, y| 0.1 * y + 0.05 * x * y), |a, b| a + b);
    let rho = flow::balanced_rho(&g, &u, &data).unwrap();
    (g, data, FlowState::new(u, rho))
}

fn fixed_step(dt: f64, t_end: f64, scheme: Scheme) -> FlowConfig {
    FlowConfig {
        dt_init: dt,
        dt_max: dt,
        t_end,
        scheme,
        stop_at_steady: false,
        record_every: 1_000_000,
        ..FlowConfig::default()
    }
}

fn distance(a: &FlowState, b: &FlowState) -> f64 {
    a.u.max_abs_diff(&b.u).max((a.rho - b.rho).abs())
}

#[test]
fn semi_implicit_error_shrinks_with_the_step() {
    let (g, data, s0) = setup(8, 16);
    let t_end = 0.25;
    let reference = flow::run(&g, &s0, &data, &fixed_step(t_end / 256.0, t_end, Scheme::SemiImplicit)).unwrap();
    let errors: Vec<f64> = [8.0, 16.0, 32.0]
        .iter()
        .map(|n| {
            let t = flow::run(&g, &s0, &data, &fixed_step(t_end / n, t_end, Scheme::SemiImplicit)).unwrap();
            assert_eq!(t.final_state().t, t_end);
            distance(t.final_state(), reference.final_state())
        })
        .collect();
    for w in errors.windows(2) {
        assert!(w[1] < 0.6 * w[0], "{errors:?}");
    }
}

#[test]
fn schemes_agree_on_a_coarse_grid() {
    let (g, data, s0) = setup(8, 16);
    let t_end = 0.05;
    let semi = flow::run(&g, &s0, &data, &fixed_step(1e-4, t_end, Scheme::SemiImplicit)).unwrap();
    let rk4 = flow::run(&g, &s0, &data, &fixed_step(1e-4, t_end, Scheme::ExplicitRk4)).unwrap();
    let moved = distance(&s0, semi.final_state());
    let gap = distance(semi.final_state(), rk4.final_state());
    assert!(gap < 1e-3 * moved, "gap {gap:e}, moved {moved:e}");
}

#[test]
fn mass_is_conserved_and_energy_dissipated() {
    let (g, data, s0) = setup(24, 48);
    let cfg = FlowConfig {
        t_end: 3.0,
        stop_at_steady: false,
        ..FlowConfig::default()
    };
    let t = flow::run(&g, &s0, &data, &cfg).unwrap();
    assert!(t.events.is_empty(), "{:?}", t.events);
    let m0 = t.records[0].mass;
    for w in t.records.windows(2) {
        assert!(((w[1].mass - m0) / m0).abs() < 1e-6);
        assert!(w[1].energy <= w[0].energy + 1e-8);
    }
    let drop = t.records[0].energy - t.records.last().unwrap().energy;
    let dissipated = t.dissipation.last().unwrap() - t.dissipation[0];
    assert!(drop > 0.0);
    assert!((drop - dissipated).abs() < 0.05 * dissipated, "{drop} vs {dissipated}");
}
