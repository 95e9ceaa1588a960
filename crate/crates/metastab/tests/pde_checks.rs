use metastab::flux::FluxModel;
use metastab::grid::Grid;
use metastab::pde::{self, InitialData, RunOptions};

fn burgers() -> FluxModel {
    FluxModel::make_burgers(1.0).unwrap()
}

#[test]
fn steady_profile_is_preserved() {
    let dev = pde::steady_deviation(&burgers(), 0.1, 1.0, 4096, 1000).unwrap();
    assert!(dev < 1e-6, "{dev}");
}

#[test]
fn figure1_run_respects_maximum_principle() {
    let b = burgers();
    let grid = Grid::uniform(1.0, 1024).unwrap();
    let u0 = pde::initial_field(&b, 0.07, &grid, &InitialData::Figure1).unwrap();
    let r = pde::run(&u0, &b, 0.07, 2.0, &[0.0, 1.0, 2.0], RunOptions::default()).unwrap();
    assert_eq!(r.snapshots.len(), 3);
    assert!(r.range.0 >= -1.0 - 1e-12 && r.range.1 <= 1.0 + 1e-12, "{:?}", r.range);
    let st = pde::stage_times(&r.track, &b, 0.07, 0.0, 0.02);
    assert!(st.formation.is_some_and(|t| t < 2.0));
}

#[test]
fn second_order_in_space() {
    let rep = pde::grid_convergence(&burgers(), 0.1, 1.0, &InitialData::Manifold(0.2), 256, 0.2).unwrap();
    assert!(rep.order >= 0.8, "{rep:?}");
}

#[test]
fn layer_moves_toward_equilibrium() {
    let b = burgers();
    let grid = Grid::for_epsilon(1.0, 0.1).unwrap();
    let u0 = pde::initial_field(&b, 0.1, &grid, &InitialData::Manifold(0.3)).unwrap();
    let r = pde::run(
        &u0,
        &b,
        0.1,
        100.0,
        &[],
        RunOptions {
            track_interval: 10.0,
            ..Default::default()
        },
    )
    .unwrap();
    let p = &r.track.positions;
    assert!(r.max_balance_defect < 1e-4, "{}", r.max_balance_defect);
    assert!((p[0] - 0.3).abs() < 1e-3);
    assert!(p.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
}

#[test]
fn relaxation_fit_recovers_rate() {
    let ts: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let ps: Vec<f64> = ts.iter().map(|t| 0.1 + 0.2 * (-0.3 * t).exp()).collect();
    let fit = pde::relaxation_fit(&ts, &ps, 0.1).unwrap();
    assert!((fit.slope + 0.3).abs() < 1e-12);
}
