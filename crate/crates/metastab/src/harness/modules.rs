//! Work items: one pure computation per scenario key.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{FluxSpec, Module, ScenarioConfig};
use super::Table;
use crate::error::{invalid, Result};
use crate::flux::FluxModel;
use crate::grid::Grid;
use crate::hyperbolic::{self, Preset};
use crate::manifold;
use crate::pde::{self, InitialData, RunOptions};
use crate::reduced::{self, DriftCache, InitialPerturbation, QuasiLinearOptions};
use crate::spectral::{self, CoefficientField, StepOperatorSpec};

pub(crate) type Metrics = BTreeMap<String, f64>;

#[derive(Debug, Default)]
pub(crate) struct ItemOutput {
    pub records: Vec<(String, Metrics)>,
    pub tables: Vec<(String, Table)>,
}

impl ItemOutput {
    fn single(key: String, m: Metrics) -> Self {
        Self {
            records: vec![(key, m)],
            tables: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct WorkItem {
    pub key: String,
    pub flux: FluxSpec,
    pub epsilon: f64,
    pub xi: f64,
    pub preset: Option<String>,
    /// Per-epsilon part of the invariant suite.
    pub pde_part: bool,
}

fn key(flux: &FluxSpec, eps: f64, xi: f64) -> String {
    format!("{}/eps={eps}/xi={xi}", flux.label)
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn put(m: &mut Metrics, k: &str, v: f64) {
    m.insert(k.to_string(), v);
}

/// Expands a scenario into its independent work items.
pub(crate) fn plan(cfg: &ScenarioConfig) -> Vec<WorkItem> {
    let mut items = Vec::new();
    let item = |flux: &FluxSpec, key: String, epsilon: f64, xi: f64, preset: Option<String>, pde_part: bool| WorkItem {
        key,
        flux: flux.clone(),
        epsilon,
        xi,
        preset,
        pde_part,
    };
    for f in &cfg.fluxes {
        match cfg.module {
            Module::None => {}
            Module::Hyperbolic => {
                let names: Vec<String> = if cfg.presets.is_empty() || cfg.presets.iter().any(|p| p == "all") {
                    Preset::DECREASING.iter().map(|p| p.name().to_string()).collect()
                } else {
                    cfg.presets.clone()
                };
                for p in names {
                    items.push(item(f, format!("{}/preset={p}", f.label), 0.0, 0.0, Some(p), false));
                }
            }
            Module::Simulate | Module::Figure1 => {
                let preset = match cfg.module {
                    Module::Figure1 => "figure1".to_string(),
                    _ => cfg.presets.first().cloned().unwrap_or_else(|| "manifold".into()),
                };
                let xi = if preset == "manifold" { cfg.xi0[0] } else { 0.0 };
                for &e in &cfg.epsilons {
                    items.push(item(
                        f,
                        format!("{}/eps={e}/preset={preset}", f.label),
                        e,
                        xi,
                        Some(preset.clone()),
                        false,
                    ));
                }
            }
            Module::Invariants => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let mut xis = cfg.xi0.clone();
                for _ in 0..cfg.numerics.random_points {
                    xis.push(rng.gen_range(-0.5..0.5) * cfg.ell);
                }
                for &e in &cfg.epsilons {
                    for &x in &xis {
                        items.push(item(f, key(f, e, x), e, x, None, false));
                    }
                    items.push(item(f, format!("{}/eps={e}/pde", f.label), e, 0.0, None, true));
                }
            }
            _ => {
                for &e in &cfg.epsilons {
                    for &x in &cfg.xi0 {
                        items.push(item(f, key(f, e, x), e, x, None, false));
                    }
                }
            }
        }
    }
    items
}

pub(crate) fn run_item(cfg: &ScenarioConfig, it: &WorkItem) -> Result<ItemOutput> {
    let model = it.flux.build()?;
    match cfg.module {
        Module::None => Ok(ItemOutput::default()),
        Module::Manifold => manifold_item(cfg, it, &model),
        Module::Spectrum => spectrum_item(cfg, it, &model),
        Module::Reduce => reduce_item(cfg, it, &model),
        Module::Simulate | Module::Figure1 => simulate_item(cfg, it, &model),
        Module::Compare => compare_item(cfg, it, &model),
        Module::Hyperbolic => hyperbolic_item(cfg, it, &model),
        Module::Invariants if it.pde_part => invariants_pde_item(cfg, it, &model),
        Module::Invariants => invariants_item(cfg, it, &model),
    }
}

fn base_metrics(it: &WorkItem) -> Metrics {
    let mut m = Metrics::new();
    put(&mut m, "epsilon", it.epsilon);
    put(&mut m, "xi", it.xi);
    m
}

fn spectral_grid(cfg: &ScenarioConfig, eps: f64) -> Result<Grid> {
    match cfg.numerics.intervals {
        Some(n) => Grid::uniform(cfg.ell, n),
        None => Grid::for_epsilon(cfg.ell, eps),
    }
}

fn manifold_item(cfg: &ScenarioConfig, it: &WorkItem, model: &FluxModel) -> Result<ItemOutput> {
    let (eps, xi, ell) = (it.epsilon, it.xi, cfg.ell);
    let mut m = base_metrics(it);
    let (km, kp) = manifold::kappa_pair(model, xi, eps, ell)?;
    let gap = manifold::kappa_gap(model, &km, &kp);
    let bounds = manifold::omega_bound(model, xi, eps, ell)?;
    put(&mut m, "kappa_minus", km.value);
    put(&mut m, "kappa_plus", kp.value);
    put(&mut m, "excess_minus", km.excess);
    put(&mut m, "excess_plus", kp.excess);
    put(&mut m, "kappa_gap", gap);
    put(&mut m, "omega", gap.abs());
    put(&mut m, "omega_upper", bounds.omega_upper);
    put(&mut m, "xi_star", manifold::equilibrium(model, eps, ell)?);
    let p = manifold::build_profile(model, xi, eps, ell, Some(spectral_grid(cfg, eps)?), false)?;
    let mut table = Table::new(&["x", "u"]);
    for (x, u) in p.grid.x.iter().zip(&p.u_values) {
        table.rows.push(vec![*x, *u]);
    }
    Ok(ItemOutput {
        records: vec![(it.key.clone(), m)],
        tables: vec![(format!("profile/{}", it.key), table)],
    })
}

fn spectrum_item(cfg: &ScenarioConfig, it: &WorkItem, model: &FluxModel) -> Result<ItemOutput> {
    let (eps, xi, ell) = (it.epsilon, it.xi, cfg.ell);
    let mut m = base_metrics(it);
    let grid = spectral_grid(cfg, eps)?;
    let modes = cfg.numerics.modes.unwrap_or(2).max(2);
    let ls = spectral::layer_spectrum(model, xi, eps, ell, modes, Some(grid.clone()))?;
    let l = &ls.decomposition.lambdas;
    put(&mut m, "lambda1", l[0]);
    put(&mut m, "lambda2", l[1]);
    put(&mut m, "eps_lambda2", eps * l[1]);
    put(&mut m, "gap_ratio", l[1] / l[0]);
    put(&mut m, "biorth_defect", ls.decomposition.biorth_defect);
    let spec = StepOperatorSpec::for_layer(model, xi, eps, ell);
    let step = spectral::eigensolve(
        &spectral::assemble_operator(&CoefficientField::step(&spec, &grid)?)?,
        1,
        None,
    )?;
    put(&mut m, "lambda1_step_grid", step.lambdas[0]);
    let oracle = spectral::step_eigenvalues(&spec, 1)?;
    put(
        &mut m,
        "lambda1_step_oracle",
        oracle.values.first().copied().unwrap_or(f64::NAN),
    );
    put(&mut m, "lambda1_asymptotic", spectral::lambda1_asymptotic(&spec));
    let omega = manifold::residual(model, &ls.profile).omega;
    put(&mut m, "omega", omega);
    put(&mut m, "omega_ratio", omega / l[0].abs());
    put(&mut m, "omega_ratio_step", omega / step.lambdas[0].abs());
    put(&mut m, "tanh_prediction", 4.0 * (model.u_minus * xi / eps).tanh().abs());
    Ok(ItemOutput::single(it.key.clone(), m))
}

/// Distance window `[d, 10 d]` closest to the equilibrium that the run reached.
fn tail_window(distances: &[f64], stop_distance: f64) -> (f64, f64) {
    let reached = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let lo = reached.max(stop_distance);
    (lo, 10.0 * lo)
}

fn reduce_item(cfg: &ScenarioConfig, it: &WorkItem, model: &FluxModel) -> Result<ItemOutput> {
    let (eps, xi0, ell) = (it.epsilon, it.xi, cfg.ell);
    let n = &cfg.numerics;
    let mut m = base_metrics(it);
    let stab = reduced::drift_stability_check(model, eps, ell)?;
    put(&mut m, "xi_star", stab.xi_star);
    put(&mut m, "sign_ok", flag(stab.sign_ok));
    put(&mut m, "beta", stab.beta);
    let opts = QuasiLinearOptions {
        modes: n.modes.unwrap_or(16),
        knots: n.knots,
        t_end: n.t_final.unwrap_or(1e9),
        stop_distance: n.stop_distance,
    };
    let w0 = InitialPerturbation::Mode {
        k: n.mode,
        amplitude: n.amplitude,
    };
    let run = reduced::integrate_quasilinear(model, xi0, eps, ell, &w0, opts)?;
    let r = &run.report;
    put(&mut m, "fitted_c", r.fitted_c);
    put(&mut m, "omega_sup", r.omega_sup);
    put(&mut m, "horizon", r.horizon.t);
    put(&mut m, "horizon_degenerate", flag(r.horizon.degenerate));
    put(&mut m, "w1_max", r.w1_max);
    put(&mut m, "tail_energy", r.tail_energy);
    put(&mut m, "gap_constant", r.gap_constant);
    put(&mut m, "domination_excess", r.domination_excess);
    let last = run.states.last().expect("at least the initial state");
    put(&mut m, "t_last", last.t);
    put(&mut m, "final_distance", (last.zeta - run.xi_star).abs());
    let mut worst: f64 = 0.0;
    let mut covered = 0.0;
    for s in run.states.iter().filter(|s| s.t <= r.horizon.t && s.bound_rhs > 0.0) {
        worst = worst.max(s.remainder / (r.fitted_c.max(f64::MIN_POSITIVE) * s.bound_rhs));
        covered = s.t;
    }
    put(&mut m, "bound_ratio_max", worst);
    put(&mut m, "horizon_covered", covered);

    let dist: Vec<f64> = run.states.iter().map(|s| (s.zeta - run.xi_star).abs()).collect();
    let (lo, hi) = tail_window(&dist, n.stop_distance);
    let (ts, zs): (Vec<f64>, Vec<f64>) = run
        .states
        .iter()
        .zip(&dist)
        .filter(|(_, d)| **d >= lo && **d <= hi)
        .map(|(s, _)| (s.t, s.zeta))
        .unzip();
    match pde::relaxation_fit(&ts, &zs, run.xi_star) {
        Ok(fit) => {
            put(&mut m, "relax_rate", fit.slope);
            put(&mut m, "relax_residual", fit.residual);
            put(&mut m, "relax_samples", ts.len() as f64);
        }
        Err(_) => put(&mut m, "relax_samples", ts.len() as f64),
    }

    let mut table = Table::new(&["t", "zeta", "w_norm", "z_norm", "remainder", "bound_rhs", "w1"]);
    let stride = (run.states.len() / 2000).max(1);
    for (i, s) in run.states.iter().enumerate() {
        if i % stride == 0 || i + 1 == run.states.len() {
            table
                .rows
                .push(vec![s.t, s.zeta, s.w_norm, s.z_norm, s.remainder, s.bound_rhs, s.w1]);
        }
    }
    Ok(ItemOutput {
        records: vec![(it.key.clone(), m)],
        tables: vec![(format!("quasilinear/{}", it.key), table)],
    })
}

fn pde_grid(cfg: &ScenarioConfig) -> Result<Grid> {
    Grid::uniform(cfg.ell, cfg.numerics.intervals.unwrap_or(1024))
}

fn initial_data(cfg: &ScenarioConfig, preset: &str, xi: f64) -> Result<InitialData> {
    Ok(match preset {
        "figure1" => InitialData::Figure1,
        "manifold" => InitialData::Manifold(xi),
        "steady" => InitialData::Steady,
        "poly" => InitialData::Polynomial(cfg.poly.clone()),
        other => return invalid(format!("preset '{other}' is not a viscous initial datum")),
    })
}

fn track_table(track: &pde::ShockTrack) -> Table {
    let mut t = Table::new(&["t", "position", "max_slope"]);
    for i in 0..track.times.len() {
        t.rows.push(vec![track.times[i], track.positions[i], track.slopes[i]]);
    }
    t
}

fn simulate_item(cfg: &ScenarioConfig, it: &WorkItem, model: &FluxModel) -> Result<ItemOutput> {
    let eps = it.epsilon;
    let n = &cfg.numerics;
    let preset = it.preset.as_deref().unwrap_or("manifold");
    let Some(t_final) = n.t_final else {
        return invalid("simulation needs numerics.t_final");
    };
    let grid = pde_grid(cfg)?;
    let u0 = pde::initial_field(model, eps, &grid, &initial_data(cfg, preset, it.xi)?)?;
    let mut snaps = n.snapshots.clone();
    if snaps.is_empty() {
        snaps = vec![0.0, 0.5 * t_final, t_final];
    }
    let opts = RunOptions {
        track_interval: n.track_interval,
        ..RunOptions::default()
    };
    let res = pde::run(&u0, model, eps, t_final, &snaps, opts)?;
    let xi_star = manifold::equilibrium(model, eps, cfg.ell)?;
    let mut m = base_metrics(it);
    put(&mut m, "steps", res.steps as f64);
    put(&mut m, "max_balance_defect", res.max_balance_defect);
    put(&mut m, "range_min", res.range.0);
    put(&mut m, "range_max", res.range.1);
    let (hi, lo) = (model.u_minus.max(model.u_plus), model.u_minus.min(model.u_plus));
    put(
        &mut m,
        "range_excess",
        (res.range.1 - hi).max(lo - res.range.0).max(0.0),
    );
    put(&mut m, "xi_star", xi_star);
    let st = pde::stage_times(&res.track, model, eps, xi_star, cfg.tol("stage_distance", 0.02));
    put(&mut m, "formation_time", opt(st.formation));
    put(&mut m, "equilibrium_time", opt(st.equilibrium));
    put(&mut m, "final_position", opt(st.final_position));
    if cfg.module == Module::Figure1 {
        figure1_drift(cfg, it, model, &res.track, st.formation, xi_star, &mut m)?;
    }

    let mut cols = vec!["x".to_string()];
    cols.extend(res.snapshots.iter().map(|s| format!("u(t={})", s.time)));
    let mut snap = Table {
        columns: cols,
        rows: Vec::new(),
    };
    for (i, x) in grid.x.iter().enumerate() {
        let mut row = vec![*x];
        row.extend(res.snapshots.iter().map(|s| s.values[i]));
        snap.rows.push(row);
    }
    Ok(ItemOutput {
        records: vec![(it.key.clone(), m)],
        tables: vec![
            (format!("snapshots/{}", it.key), snap),
            (format!("track/{}", it.key), track_table(&res.track)),
        ],
    })
}

/// Drift stage measured on the PDE track, then continued to equilibrium on the reduced equation.
fn figure1_drift(
    cfg: &ScenarioConfig,
    it: &WorkItem,
    model: &FluxModel,
    track: &pde::ShockTrack,
    formation: Option<f64>,
    xi_star: f64,
    m: &mut Metrics,
) -> Result<()> {
    let (Some(tf), Some(&z_end), Some(&t_end)) = (formation, track.positions.last(), track.times.last()) else {
        return Ok(());
    };
    let i = track.times.iter().position(|&t| t >= tf).unwrap_or(0);
    put(m, "drift_start_position", track.positions[i]);
    put(m, "drift_displacement", z_end - track.positions[i]);
    put(
        m,
        "drift_toward_equilibrium",
        flag((z_end - xi_star).abs() < (track.positions[i] - xi_star).abs()),
    );
    let tol = cfg.tol("stage_distance", 0.02);
    if (z_end - xi_star).abs() <= tol {
        put(m, "equilibrium_time_reduced", opt(None));
        return Ok(());
    }
    let cache = DriftCache::build(model, z_end, it.epsilon, cfg.ell, cfg.numerics.knots.max(8) + 1)?;
    let traj = reduced::integrate_drift_cached(&cache, z_end, t_end, t_end + 1e12, it.epsilon, tol)?;
    let reached = (traj.zeta.last().copied().unwrap_or(z_end) - xi_star).abs() <= tol;
    put(
        m,
        "equilibrium_time_reduced",
        if reached {
            traj.times.last().copied().unwrap_or(f64::NAN)
        } else {
            f64::NAN
        },
    );
    Ok(())
}

fn compare_item(cfg: &ScenarioConfig, it: &WorkItem, model: &FluxModel) -> Result<ItemOutput> {
    let (eps, xi0, ell) = (it.epsilon, it.xi, cfg.ell);
    let n = &cfg.numerics;
    let stop = n.stop_distance;
    if !(stop > 0.0) {
        return invalid("comparison needs a positive numerics.stop_distance");
    }
    let cache = DriftCache::build(model, xi0, eps, ell, n.knots.max(8) + 1)?;
    let traj = reduced::integrate_drift_cached(&cache, xi0, 0.0, n.t_final.unwrap_or(1e7), eps, stop)?;
    let t_stop = *traj.times.last().expect("trajectory has a start");
    let grid = pde_grid(cfg)?;
    let u0 = pde::initial_field(model, eps, &grid, &InitialData::Manifold(xi0))?;
    let opts = RunOptions {
        track_interval: n.track_interval,
        ..RunOptions::default()
    };
    let res = pde::run(&u0, model, eps, t_stop, &[], opts)?;
    let cmp = pde::compare_with_drift(&res.track, &traj, model, eps, stop)?;
    let mut m = base_metrics(it);
    put(&mut m, "xi_star", traj.xi_star);
    put(&mut m, "window_start", cmp.start);
    put(&mut m, "window_end", cmp.end);
    put(&mut m, "sup_difference", cmp.sup_difference);
    put(&mut m, "mean_difference", cmp.mean_difference);
    put(&mut m, "samples", cmp.samples as f64);
    put(&mut m, "direction_agreement", cmp.direction_agreement);
    put(&mut m, "exited", flag(traj.exited));
    put(&mut m, "max_balance_defect", res.max_balance_defect);
    let mut drift = Table::new(&["t", "zeta", "theta"]);
    for i in 0..traj.times.len() {
        drift.rows.push(vec![traj.times[i], traj.zeta[i], traj.theta_values[i]]);
    }
    Ok(ItemOutput {
        records: vec![(it.key.clone(), m)],
        tables: vec![
            (format!("track/{}", it.key), track_table(&res.track)),
            (format!("drift/{}", it.key), drift),
        ],
    })
}

fn hyperbolic_item(cfg: &ScenarioConfig, it: &WorkItem, model: &FluxModel) -> Result<ItemOutput> {
    let preset = Preset::from_name(it.preset.as_deref().unwrap_or("linear"))?;
    let u0 = preset.field(model, cfg.ell, cfg.numerics.cells)?;
    let s = hyperbolic::stabilization_time(&u0, model, cfg.numerics.t_final)?;
    let mut m = Metrics::new();
    put(&mut m, "stabilization_time", opt(s.time));
    put(&mut m, "bound", s.bound);
    put(&mut m, "a", s.a);
    put(&mut m, "within_bound", flag(s.within_bound()));
    put(&mut m, "xi", opt(s.xi));
    put(&mut m, "steps", s.steps as f64);
    put(&mut m, "tv_increase", s.tv_increase);
    put(&mut m, "range_excess", s.range_excess);
    let mut fronts = Table::new(&["t", "zeta_minus", "zeta_plus"]);
    let stride = (s.fronts.len() / 1000).max(1);
    for (i, f) in s.fronts.iter().enumerate() {
        if i % stride == 0 || i + 1 == s.fronts.len() {
            fronts.rows.push(vec![f.time, f.zeta_minus, f.zeta_plus]);
        }
    }
    Ok(ItemOutput {
        records: vec![(it.key.clone(), m)],
        tables: vec![(format!("fronts/{}", it.key), fronts)],
    })
}

fn invariants_item(cfg: &ScenarioConfig, it: &WorkItem, model: &FluxModel) -> Result<ItemOutput> {
    let (eps, xi, ell) = (it.epsilon, it.xi, cfg.ell);
    let mut m = base_metrics(it);
    let report = model.validate();
    put(&mut m, "flux_checks_pass", flag(report.all_pass()));
    put(
        &mut m,
        "flux_min_slack",
        report.checks.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min),
    );

    let grid = spectral_grid(cfg, eps)?;
    let modes = cfg.numerics.modes.unwrap_or(20).max(2);
    let ls = spectral::layer_spectrum(model, xi, eps, ell, modes, Some(grid.clone()))?;
    let p = &ls.profile;
    let u = &p.u_values;
    let last = u.len() - 1;
    put(
        &mut m,
        "boundary_error",
        (u[0] - model.u_minus).abs().max((u[last] - model.u_plus).abs()),
    );
    let sign = (model.u_plus - model.u_minus).signum();
    put(
        &mut m,
        "monotonicity_violation",
        u.windows(2).map(|w| -sign * (w[1] - w[0])).fold(0.0, f64::max),
    );
    put(
        &mut m,
        "matching_error",
        (pde::sample(&pde::GridField::new(grid.clone(), u.clone(), 0.0)?, xi) - model.u_star).abs(),
    );
    let dec = &ls.decomposition;
    put(&mut m, "biorth_defect", dec.biorth_defect);
    put(
        &mut m,
        "normalization_error",
        (dec.grid.dot(&dec.psis[0], &p.dxi_values) - 1.0).abs(),
    );
    put(&mut m, "lambda1", dec.lambdas[0]);
    put(&mut m, "h2_constant", spectral::h2_constant(&dec.lambdas));
    let op = spectral::assemble_operator(&ls.field)?;
    let fb = spectral::first_eigenvalue_bound(&op, dec.lambdas[0]);
    put(&mut m, "rayleigh_slack", fb.rayleigh - fb.mu1);
    put(
        &mut m,
        "hypotheses_hold",
        flag(spectral::hypothesis_check(model, &ls.field, dec.lambdas[0]).holds()),
    );
    let d = spectral::xi_derivatives(model, xi, eps, ell, modes.min(8), &grid)?;
    put(&mut m, "derivative_identity_defect", d.identity_defect());
    put(&mut m, "h3_max", d.h3_sums().into_iter().fold(0.0, f64::max));
    Ok(ItemOutput::single(it.key.clone(), m))
}

fn invariants_pde_item(cfg: &ScenarioConfig, it: &WorkItem, model: &FluxModel) -> Result<ItemOutput> {
    let (eps, ell) = (it.epsilon, cfg.ell);
    let n = &cfg.numerics;
    let mut m = Metrics::new();
    put(&mut m, "epsilon", eps);
    put(
        &mut m,
        "steady_deviation",
        pde::steady_deviation(model, eps, ell, n.steady_intervals, n.steady_steps)?,
    );
    let grid = pde_grid(cfg)?;
    let u0 = pde::initial_field(model, eps, &grid, &InitialData::Figure1)?;
    let res = pde::run(&u0, model, eps, n.t_final.unwrap_or(1.0), &[], RunOptions::default())?;
    let (hi, lo) = (model.u_minus.max(model.u_plus), model.u_minus.min(model.u_plus));
    put(
        &mut m,
        "max_principle_excess",
        (res.range.1 - hi).max(lo - res.range.0).max(0.0),
    );
    put(&mut m, "max_balance_defect", res.max_balance_defect);

    let mut tv_increase: f64 = 0.0;
    for p in Preset::DECREASING {
        let s = hyperbolic::stabilization_time(&p.field(model, ell, n.cells)?, model, None)?;
        tv_increase = tv_increase.max(s.tv_increase);
    }
    put(&mut m, "godunov_tv_increase", tv_increase);
    let step = Preset::Step.field(model, ell, n.cells)?;
    let mut f = step.clone();
    for _ in 0..100 {
        let dt = hyperbolic::max_dt(&f, model);
        f = hyperbolic::godunov_step(&f, model, dt)?;
    }
    let drift = f
        .cells
        .iter()
        .zip(&step.cells)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    put(&mut m, "godunov_step_drift", drift);
    Ok(ItemOutput::single(it.key.clone(), m))
}
