//! Full viscous problem `u_t + f(u)_x = eps u_xx` on `[-ell, ell]` with
//! Dirichlet data, and extraction of the shock-layer position.
//!
//! Diffusion is Crank-Nicolson, convection is explicit conservative
//! differencing with a local Lax-Friedrichs flux on minmod-limited
//! interface states.

use crate::error::{invalid, numerical, Result};
use crate::flux::FluxModel;
use crate::grid::Grid;
use crate::manifold;
use crate::numerics::{fit, interp, tridiag};
use crate::reduced::ReducedTrajectory;

/// Fraction of the advective bound `0.4 dx / max|f'|` used by [`run`].
pub const DT_SAFETY: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if grid.len() != values.len() {
            return invalid("field length does not match the grid");
        }
        if grid.len() < 4 {
            return invalid("viscous solver needs at least 3 intervals");
        }
        Ok(Self { grid, values, time })
    }

    pub fn dx(&self) -> f64 {
        self.grid.x[1] - self.grid.x[0]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Named initial data.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `(x^2 - 2x - 1) / 2`, rescaled to `[-ell, ell]` and to the boundary values.
    Figure1,
    /// `U(.; xi)` from the manifold.
    Manifold(f64),
    /// The steady profile `U(.; xi*)`.
    Steady,
    /// Polynomial in `x` with ascending coefficients; must match the boundary data.
    Polynomial(Vec<f64>),
}

fn figure1_value(model: &FluxModel, x: f64, ell: f64) -> f64 {
    let s = x / ell;
    let base = 0.5 * (s * s - 2.0 * s - 1.0);
    // base runs from 1 at s=-1 to -1 at s=1
    let mid = 0.5 * (model.u_minus + model.u_plus);
    let half = 0.5 * (model.u_minus - model.u_plus);
    mid + half * base
}

pub fn initial_field(model: &FluxModel, epsilon: f64, grid: &Grid, data: &InitialData) -> Result<GridField> {
    let ell = grid.ell();
    let values = match data {
        InitialData::Figure1 => grid.x.iter().map(|&x| figure1_value(model, x, ell)).collect(),
        InitialData::Manifold(xi) => {
            manifold::build_profile(model, *xi, epsilon, ell, Some(grid.clone()), false)?.u_values
        }
        InitialData::Steady => {
            manifold::steady_state(model, epsilon, ell, Some(grid.clone()))?
                .profile
                .u_values
        }
        InitialData::Polynomial(c) => {
            let p = |x: f64| c.iter().rev().fold(0.0, |acc, a| acc * x + a);
            let (l, r) = (p(-ell), p(ell));
            if (l - model.u_minus).abs() > 1e-10 || (r - model.u_plus).abs() > 1e-10 {
                return invalid(format!(
                    "polynomial data gives u(-ell)={l}, u(ell)={r}; boundary values are {} and {}",
                    model.u_minus, model.u_plus
                ));
            }
            grid.x.iter().map(|&x| p(x)).collect()
        }
    };
    let mut f = GridField::new(grid.clone(), values, 0.0)?;
    let n = f.values.len();
    f.values[0] = model.u_minus;
    f.values[n - 1] = model.u_plus;
    Ok(f)
}

/// Largest admissible step `0.4 dx / max|f'(u)|` for the given values.
pub fn stable_dt(field: &GridField, model: &FluxModel) -> f64 {
    let speed = field
        .values
        .iter()
        .fold(0.0f64, |m, &u| m.max(model.df(u).abs()))
        .max(1e-12);
    0.4 * field.dx() / speed
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Numerical fluxes at the `n - 1` interfaces.
fn convective_fluxes(u: &[f64], model: &FluxModel) -> Vec<f64> {
    let n = u.len();
    let mut slope = vec![0.0; n];
    for i in 1..n - 1 {
        slope[i] = minmod(u[i] - u[i - 1], u[i + 1] - u[i]);
    }
    (0..n - 1)
        .map(|i| {
            let ul = u[i] + 0.5 * slope[i];
            let ur = u[i + 1] - 0.5 * slope[i + 1];
            let a = model.df(ul).abs().max(model.df(ur).abs());
            0.5 * (model.f(ul) + model.f(ur)) - 0.5 * a * (ur - ul)
        })
        .collect()
}

/// Diagnostics of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Rate of change of the trapezoid mass.
    pub mass_rate: f64,
    /// `eps (u_x(ell) - u_x(-ell)) - (f(u_+) - f(u_-))` from one-sided differences.
    pub boundary_rate: f64,
}

impl StepReport {
    pub fn balance_defect(&self) -> f64 {
        (self.mass_rate - self.boundary_rate).abs()
    }
}

fn boundary_rate(u: &[f64], dx: f64, model: &FluxModel, epsilon: f64) -> f64 {
    let n = u.len();
    let left = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx);
    let right = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * dx);
    epsilon * (right - left) - (model.f_plus - model.f_minus)
}

/// One semi-implicit step; the Dirichlet values stay pinned.
pub fn step_viscous(field: &GridField, dt: f64, model: &FluxModel, epsilon: f64) -> Result<(GridField, StepReport)> {
    let bound = stable_dt(field, model);
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return invalid(format!(
            "time step {dt} violates the advective bound; use dt <= {bound}"
        ));
    }
    let mut next = field.clone();
    let report = advance(&mut next.values, &field.grid.w, field.dx(), dt, model, epsilon);
    next.time += dt;
    Ok((next, report))
}

/// In-place step without the stability check.
fn advance(u: &mut [f64], weights: &[f64], dx: f64, dt: f64, model: &FluxModel, epsilon: f64) -> StepReport {
    let n = u.len();
    let r = epsilon * dt / (dx * dx);
    let flux = convective_fluxes(u, model);
    let m = n - 2;
    let before_rate = boundary_rate(u, dx, model, epsilon);
    let before_mass: f64 = u.iter().zip(weights).map(|(a, w)| a * w).sum();
    let mut rhs: Vec<f64> = (1..n - 1)
        .map(|i| u[i] + 0.5 * r * (u[i - 1] - 2.0 * u[i] + u[i + 1]) - dt / dx * (flux[i] - flux[i - 1]))
        .collect();
    rhs[0] += 0.5 * r * model.u_minus;
    rhs[m - 1] += 0.5 * r * model.u_plus;
    let off = vec![-0.5 * r; m - 1];
    let diag = vec![1.0 + r; m];
    tridiag::solve_dominant(&off, &diag, &off, &mut rhs);
    u[0] = model.u_minus;
    u[1..n - 1].copy_from_slice(&rhs);
    u[n - 1] = model.u_plus;
    let after_mass: f64 = u.iter().zip(weights).map(|(a, w)| a * w).sum();
    StepReport {
        mass_rate: (after_mass - before_mass) / dt,
        boundary_rate: 0.5 * (before_rate + boundary_rate(u, dx, model, epsilon)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackMethod {
    Crossing,
    MaxSlope,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockLocation {
    pub position: f64,
    pub method: TrackMethod,
    /// Largest `|u_x|` over the grid intervals.
    pub max_slope: f64,
}

/// Crossing of `u*` nearest the steepest interval, or the steepest
/// interval midpoint when `method` is [`TrackMethod::MaxSlope`].
pub fn locate_shock_with(field: &GridField, model: &FluxModel, method: TrackMethod) -> Option<ShockLocation> {
    let u = &field.values;
    let x = &field.grid.x;
    let (mut j, mut best) = (0, -1.0);
    for i in 0..u.len() - 1 {
        let s = ((u[i + 1] - u[i]) / (x[i + 1] - x[i])).abs();
        if s > best {
            best = s;
            j = i;
        }
    }
    let centre = 0.5 * (x[j] + x[j + 1]);
    if method == TrackMethod::MaxSlope {
        return Some(ShockLocation {
            position: centre,
            method,
            max_slope: best,
        });
    }
    let us = model.u_star;
    let mut found: Option<f64> = None;
    for i in 0..u.len() - 1 {
        let (a, b) = (u[i] - us, u[i + 1] - us);
        if a * b > 0.0 || a == b {
            continue;
        }
        let p = x[i] + (x[i + 1] - x[i]) * a / (a - b);
        if found.is_none_or(|q| (p - centre).abs() < (q - centre).abs()) {
            found = Some(p);
        }
    }
    found.map(|position| ShockLocation {
        position,
        method,
        max_slope: best,
    })
}

pub fn locate_shock(field: &GridField, model: &FluxModel) -> Option<ShockLocation> {
    locate_shock_with(field, model, TrackMethod::Crossing)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShockTrack {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub slopes: Vec<f64>,
    pub method: TrackMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Interval between shock-track samples.
    pub track_interval: f64,
    /// Fraction of the advective bound used as time step.
    pub dt_safety: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            track_interval: 0.05,
            dt_safety: DT_SAFETY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub snapshots: Vec<GridField>,
    pub track: ShockTrack,
    pub final_field: GridField,
    pub steps: usize,
    pub max_balance_defect: f64,
    /// Range `[min, max]` visited by the interior values.
    pub range: (f64, f64),
}

/// Integrates to `t_final`, storing snapshots at the requested times.
pub fn run(
    u0: &GridField,
    model: &FluxModel,
    epsilon: f64,
    t_final: f64,
    snapshot_times: &[f64],
    opts: RunOptions,
) -> Result<RunResult> {
    let n = u0.values.len();
    if (u0.values[0] - model.u_minus).abs() > 1e-12 || (u0.values[n - 1] - model.u_plus).abs() > 1e-12 {
        return invalid("initial data does not match the boundary values");
    }
    if !(t_final >= u0.time) {
        return invalid("final time precedes the initial time");
    }
    let guard = 10.0 * model.u_minus.abs().max(model.u_plus.abs()).max(u0.max_abs());
    let mut snaps: Vec<f64> = snapshot_times
        .iter()
        .copied()
        .filter(|t| *t >= u0.time && *t <= t_final)
        .collect();
    snaps.sort_by(f64::total_cmp);
    let mut snapshots = Vec::new();
    let mut track = ShockTrack {
        times: Vec::new(),
        positions: Vec::new(),
        slopes: Vec::new(),
        method: TrackMethod::Crossing,
    };
    let mut field = u0.clone();
    let dx = field.dx();
    let mut next_track = u0.time;
    let mut si = 0;
    let mut steps = 0;
    let mut max_defect: f64 = 0.0;
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    loop {
        while si < snaps.len() && snaps[si] <= field.time + 1e-12 {
            snapshots.push(field.clone());
            si += 1;
        }
        if field.time >= next_track - 1e-12 {
            if let Some(loc) = locate_shock(&field, model) {
                track.times.push(field.time);
                track.positions.push(loc.position);
                track.slopes.push(loc.max_slope);
            }
            next_track += opts.track_interval;
        }
        if field.time >= t_final - 1e-12 {
            break;
        }
        let mut dt = opts.dt_safety * stable_dt(&field, model);
        let stop = snaps.get(si).copied().unwrap_or(t_final).min(t_final).min(next_track);
        if field.time + dt > stop {
            dt = (stop - field.time).max(1e-15);
        }
        let rep = advance(&mut field.values, &field.grid.w, dx, dt, model, epsilon);
        field.time += dt;
        steps += 1;
        max_defect = max_defect.max(rep.balance_defect());
        for &v in &field.values[1..n - 1] {
            range.0 = range.0.min(v);
            range.1 = range.1.max(v);
        }
        if field.values.iter().any(|v| !v.is_finite() || v.abs() > guard) {
            return numerical(format!("solution exceeded {guard} at t={}", field.time));
        }
    }
    Ok(RunResult {
        snapshots,
        track,
        final_field: field,
        steps,
        max_balance_defect: max_defect,
        range,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftComparison {
    pub start: f64,
    pub end: f64,
    pub sup_difference: f64,
    /// Time average of `|xi_pde - zeta|` over the window.
    pub mean_difference: f64,
    pub samples: usize,
    /// Samples where the PDE layer and `zeta` move in the same direction.
    pub direction_agreement: f64,
}

/// Compares the shock track with the drift trajectory after layer
/// formation (`max|u_x| >= u_minus / (4 eps)`) and until
/// `|zeta - xi*| <= stop_distance`.
pub fn compare_with_drift(
    track: &ShockTrack,
    trajectory: &ReducedTrajectory,
    model: &FluxModel,
    epsilon: f64,
    stop_distance: f64,
) -> Result<DriftComparison> {
    let threshold = model.u_minus.abs() / (4.0 * epsilon);
    let Some(first) = track.slopes.iter().position(|&s| s >= threshold) else {
        return invalid("no layer formed in the shock track");
    };
    let start = track.times[first];
    let tz = &trajectory.times;
    let end = tz
        .iter()
        .zip(&trajectory.zeta)
        .find(|(_, z)| (*z - trajectory.xi_star).abs() <= stop_distance)
        .map(|(t, _)| *t)
        .unwrap_or(*tz.last().expect("non-empty trajectory"))
        .min(*track.times.last().expect("non-empty track"));
    let idx: Vec<usize> = (first..track.times.len())
        .filter(|&i| track.times[i] <= end + 1e-12)
        .collect();
    if idx.is_empty() || end < start {
        return invalid("shock track and drift trajectory do not overlap");
    }
    let mut sup: f64 = 0.0;
    let mut area = 0.0;
    let mut agree = 0usize;
    let mut pairs = 0usize;
    let diff = |i: usize| (track.positions[i] - trajectory.zeta_at(track.times[i])).abs();
    for (w, &i) in idx.iter().enumerate() {
        sup = sup.max(diff(i));
        if w > 0 {
            let p = idx[w - 1];
            area += 0.5 * (diff(i) + diff(p)) * (track.times[i] - track.times[p]);
            let dp = track.positions[i] - track.positions[p];
            let dz = trajectory.zeta_at(track.times[i]) - trajectory.zeta_at(track.times[p]);
            pairs += 1;
            if dp * dz > 0.0 || (dp == 0.0 && dz == 0.0) {
                agree += 1;
            }
        }
    }
    let span = track.times[*idx.last().unwrap()] - start;
    Ok(DriftComparison {
        start,
        end,
        sup_difference: sup,
        mean_difference: if span > 0.0 { area / span } else { sup },
        samples: idx.len(),
        direction_agreement: if pairs > 0 { agree as f64 / pairs as f64 } else { 1.0 },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub intervals: Vec<usize>,
    /// Max-norm differences between consecutive refinements.
    pub differences: Vec<f64>,
    pub order: f64,
}

/// Runs the same data on `n`, `2n` and `4n` intervals with a common step
/// and estimates the observed order at the coarse nodes.
pub fn grid_convergence(
    model: &FluxModel,
    epsilon: f64,
    ell: f64,
    data: &InitialData,
    n: usize,
    t_final: f64,
) -> Result<ConvergenceReport> {
    let sizes = [n, 2 * n, 4 * n];
    let grids: Vec<Grid> = sizes.iter().map(|&k| Grid::uniform(ell, k)).collect::<Result<_>>()?;
    let fine0 = initial_field(model, epsilon, &grids[2], data)?;
    let dt = DT_SAFETY * stable_dt(&fine0, model) * 0.5;
    let mut finals = Vec::new();
    for g in &grids {
        let mut f = initial_field(model, epsilon, g, data)?;
        let steps = (t_final / dt).ceil() as usize;
        let h = t_final / steps as f64;
        for _ in 0..steps {
            f = step_viscous(&f, h, model, epsilon)?.0;
        }
        finals.push(f.values);
    }
    let diff = |c: &[f64], f: &[f64]| (0..c.len()).fold(0.0f64, |m, j| m.max((c[j] - f[2 * j]).abs()));
    let d1 = diff(&finals[0], &finals[1]);
    let d2 = diff(&finals[1], &finals[2]);
    let order = if d2 > 0.0 { (d1 / d2).log2() } else { f64::INFINITY };
    Ok(ConvergenceReport {
        intervals: sizes.to_vec(),
        differences: vec![d1, d2],
        order,
    })
}

/// Largest deviation from the steady profile over `steps` steps.
pub fn steady_deviation(model: &FluxModel, epsilon: f64, ell: f64, intervals: usize, steps: usize) -> Result<f64> {
    let grid = Grid::uniform(ell, intervals)?;
    let u0 = initial_field(model, epsilon, &grid, &InitialData::Steady)?;
    let dt = DT_SAFETY * stable_dt(&u0, model);
    let mut f = u0.clone();
    let mut dev: f64 = 0.0;
    for _ in 0..steps {
        f = step_viscous(&f, dt, model, epsilon)?.0;
        dev = dev.max(f.sup_distance(&u0.values));
    }
    Ok(dev)
}

/// Three-stage summary of a run from non-equilibrium data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageTimes {
    /// First time the layer slope reaches `u_minus / (4 eps)`.
    pub formation: Option<f64>,
    /// First time the layer is within `tol` of `xi*`.
    pub equilibrium: Option<f64>,
    pub final_position: Option<f64>,
}

pub fn stage_times(track: &ShockTrack, model: &FluxModel, epsilon: f64, xi_star: f64, tol: f64) -> StageTimes {
    let threshold = model.u_minus.abs() / (4.0 * epsilon);
    let formation = track.slopes.iter().position(|&s| s >= threshold);
    let equilibrium =
        formation.and_then(|f| (f..track.times.len()).find(|&i| (track.positions[i] - xi_star).abs() <= tol));
    StageTimes {
        formation: formation.map(|i| track.times[i]),
        equilibrium: equilibrium.map(|i| track.times[i]),
        final_position: track.positions.last().copied(),
    }
}

/// Exponential rate of `|position - xi*|` over the tail of a track.
pub fn relaxation_fit(times: &[f64], positions: &[f64], xi_star: f64) -> Result<fit::LinearFit> {
    if times.len() < 3 || times.len() != positions.len() {
        return invalid("relaxation fit needs at least three samples");
    }
    let ys: Vec<f64> = positions.iter().map(|p| (p - xi_star).abs().max(1e-300).ln()).collect();
    Ok(fit::linear_fit(times, &ys))
}

/// Sharp step `u_minus` left of `xi`, `u_plus` right of it, sampled on nodes.
pub fn step_profile(model: &FluxModel, grid: &Grid, xi: f64) -> Vec<f64> {
    grid.x
        .iter()
        .map(|&x| {
            if x < xi {
                model.u_minus
            } else if x > xi {
                model.u_plus
            } else {
                model.u_star
            }
        })
        .collect()
}

/// Linear interpolation of a field at `x`.
pub fn sample(field: &GridField, x: f64) -> f64 {
    interp::linear(&field.grid.x, &field.values, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_state_is_fixed() {
        let mut b = FluxModel::make_burgers(1.0).unwrap();
        b.u_minus = 0.0;
        b.u_plus = 0.0;
        b.f_minus = 0.0;
        b.f_plus = 0.0;
        let g = Grid::uniform(1.0, 64).unwrap();
        let f = GridField::new(g, vec![0.0; 65], 0.0).unwrap();
        let (next, rep) = step_viscous(&f, 0.01, &b, 0.1).unwrap();
        assert!(next.values.iter().all(|v| *v == 0.0));
        assert_eq!(rep.balance_defect(), 0.0);
    }

    #[test]
    fn rejects_large_step_with_suggestion() {
        let b = FluxModel::make_burgers(1.0).unwrap();
        let g = Grid::uniform(1.0, 64).unwrap();
        let f = initial_field(&b, 0.1, &g, &InitialData::Figure1).unwrap();
        let err = step_viscous(&f, 1.0, &b, 0.1).unwrap_err().to_string();
        assert!(err.contains("dt <="), "{err}");
    }

    #[test]
    fn step_location_within_one_cell() {
        let b = FluxModel::make_burgers(1.0).unwrap();
        let g = Grid::uniform(1.0, 200).unwrap();
        let f = GridField::new(g.clone(), step_profile(&b, &g, 0.2), 0.0).unwrap();
        let loc = locate_shock(&f, &b).unwrap();
        assert!((loc.position - 0.2).abs() <= g.max_spacing());
    }

    #[test]
    fn no_crossing_is_absent() {
        let b = FluxModel::make_burgers(1.0).unwrap();
        let g = Grid::uniform(1.0, 16).unwrap();
        let f = GridField::new(g, vec![0.5; 17], 0.0).unwrap();
        assert!(locate_shock(&f, &b).is_none());
        assert!(locate_shock_with(&f, &b, TrackMethod::MaxSlope).is_some());
    }

    #[test]
    fn figure1_data_matches_boundary() {
        let b = FluxModel::make_burgers(1.0).unwrap();
        let g = Grid::uniform(1.0, 100).unwrap();
        let f = initial_field(&b, 0.07, &g, &InitialData::Figure1).unwrap();
        assert!((f.values[0] - 1.0).abs() < 1e-15 && (f.values[100] + 1.0).abs() < 1e-15);
        assert!((sample(&f, 0.0) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn polynomial_data_checks_boundary() {
        let b = FluxModel::make_burgers(1.0).unwrap();
        let g = Grid::uniform(1.0, 16).unwrap();
        assert!(initial_field(&b, 0.1, &g, &InitialData::Polynomial(vec![0.0, -1.0])).is_ok());
        assert!(initial_field(&b, 0.1, &g, &InitialData::Polynomial(vec![0.0, 1.0])).is_err());
    }
}
