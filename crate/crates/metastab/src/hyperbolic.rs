//! Inviscid problem `u_t + f(u)_x = 0` with boundary data in the
//! Bardos-leRoux-Nedelec sense, solved by the Godunov scheme.

use crate::error::{invalid, numerical, Result};
use crate::flux::FluxModel;

/// Front-detection tolerance relative to `|[[u]]|`.
pub const FRONT_TOL: f64 = 1e-3;
/// Samples of `Phi` used for its infimum.
pub const PHI_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicField {
    pub ell: f64,
    pub cells: Vec<f64>,
    pub time: f64,
}

impl HyperbolicField {
    pub fn new(ell: f64, cells: Vec<f64>) -> Result<Self> {
        if !(ell > 0.0) || cells.len() < 2 {
            return invalid("hyperbolic field needs ell > 0 and at least two cells");
        }
        Ok(Self { ell, cells, time: 0.0 })
    }

    /// Cell averages of `u0` by the midpoint rule on `n` cells.
    pub fn sample(ell: f64, n: usize, u0: impl Fn(f64) -> f64) -> Result<Self> {
        let dx = 2.0 * ell / n as f64;
        Self::new(ell, (0..n).map(|i| u0(-ell + (i as f64 + 0.5) * dx)).collect())
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.ell / self.cells.len() as f64
    }

    pub fn centre(&self, i: usize) -> f64 {
        -self.ell + (i as f64 + 0.5) * self.dx()
    }

    /// Total variation including the jumps to the boundary data.
    pub fn total_variation(&self, model: &FluxModel) -> f64 {
        let c = &self.cells;
        let inner: f64 = c.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        inner + (model.u_minus - c[0]).abs() + (c[c.len() - 1] - model.u_plus).abs()
    }
}

/// Reflection across the sonic point: `w != u` with `f(w) = f(u)`.
pub fn conjugate_state(model: &FluxModel, u: f64) -> Result<f64> {
    let (lo, hi) = (model.u_plus.min(model.u_minus), model.u_plus.max(model.u_minus));
    if !(u >= lo - 1e-12 && u <= hi + 1e-12) {
        return invalid(format!("state {u} outside [{lo}, {hi}]"));
    }
    model.conjugate(u)
}

/// Flux with the two boundary states mapped to one common value, so the
/// admissible step is an exact fixed point.
fn flux_value(model: &FluxModel, u: f64) -> f64 {
    if u == model.u_minus || u == model.u_plus {
        0.5 * (model.f_minus + model.f_plus)
    } else {
        model.f(u)
    }
}

/// Godunov flux from the exact Riemann solution for a convex flux.
pub fn godunov_flux(model: &FluxModel, ul: f64, ur: f64) -> f64 {
    if ul <= ur {
        if model.u_star >= ul && model.u_star <= ur {
            model.f(model.u_star)
        } else {
            flux_value(model, ul).min(flux_value(model, ur))
        }
    } else {
        flux_value(model, ul).max(flux_value(model, ur))
    }
}

fn max_speed(field: &HyperbolicField, model: &FluxModel) -> f64 {
    field
        .cells
        .iter()
        .chain([model.u_minus, model.u_plus].iter())
        .fold(0.0f64, |m, &u| m.max(model.df(u).abs()))
}

/// Largest step with Courant number 0.9.
pub fn max_dt(field: &HyperbolicField, model: &FluxModel) -> f64 {
    0.9 * field.dx() / max_speed(field, model).max(1e-12)
}

/// One Godunov step with ghost states `u_minus` and `u_plus`.
pub fn godunov_step(field: &HyperbolicField, model: &FluxModel, dt: f64) -> Result<HyperbolicField> {
    let dx = field.dx();
    let cfl = dt * max_speed(field, model) / dx;
    if !(dt > 0.0) || cfl > 0.9 + 1e-12 {
        return invalid(format!(
            "Courant number {cfl} exceeds 0.9; use dt <= {}",
            max_dt(field, model)
        ));
    }
    let c = &field.cells;
    let n = c.len();
    let mut flux = Vec::with_capacity(n + 1);
    flux.push(godunov_flux(model, model.u_minus, c[0]));
    for i in 0..n - 1 {
        flux.push(godunov_flux(model, c[i], c[i + 1]));
    }
    flux.push(godunov_flux(model, c[n - 1], model.u_plus));
    let r = dt / dx;
    let cells = (0..n).map(|i| c[i] - r * (flux[i + 1] - flux[i])).collect();
    Ok(HyperbolicField {
        ell: field.ell,
        cells,
        time: field.time + dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontState {
    pub zeta_minus: f64,
    pub zeta_plus: f64,
    pub time: f64,
}

/// Edges of the plateaus at `u_minus` (from the left) and `u_plus` (from the right).
pub fn track_fronts(field: &HyperbolicField, model: &FluxModel, tol: f64) -> FrontState {
    let c = &field.cells;
    let dx = field.dx();
    let left = c.iter().take_while(|&&u| (u - model.u_minus).abs() <= tol).count();
    let right = c.iter().rev().take_while(|&&u| (u - model.u_plus).abs() <= tol).count();
    let zeta_minus = -field.ell + left as f64 * dx;
    let zeta_plus = (field.ell - right as f64 * dx).max(zeta_minus);
    FrontState {
        zeta_minus,
        zeta_plus,
        time: field.time,
    }
}

/// Position of the step when the field is one, allowing a single
/// transition cell; the position conserves the cell mass.
pub fn step_position(field: &HyperbolicField, model: &FluxModel, tol: f64) -> Option<f64> {
    let c = &field.cells;
    let dx = field.dx();
    let left = c.iter().take_while(|&&u| (u - model.u_minus).abs() <= tol).count();
    let right = c.iter().rev().take_while(|&&u| (u - model.u_plus).abs() <= tol).count();
    let n = c.len();
    match n - left.min(n) - right.min(n - left.min(n)) {
        0 => Some(-field.ell + left as f64 * dx),
        1 => {
            let v = c[left];
            let s = ((model.u_minus - v) / (model.u_minus - model.u_plus)).clamp(0.0, 1.0);
            Some(-field.ell + (left as f64 + 1.0 - s) * dx)
        }
        _ => None,
    }
}

/// `Phi(u) = (f(u_pm) - f(u)) (u_minus - u_plus) / ((u_minus - u)(u - u_plus))`.
pub fn phi(model: &FluxModel, u: f64) -> f64 {
    let fb = 0.5 * (model.f_minus + model.f_plus);
    (fb - model.f(u)) * (model.u_minus - model.u_plus) / ((model.u_minus - u) * (u - model.u_plus))
}

/// Infimum of `Phi` over the open interval by midpoint sampling.
pub fn phi_infimum(model: &FluxModel) -> f64 {
    let (a, b) = (model.u_plus, model.u_minus);
    (0..PHI_SAMPLES)
        .map(|i| phi(model, a + (b - a) * (i as f64 + 0.5) / PHI_SAMPLES as f64))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stabilization {
    /// First time the field is a step; `None` on timeout.
    pub time: Option<f64>,
    pub xi: Option<f64>,
    pub a: f64,
    /// `2 ell / A + 3 dx / A`.
    pub bound: f64,
    pub t_max: f64,
    pub steps: usize,
    /// Largest one-step increase of the total variation.
    pub tv_increase: f64,
    /// Largest excursion outside `[u_plus - tol, u_minus + tol]` after `2 ell / f'(u_minus)`.
    pub range_excess: f64,
    pub fronts: Vec<FrontState>,
}

impl Stabilization {
    pub fn within_bound(&self) -> bool {
        self.time.is_some_and(|t| t <= self.bound)
    }
}

/// Runs Godunov until the field is a one-cell step or `t_max` is reached.
pub fn stabilization_time(u0: &HyperbolicField, model: &FluxModel, t_max: Option<f64>) -> Result<Stabilization> {
    let tol = FRONT_TOL * (model.u_minus - model.u_plus).abs();
    let a = phi_infimum(model);
    if !(a > 0.0) {
        return numerical(format!(
            "infimum of Phi is {a}; the flux is not strictly convex on the data range"
        ));
    }
    let ell = u0.ell;
    let dx = u0.dx();
    let bound = 2.0 * ell / a + 3.0 * dx / a;
    let t_max = t_max.unwrap_or(4.0 * ell / a);
    let confine_after = 2.0 * ell / model.df(model.u_minus).abs().max(1e-12);
    let mut field = u0.clone();
    let mut out = Stabilization {
        time: None,
        xi: None,
        a,
        bound,
        t_max,
        steps: 0,
        tv_increase: 0.0,
        range_excess: 0.0,
        fronts: vec![track_fronts(&field, model, tol)],
    };
    let mut tv = field.total_variation(model);
    loop {
        if let Some(xi) = step_position(&field, model, tol) {
            out.time = Some(field.time);
            out.xi = Some(xi);
            break;
        }
        if field.time >= t_max {
            break;
        }
        let dt = max_dt(&field, model).min(t_max - field.time).max(1e-15);
        field = godunov_step(&field, model, dt)?;
        out.steps += 1;
        let next_tv = field.total_variation(model);
        out.tv_increase = out.tv_increase.max(next_tv - tv);
        tv = next_tv;
        if field.time >= confine_after {
            for &u in &field.cells {
                out.range_excess = out
                    .range_excess
                    .max(u - model.u_minus - tol)
                    .max(model.u_plus - tol - u);
            }
        }
        out.fronts.push(track_fronts(&field, model, tol));
    }
    Ok(out)
}

/// Named decreasing initial data with values in `[u_plus, u_minus]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Linear,
    Figure1,
    Tanh,
    Staircase,
    Cosine,
    /// Admissible step at the origin.
    Step,
}

impl Preset {
    pub const DECREASING: [Preset; 5] = [
        Preset::Linear,
        Preset::Figure1,
        Preset::Tanh,
        Preset::Staircase,
        Preset::Cosine,
    ];

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "linear" => Self::Linear,
            "figure1" => Self::Figure1,
            "tanh" => Self::Tanh,
            "staircase" => Self::Staircase,
            "cosine" => Self::Cosine,
            "step" => Self::Step,
            other => return invalid(format!("unknown preset '{other}'")),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Figure1 => "figure1",
            Self::Tanh => "tanh",
            Self::Staircase => "staircase",
            Self::Cosine => "cosine",
            Self::Step => "step",
        }
    }

    /// Value at `x`, built from a profile `g` on `[-1, 1]` running from 1 to -1.
    pub fn value(self, model: &FluxModel, ell: f64, x: f64) -> f64 {
        let s = (x / ell).clamp(-1.0, 1.0);
        let g = match self {
            Self::Linear => -s,
            Self::Figure1 => 0.5 * (s * s - 2.0 * s - 1.0),
            Self::Tanh => -(3.0 * s).tanh() / 3.0f64.tanh(),
            Self::Staircase => 1.0 - 2.0 * ((2.5 * (s + 1.0)).floor() / 4.0).min(1.0),
            Self::Cosine => (0.5 * std::f64::consts::PI * (s + 1.0)).cos(),
            Self::Step => {
                if s < 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        let mid = 0.5 * (model.u_minus + model.u_plus);
        let half = 0.5 * (model.u_minus - model.u_plus);
        mid + half * g
    }

    pub fn field(self, model: &FluxModel, ell: f64, cells: usize) -> Result<HyperbolicField> {
        HyperbolicField::sample(ell, cells, |x| self.value(model, ell, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn burgers() -> FluxModel {
        FluxModel::make_burgers(1.0).unwrap()
    }

    #[test]
    fn burgers_conjugate() {
        let b = burgers();
        assert!((conjugate_state(&b, 0.7).unwrap() + 0.7).abs() < 1e-14);
        assert_eq!(conjugate_state(&b, 0.0).unwrap(), 0.0);
        assert!(conjugate_state(&b, 1.5).is_err());
    }

    #[test]
    fn burgers_phi_is_one() {
        let b = burgers();
        assert!((phi_infimum(&b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_is_fixed_point() {
        let b = burgers();
        let f = HyperbolicField::sample(1.0, 100, |x| if x < 0.2 { 1.0 } else { -1.0 }).unwrap();
        let mut g = f.clone();
        for _ in 0..50 {
            g = godunov_step(&g, &b, max_dt(&g, &b)).unwrap();
        }
        assert_eq!(g.cells, f.cells);
        let fr = track_fronts(&g, &b, 1e-3);
        assert!((fr.zeta_minus - 0.2).abs() <= g.dx() && (fr.zeta_plus - 0.2).abs() <= g.dx());
    }

    #[test]
    fn rarefaction_left_edge() {
        // increasing jump u_plus -> u_minus at 0: fan between f'(-1) t and f'(1) t
        let b = burgers();
        let mut f = HyperbolicField::sample(1.0, 800, |x| if x < 0.0 { -1.0 } else { 1.0 }).unwrap();
        while f.time < 0.3 {
            let dt = max_dt(&f, &b).min(0.3 - f.time);
            f = godunov_step(&f, &b, dt).unwrap();
        }
        let u: Vec<f64> = f.cells.clone();
        let i = f.cells.len() / 2;
        assert!(u[i] > -1.0 && u[i] < 1.0);
        let x = f.centre(i);
        assert!((u[i] - x / 0.3).abs() < 0.05);
    }

    #[test]
    fn constant_data_front_at_right_end() {
        let b = burgers();
        let f = HyperbolicField::new(1.0, vec![1.0; 40]).unwrap();
        assert_eq!(track_fronts(&f, &b, 1e-3).zeta_minus, 1.0);
    }

    #[test]
    fn cfl_violation_rejected() {
        let b = burgers();
        let f = Preset::Linear.field(&b, 1.0, 50).unwrap();
        assert!(godunov_step(&f, &b, 1.0).unwrap_err().to_string().contains("Courant"));
    }

    #[test]
    fn presets_are_decreasing_between_boundary_values() {
        let b = burgers();
        for p in Preset::DECREASING {
            let f = p.field(&b, 1.0, 200).unwrap();
            assert!(f.cells.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{}", p.name());
            assert!(f.cells.iter().all(|&u| (-1.0..=1.0).contains(&u)));
        }
    }
}
