//! The approximate slow manifold: matched two-layer profiles `U(x; xi)`.
//!
//! Each profile glues two exact traveling-layer solutions at the sonic
//! point. The integration constants `kappa_minus`, `kappa_plus` sit
//! exponentially close to `f(u_minus)`, `f(u_plus)`, so they are carried
//! as excesses `eta = kappa - f(u_b)` to keep their relative precision.

use crate::error::{invalid, numerical, Error, Result};
use crate::flux::{FluxModel, GapEval, Side};
use crate::grid::Grid;
use crate::numerics::{quad, roots};

/// Relative step for the centered `xi`-difference of profiles.
pub const DXI_FRACTION: f64 = 0.01;
const TAIL_DECADES: f64 = 45.0;
const KAPPA_TOL: f64 = 1e-13;

/// Distance kept between the layer and the boundary, `4 eps |ln eps|`
/// capped at `ell / 2`.
pub fn margin(epsilon: f64, ell: f64) -> f64 {
    (4.0 * epsilon * epsilon.ln().abs()).min(0.5 * ell)
}

/// An integration constant and its excess over the boundary flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa {
    pub side: Side,
    pub excess: f64,
    pub value: f64,
}

/// `|Psi*|` along one branch, written in `sigma = ln t` where `t` is the
/// distance from the boundary state.
#[derive(Debug, Clone)]
pub(crate) struct SideIntegrand {
    gap: GapEval,
    eta: f64,
    pub ln_d: f64,
    pub sigma0: f64,
    pub d: f64,
}

impl SideIntegrand {
    pub fn new(model: &FluxModel, side: Side, eta: f64) -> Self {
        let d = (model.boundary(side) - model.u_star).abs();
        Self {
            gap: model.gap_evaluator(side),
            eta,
            ln_d: d.ln(),
            sigma0: eta.ln().min(d.ln()) - TAIL_DECADES,
            d,
        }
    }

    #[inline]
    pub fn w(&self, s: f64) -> f64 {
        let t = s.exp();
        t / (self.eta + self.gap.eval(t))
    }

    pub fn between(&self, lo: f64, hi: f64) -> Result<f64> {
        quad::integrate(|s| self.w(s), lo, hi, 1e-17, 2e-15)
    }

    /// `|Psi*(kappa, u_b)|`.
    pub fn total(&self) -> Result<f64> {
        self.between(self.sigma0, self.ln_d)
    }

    /// `|Psi*(kappa, u)|` for `u` at distance `t` from the boundary state.
    pub fn at_distance(&self, t: f64) -> Result<f64> {
        let lo = if t > 0.0 { t.ln().max(self.sigma0) } else { self.sigma0 };
        self.between(lo, self.ln_d)
    }

    /// Distances `t` at which `|Psi*|` reaches each ascending target.
    pub fn invert(&self, targets: &[f64], total: f64) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(targets.len());
        let (mut anchor_s, mut anchor_p) = (self.ln_d, 0.0);
        for &tau in targets {
            if tau <= 0.0 {
                out.push(self.d);
                continue;
            }
            if tau >= total * (1.0 - 1e-14) {
                out.push(0.0);
                continue;
            }
            let (mut lo, mut hi) = (self.sigma0, anchor_s);
            let (mut cur_s, mut cur_p) = (anchor_s, anchor_p);
            let mut accepted = None;
            for _ in 0..200 {
                let mut cand = cur_s - (tau - cur_p) / self.w(cur_s);
                if !(cand > lo && cand < hi) || !cand.is_finite() {
                    cand = 0.5 * (lo + hi);
                }
                let p = anchor_p + self.between(cand, anchor_s)?;
                if (p - tau).abs() <= 1e-14 * tau.max(1.0) || hi - lo <= 1e-15 * hi.abs().max(1.0) {
                    accepted = Some(cand);
                    break;
                }
                if p < tau {
                    anchor_s = cand;
                    anchor_p = p;
                    hi = cand;
                } else {
                    lo = cand;
                }
                cur_s = cand;
                cur_p = p;
            }
            match accepted {
                Some(s) => out.push(s.exp()),
                None => return numerical(format!("profile inversion stalled at target {tau}")),
            }
        }
        Ok(out)
    }
}

fn check_domain(xi: f64, epsilon: f64, ell: f64) -> Result<()> {
    if !(epsilon > 0.0) || !(ell > 0.0) || !epsilon.is_finite() || !ell.is_finite() {
        return invalid(format!("need epsilon > 0 and ell > 0 (epsilon={epsilon}, ell={ell})"));
    }
    if !(xi.abs() < ell) {
        return invalid(format!("layer position {xi} outside (-{ell}, {ell})"));
    }
    Ok(())
}

/// `Psi*(kappa, u) = int_{u_star}^{u} ds / (kappa - f(s))`.
pub fn psi_star(model: &FluxModel, kappa: f64, u: f64) -> Result<f64> {
    if u == model.u_star {
        return Ok(0.0);
    }
    let side = if u > model.u_star { Side::Minus } else { Side::Plus };
    let ub = model.boundary(side);
    let t = (ub - u).abs();
    if (u - model.u_star).abs() > (ub - model.u_star).abs() {
        return invalid(format!("u = {u} lies outside [u_plus, u_minus]"));
    }
    let eta = kappa - model.boundary_flux(side);
    if !(eta > 0.0) {
        return invalid(format!(
            "kappa = {kappa} must exceed f(u_b) = {}",
            model.boundary_flux(side)
        ));
    }
    let v = SideIntegrand::new(model, side, eta).at_distance(t)?;
    Ok(if side == Side::Minus { v } else { -v })
}

/// Sandwich bounds `(lower, upper)` for the excess `kappa - f(u_b)` on one side.
pub fn excess_bounds(model: &FluxModel, side: Side, xi: f64, epsilon: f64, ell: f64) -> (f64, f64) {
    let tau = match side {
        Side::Minus => (ell + xi) / epsilon,
        Side::Plus => (ell - xi) / epsilon,
    };
    let ub = model.boundary(side);
    let d = (ub - model.u_star).abs();
    let k = model.df(ub).abs();
    let fb = model.boundary_flux(side);
    let lower = k * d / (k * tau).exp_m1();
    let upper = fb / (fb * tau / d).exp_m1();
    (lower, upper)
}

/// Solves `eps Psi*(kappa, u_b) -/+ ell = xi` for one side.
pub fn solve_kappa(model: &FluxModel, side: Side, xi: f64, epsilon: f64, ell: f64) -> Result<Kappa> {
    check_domain(xi, epsilon, ell)?;
    let tau = match side {
        Side::Minus => (ell + xi) / epsilon,
        Side::Plus => (ell - xi) / epsilon,
    };
    let (lo, hi) = excess_bounds(model, side, xi, epsilon, ell);
    let (ylo, yhi) = (lo.min(hi).ln() - 0.5, lo.max(hi).ln() + 0.5);
    let g = |y: f64| {
        SideIntegrand::new(model, side, y.exp())
            .total()
            .map(|v| v - tau)
            .unwrap_or(f64::NAN)
    };
    let br = roots::expand_bracket(g, ylo, yhi, None)?;
    let y = roots::solve(g, br, 0.0, KAPPA_TOL)?;
    let excess = y.exp();
    Ok(Kappa {
        side,
        excess,
        value: model.boundary_flux(side) + excess,
    })
}

/// Both integration constants at layer position `xi`.
pub fn kappa_pair(model: &FluxModel, xi: f64, epsilon: f64, ell: f64) -> Result<(Kappa, Kappa)> {
    Ok((
        solve_kappa(model, Side::Minus, xi, epsilon, ell)?,
        solve_kappa(model, Side::Plus, xi, epsilon, ell)?,
    ))
}

/// `kappa_minus - kappa_plus`, formed from the excesses.
pub fn kappa_gap(model: &FluxModel, km: &Kappa, kp: &Kappa) -> f64 {
    (model.f_minus - model.f_plus) + (km.excess - kp.excess)
}

/// Profile values on `grid` for the layer at `xi`.
pub fn profile_values(
    model: &FluxModel,
    grid: &Grid,
    xi: f64,
    epsilon: f64,
    ell: f64,
) -> Result<(Kappa, Kappa, Vec<f64>)> {
    let (km, kp) = kappa_pair(model, xi, epsilon, ell)?;
    let mut u = vec![model.u_star; grid.len()];
    for (side, kappa) in [(Side::Minus, &km), (Side::Plus, &kp)] {
        let integ = SideIntegrand::new(model, side, kappa.excess);
        let total = integ.total()?;
        let ub = model.boundary(side);
        let dir = if ub > model.u_star { 1.0 } else { -1.0 };
        let idx: Vec<usize> = match side {
            Side::Minus => (0..grid.len()).rev().filter(|&i| grid.x[i] < xi).collect(),
            Side::Plus => (0..grid.len()).filter(|&i| grid.x[i] > xi).collect(),
        };
        let targets: Vec<f64> = idx.iter().map(|&i| (grid.x[i] - xi).abs() / epsilon).collect();
        let ts = integ.invert(&targets, total)?;
        for (&i, t) in idx.iter().zip(ts) {
            u[i] = ub - dir * t;
        }
    }
    Ok((km, kp, u))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedProfile {
    pub xi: f64,
    pub epsilon: f64,
    pub ell: f64,
    pub kappa_minus: Kappa,
    pub kappa_plus: Kappa,
    pub grid: Grid,
    pub u_values: Vec<f64>,
    /// `(kappa_minus - kappa_plus) / eps`, the jump of `U_x` at `xi`.
    pub jump_dxu: f64,
    /// `d U / d xi` by centered differences; empty when not requested.
    pub dxi_values: Vec<f64>,
}

/// Builds `U(.; xi)` on `grid` (or the default grid for `epsilon`).
pub fn build_profile(
    model: &FluxModel,
    xi: f64,
    epsilon: f64,
    ell: f64,
    grid: Option<Grid>,
    with_dxi: bool,
) -> Result<MatchedProfile> {
    check_domain(xi, epsilon, ell)?;
    let grid = match grid {
        Some(g) => g,
        None => Grid::for_epsilon(ell, epsilon)?,
    };
    if grid.len() < 64 {
        return invalid(format!("profile grid needs at least 64 nodes, got {}", grid.len()));
    }
    if (grid.ell() - ell).abs() > 1e-12 * ell || (grid.x[0] + ell).abs() > 1e-12 * ell {
        return invalid("grid does not span [-ell, ell]");
    }
    if grid.max_spacing() > epsilon / 8.0 {
        return invalid(format!(
            "grid spacing {} exceeds eps/8; use at least {} intervals",
            grid.max_spacing(),
            (16.0 * ell / epsilon).ceil()
        ));
    }
    let (km, kp, u) = profile_values(model, &grid, xi, epsilon, ell)?;
    let dxi_values = if with_dxi {
        dxi_profile(model, &grid, xi, epsilon, ell)?
    } else {
        Vec::new()
    };
    let jump = kappa_gap(model, &km, &kp) / epsilon;
    Ok(MatchedProfile {
        xi,
        epsilon,
        ell,
        kappa_minus: km,
        kappa_plus: kp,
        grid,
        u_values: u,
        jump_dxu: jump,
        dxi_values,
    })
}

/// Centered difference in `xi` with step `eps / 100`.
pub fn dxi_profile(model: &FluxModel, grid: &Grid, xi: f64, epsilon: f64, ell: f64) -> Result<Vec<f64>> {
    let h = DXI_FRACTION * epsilon;
    let (_, _, up) = profile_values(model, grid, xi + h, epsilon, ell)?;
    let (_, _, um) = profile_values(model, grid, xi - h, epsilon, ell)?;
    Ok(up.iter().zip(&um).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    /// Weight of the Dirac mass at `xi` in `F[U]`.
    pub jump: f64,
    pub omega: f64,
}

/// `F[U] = eps U_xx - f(U)_x = eps [[U_x]] delta_xi = (kappa_minus - kappa_plus) delta_xi`.
pub fn residual(model: &FluxModel, profile: &MatchedProfile) -> Residual {
    let jump = kappa_gap(model, &profile.kappa_minus, &profile.kappa_plus);
    Residual {
        jump,
        omega: jump.abs(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaBounds {
    pub excess_minus: (f64, f64),
    pub excess_plus: (f64, f64),
    /// Largest `|kappa_minus - kappa_plus|` allowed by the bounds.
    pub omega_upper: f64,
}

pub fn omega_bound(model: &FluxModel, xi: f64, epsilon: f64, ell: f64) -> Result<OmegaBounds> {
    check_domain(xi, epsilon, ell)?;
    let m = excess_bounds(model, Side::Minus, xi, epsilon, ell);
    let p = excess_bounds(model, Side::Plus, xi, epsilon, ell);
    let base = model.f_minus - model.f_plus;
    let omega_upper = (base + m.1 - p.0).abs().max((base + m.0 - p.1).abs());
    Ok(OmegaBounds {
        excess_minus: m,
        excess_plus: p,
        omega_upper,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateResult {
    pub kappa: f64,
    /// `kappa - max(f(u_minus), f(u_plus))`.
    pub excess: f64,
    pub xi_star: f64,
    /// `xi*` from the independent condition `kappa_minus = kappa_plus`.
    pub xi_star_matched: f64,
    pub profile: MatchedProfile,
}

/// Solves `int_{u_plus}^{u_minus} ds / (kappa - f(s)) = 2 ell / eps`.
pub fn steady_state(model: &FluxModel, epsilon: f64, ell: f64, grid: Option<Grid>) -> Result<SteadyStateResult> {
    check_domain(0.0, epsilon, ell)?;
    let base = model.f_minus.max(model.f_plus);
    let target = 2.0 * ell / epsilon;
    let phi = |y: f64| -> f64 {
        let a = SideIntegrand::new(model, Side::Minus, (base - model.f_minus) + y.exp());
        let b = SideIntegrand::new(model, Side::Plus, (base - model.f_plus) + y.exp());
        match (a.total(), b.total()) {
            (Ok(x), Ok(z)) => x + z - target,
            _ => f64::NAN,
        }
    };
    let (lo, hi) = excess_bounds(model, Side::Minus, 0.0, epsilon, ell);
    let br = roots::expand_bracket(phi, lo.min(hi).ln() - 2.0, lo.max(hi).ln() + 2.0, None)?;
    let y = roots::solve(phi, br, 0.0, KAPPA_TOL)?;
    let excess = y.exp();
    let eta_minus = (base - model.f_minus) + excess;
    let xi_star = epsilon * SideIntegrand::new(model, Side::Minus, eta_minus).total()? - ell;

    let xi_star_matched = equilibrium_near(model, epsilon, ell, xi_star)?;
    if (xi_star - xi_star_matched).abs() > 1e-8 * ell {
        return Err(Error::Numerical(format!(
            "steady layer position disagrees: {xi_star} from Phi, {xi_star_matched} from matching"
        )));
    }
    let profile = build_profile(model, xi_star, epsilon, ell, grid, true)?;
    Ok(SteadyStateResult {
        kappa: base + excess,
        excess,
        xi_star,
        xi_star_matched,
        profile,
    })
}

/// Layer position where `kappa_minus = kappa_plus`.
pub fn equilibrium(model: &FluxModel, epsilon: f64, ell: f64) -> Result<f64> {
    check_domain(0.0, epsilon, ell)?;
    // Balance of the two layer exponents gives the starting guess.
    let km = model.df(model.u_minus).abs();
    let kp = model.df(model.u_plus).abs();
    let guess = ell * (km - kp) / (km + kp);
    equilibrium_near(model, epsilon, ell, guess)
}

fn equilibrium_near(model: &FluxModel, epsilon: f64, ell: f64, guess: f64) -> Result<f64> {
    let delta = 1e-6 * ell;
    let gap = |x: f64| -> f64 {
        match kappa_pair(model, x, epsilon, ell) {
            Ok((a, b)) => kappa_gap(model, &a, &b),
            Err(_) => f64::NAN,
        }
    };
    let lim = (-ell + delta, ell - delta);
    let br = roots::expand_bracket(gap, guess - epsilon, guess + epsilon, Some(lim))?;
    roots::solve(gap, br, 0.0, 1e-13 * ell)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn burgers() -> FluxModel {
        FluxModel::make_burgers(1.0).unwrap()
    }

    #[test]
    fn psi_star_burgers_closed_form() {
        let v = psi_star(&burgers(), 1.0, 0.5).unwrap();
        let exact = std::f64::consts::SQRT_2 * (0.5 / std::f64::consts::SQRT_2).atanh();
        assert!((v - exact).abs() < 1e-13, "{v} vs {exact}");
    }

    #[test]
    fn psi_star_trapezoid_oracle() {
        let (k, u) = (0.75, -0.6);
        let n = 1_000_000;
        let h = u / n as f64;
        let g = |s: f64| 1.0 / (k - 0.5 * s * s);
        let mut acc = 0.5 * (g(0.0) + g(u));
        for i in 1..n {
            acc += g(i as f64 * h);
        }
        let oracle = acc * h;
        let v = psi_star(&burgers(), k, u).unwrap();
        assert!((v - oracle).abs() < 1e-9);
    }

    #[test]
    fn abs_kappa_plus_exact() {
        let m = FluxModel::make_abs(1.0).unwrap();
        let k = solve_kappa(&m, Side::Plus, 0.2, 0.1, 1.0).unwrap();
        let q = (-8f64).exp();
        let exact = q / (1.0 - q);
        assert!((k.excess / exact - 1.0).abs() < 1e-11);
    }

    #[test]
    fn burgers_kappa_plus_near_tanh_estimate() {
        let k = solve_kappa(&burgers(), Side::Plus, 0.3, 0.1, 1.0).unwrap();
        let approx = 0.5 / 3.5f64.tanh().powi(2);
        assert!((k.value - approx).abs() / approx < 1e-4);
        let (lo, hi) = excess_bounds(&burgers(), Side::Plus, 0.3, 0.1, 1.0);
        assert!(lo <= k.excess && k.excess <= hi);
    }

    #[test]
    fn tiny_excess_is_resolved() {
        // eps = 0.02 puts kappa - 1/2 near 2 e^{-50}, below the f64 resolution of kappa.
        let k = solve_kappa(&burgers(), Side::Minus, 0.0, 0.02, 1.0).unwrap();
        let c = (2.0 * k.value).sqrt();
        assert!((k.excess / (2.0 * (-50f64).exp()) - 1.0).abs() < 1e-6);
        let (lo, hi) = excess_bounds(&burgers(), Side::Minus, 0.0, 0.02, 1.0);
        assert!(lo <= k.excess && k.excess <= hi);
        assert_eq!(c, 1.0);
    }

    #[test]
    fn burgers_steady_matches_tanh() {
        let eps = 0.1;
        let ss = steady_state(&burgers(), eps, 1.0, None).unwrap();
        assert!(ss.xi_star.abs() < 1e-10);
        // c tanh(c ell / (2 eps)) = u_minus with c = sqrt(2 kappa)
        let c =
            crate::numerics::roots::find_root(|c| c * (c / (2.0 * eps)).tanh() - 1.0, 0.9, 1.1, None, 1e-15).unwrap();
        assert!((ss.kappa - 0.5 * c * c).abs() < 1e-13);
        for (x, u) in ss.profile.grid.x.iter().zip(&ss.profile.u_values) {
            let exact = -c * (c * x / (2.0 * eps)).tanh();
            assert!((u - exact).abs() < 1e-11, "x={x}: {u} vs {exact}");
        }
    }

    #[test]
    fn residual_sign_and_symmetry() {
        let m = burgers();
        let p = build_profile(&m, 0.3, 0.1, 1.0, None, false).unwrap();
        let q = build_profile(&m, -0.3, 0.1, 1.0, None, false).unwrap();
        assert!(p.jump_dxu < 0.0);
        assert!((p.jump_dxu + q.jump_dxu).abs() < 1e-10 * p.jump_dxu.abs());
    }

    #[test]
    fn asymmetric_equilibrium_off_centre() {
        let m = FluxModel::make_convex(&[0.0, 0.0, 1.0, -1.0, 0.4], 1.0, -0.5).unwrap();
        let xs = equilibrium(&m, 0.1, 1.0).unwrap();
        assert!(xs > 0.2, "xi* = {xs}");
        let ss = steady_state(&m, 0.1, 1.0, None).unwrap();
        assert!((ss.xi_star - xs).abs() < 1e-8);
    }

    #[test]
    fn rejects_coarse_grid() {
        let g = Grid::uniform(1.0, 64).unwrap();
        assert!(build_profile(&burgers(), 0.0, 0.1, 1.0, Some(g), false).is_err());
    }
}
