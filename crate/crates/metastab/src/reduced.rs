//! Reduced dynamics along the slow manifold.
//!
//! The layer position obeys `d zeta/dt = theta(zeta)`, with
//! `theta = psi_1(xi) (kappa_minus - kappa_plus)` the projection of the
//! residual on the first adjoint eigenfunction. The quasi-linear system
//! couples `zeta` to the modal coefficients of the perturbation `w`.

use rayon::prelude::*;

use crate::error::{invalid, numerical, Result};
use crate::flux::{FluxKind, FluxModel};
use crate::grid::Grid;
use crate::manifold::{self, DXI_FRACTION};
use crate::numerics::interp::{self, MonotoneCubic};
use crate::spectral::{self, LayerSpectrum};

/// Three evaluations of the drift speed at one layer position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaEval {
    /// `psi_1(xi) (kappa_minus - kappa_plus)`.
    pub spectral: f64,
    /// `(kappa_plus - kappa_minus) / [[u]]`.
    pub jump_approx: f64,
    /// Exponential closed form, available for the Burgers and abs fluxes.
    pub closed_form: Option<f64>,
    pub omega: f64,
}

/// Closed-form drift for the two symmetric model fluxes.
pub fn theta_closed_form(model: &FluxModel, xi: f64, epsilon: f64, ell: f64) -> Option<f64> {
    let u = model.u_minus;
    match (&model.kind, model.name.as_str()) {
        (FluxKind::Abs, _) => Some(-(-ell / epsilon).exp() * (xi / epsilon).sinh()),
        (FluxKind::Polynomial(_), "burgers") => {
            Some(u * ((-u * (ell + xi) / epsilon).exp() - (-u * (ell - xi) / epsilon).exp()))
        }
        _ => None,
    }
}

/// Drift from the matching constants alone.
pub fn theta_jump(model: &FluxModel, xi: f64, epsilon: f64, ell: f64) -> Result<f64> {
    let (km, kp) = manifold::kappa_pair(model, xi, epsilon, ell)?;
    Ok(-manifold::kappa_gap(model, &km, &kp) / model.jump())
}

pub fn theta(model: &FluxModel, xi: f64, epsilon: f64, ell: f64, grid: Option<Grid>) -> Result<ThetaEval> {
    let ls = spectral::layer_spectrum(model, xi, epsilon, ell, 1, grid)?;
    let jump = manifold::residual(model, &ls.profile).jump;
    Ok(ThetaEval {
        spectral: ls.decomposition.psi_at(0, xi) * jump,
        jump_approx: -manifold::kappa_gap(model, &ls.profile.kappa_minus, &ls.profile.kappa_plus) / model.jump(),
        closed_form: theta_closed_form(model, xi, epsilon, ell),
        omega: jump.abs(),
    })
}

/// Uniform knots on `[lo, hi]` with `xi_star` inserted when inside.
fn knots_with(lo: f64, hi: f64, n: usize, xi_star: f64) -> Vec<f64> {
    let mut ks: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    if xi_star > lo && xi_star < hi {
        let h = (hi - lo) / (n - 1) as f64;
        let j = interp::locate(&ks, xi_star);
        if (ks[j] - xi_star).abs() < 0.25 * h {
            ks[j] = xi_star;
        } else if (ks[j + 1] - xi_star).abs() < 0.25 * h {
            ks[j + 1] = xi_star;
        } else {
            ks.insert(j + 1, xi_star);
        }
    }
    ks
}

fn knot_range(zeta0: f64, xi_star: f64, epsilon: f64, ell: f64) -> Result<(f64, f64)> {
    let pad = 0.5 * epsilon;
    let edge = ell - manifold::margin(epsilon, ell).max(2.0 * DXI_FRACTION * epsilon);
    let lo = (zeta0.min(xi_star) - pad).max(-edge);
    let hi = (zeta0.max(xi_star) + pad).min(edge);
    if !(zeta0 >= lo && zeta0 <= hi) {
        return invalid(format!("initial layer position {zeta0} too close to the boundary"));
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftOptions {
    pub knots: usize,
    /// Stop once `|zeta - xi*|` falls below this distance.
    pub stop_distance: f64,
}

impl Default for DriftOptions {
    fn default() -> Self {
        Self {
            knots: 65,
            stop_distance: 0.0,
        }
    }
}

/// Drift speed tabulated on knots and interpolated monotonically.
#[derive(Debug, Clone)]
pub struct DriftCache {
    pub xi_star: f64,
    pub interp: MonotoneCubic,
    pub thetas: Vec<f64>,
}

impl DriftCache {
    pub fn build(model: &FluxModel, zeta0: f64, epsilon: f64, ell: f64, knots: usize) -> Result<Self> {
        let xi_star = manifold::equilibrium(model, epsilon, ell)?;
        let (lo, hi) = knot_range(zeta0, xi_star, epsilon, ell)?;
        let ks = knots_with(lo, hi, knots.max(8), xi_star);
        let grid = Grid::for_epsilon(ell, epsilon)?;
        let thetas: Vec<f64> = ks
            .par_iter()
            .map(|&k| {
                if k == xi_star {
                    Ok(0.0)
                } else {
                    theta(model, k, epsilon, ell, Some(grid.clone())).map(|t| t.spectral)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            xi_star,
            interp: MonotoneCubic::new(ks, thetas.clone()),
            thetas,
        })
    }

    pub fn theta(&self, zeta: f64) -> f64 {
        self.interp.eval(zeta)
    }

    /// Interval covered by the knots.
    pub fn range(&self) -> (f64, f64) {
        let k = self.interp.knots();
        (k[0], k[k.len() - 1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrajectory {
    pub times: Vec<f64>,
    pub zeta: Vec<f64>,
    pub theta_values: Vec<f64>,
    pub xi_star: f64,
    /// Set when `zeta` left the admissible range and integration stopped.
    pub exited: bool,
}

impl ReducedTrajectory {
    /// `zeta` at time `t` by linear interpolation of the stored steps.
    /// Cubic Hermite dense output with the stored drift speeds as slopes.
    pub fn zeta_at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n < 2 || t <= self.times[0] {
            return self.zeta[0];
        }
        if t >= self.times[n - 1] {
            return self.zeta[n - 1];
        }
        let i = interp::locate(&self.times, t);
        let h = self.times[i + 1] - self.times[i];
        let s = (t - self.times[i]) / h;
        let (z0, z1) = (self.zeta[i], self.zeta[i + 1]);
        let (d0, d1) = (h * self.theta_values[i], h * self.theta_values[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * z0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * z1 + (s3 - s2) * d1
    }
}

/// Integrates `d zeta/dt = theta(zeta)` with classical RK4.
pub fn integrate_drift(
    model: &FluxModel,
    zeta0: f64,
    epsilon: f64,
    ell: f64,
    t_end: f64,
    opts: DriftOptions,
) -> Result<ReducedTrajectory> {
    let cache = DriftCache::build(model, zeta0, epsilon, ell, opts.knots)?;
    integrate_drift_cached(&cache, zeta0, 0.0, t_end, epsilon, opts.stop_distance)
}

pub fn integrate_drift_cached(
    cache: &DriftCache,
    zeta0: f64,
    t0: f64,
    t_end: f64,
    epsilon: f64,
    stop_distance: f64,
) -> Result<ReducedTrajectory> {
    if !(t_end > t0) {
        return invalid("integration window must have positive length");
    }
    let f = |z: f64| cache.theta(z);
    let (mut t, mut z) = (t0, zeta0);
    let (lo, hi) = cache.range();
    let mut out = ReducedTrajectory {
        times: vec![t],
        zeta: vec![z],
        theta_values: vec![f(z)],
        xi_star: cache.xi_star,
        exited: false,
    };
    let span = t_end - t0;
    while t < t_end {
        let th = f(z).abs();
        let dist = (z - cache.xi_star).abs();
        if dist <= stop_distance {
            break;
        }
        let scale = dist.min(epsilon).max(1e-14 * epsilon);
        let mut dt = if th > 0.0 { 0.02 * scale / th } else { span };
        dt = dt.min(span / 50.0).min(t_end - t);
        let k1 = f(z);
        let k2 = f(z + 0.5 * dt * k1);
        let k3 = f(z + 0.5 * dt * k2);
        let k4 = f(z + dt * k3);
        z += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += dt;
        if !z.is_finite() {
            return numerical("drift integration diverged");
        }
        if z < lo || z > hi {
            out.exited = true;
            break;
        }
        out.times.push(t);
        out.zeta.push(z);
        out.theta_values.push(f(z));
    }
    Ok(out)
}

/// `T = (1/Omega) ln(C/Omega - |w0|^2)`; zero with `degenerate` when the
/// logarithm is not positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub t: f64,
    pub degenerate: bool,
}

pub fn validity_horizon(omega: f64, w0_norm: f64, c: f64) -> Horizon {
    let arg = c / omega - w0_norm * w0_norm;
    if !(arg > 1.0) || !(omega > 0.0) {
        return Horizon {
            t: 0.0,
            degenerate: true,
        };
    }
    Horizon {
        t: arg.ln() / omega,
        degenerate: false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub xi_star: f64,
    /// `(xi - xi*) theta(xi) < 0` at every sample.
    pub sign_ok: bool,
    pub samples: usize,
    pub theta_prime: f64,
    /// Relaxation rate `|theta'(xi*)|`.
    pub beta: f64,
}

/// Checks the attractivity of the equilibrium layer position.
pub fn drift_stability_check(model: &FluxModel, epsilon: f64, ell: f64) -> Result<StabilityReport> {
    let xi_star = manifold::equilibrium(model, epsilon, ell)?;
    let edge = ell - manifold::margin(epsilon, ell);
    let samples = 200;
    let signs: Vec<bool> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let xi = -edge + 2.0 * edge * (i as f64 + 0.5) / samples as f64;
            if (xi - xi_star).abs() < 1e-9 {
                return Ok(true);
            }
            theta_jump(model, xi, epsilon, ell).map(|th| (xi - xi_star) * th < 0.0)
        })
        .collect::<Result<_>>()?;
    let h = 0.05 * epsilon;
    let grid = Grid::for_epsilon(ell, epsilon)?;
    let tp = theta(model, xi_star + h, epsilon, ell, Some(grid.clone()))?.spectral;
    let tm = theta(model, xi_star - h, epsilon, ell, Some(grid))?.spectral;
    let theta_prime = (tp - tm) / (2.0 * h);
    Ok(StabilityReport {
        xi_star,
        sign_ok: signs.iter().all(|&s| s),
        samples,
        theta_prime,
        beta: theta_prime.abs(),
    })
}

/// Modal coefficients of the quasi-linear system at one layer position.
#[derive(Debug, Clone, PartialEq)]
struct ModalKnot {
    lambdas: Vec<f64>,
    theta: f64,
    omega: f64,
    /// `<psi_k, H>`.
    forcing: Vec<f64>,
    /// `<psi_k, a_j>` with `a_j = <d psi_1, phi_j> d_xi U + d_xi phi_j`.
    a: Vec<f64>,
    /// `<psi_k, d_xi phi_j>`.
    p: Vec<f64>,
    /// `<d_xi psi_1, phi_j>`.
    c: Vec<f64>,
    /// `<phi_j, phi_k>`.
    gram: Vec<f64>,
    /// `sum_j <d_xi psi_k, phi_j>^2` over retained modes.
    h3: Vec<f64>,
    /// `<psi_1, phi_j>`.
    psi1_phi: Vec<f64>,
}

impl ModalKnot {
    fn blend(a: &Self, b: &Self, s: f64) -> Self {
        let mix = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p + s * (q - p)).collect();
        Self {
            lambdas: mix(&a.lambdas, &b.lambdas),
            theta: a.theta + s * (b.theta - a.theta),
            omega: a.omega + s * (b.omega - a.omega),
            forcing: mix(&a.forcing, &b.forcing),
            a: mix(&a.a, &b.a),
            p: mix(&a.p, &b.p),
            c: mix(&a.c, &b.c),
            gram: mix(&a.gram, &b.gram),
            h3: mix(&a.h3, &b.h3),
            psi1_phi: mix(&a.psi1_phi, &b.psi1_phi),
        }
    }
}

fn modal_knot(
    model: &FluxModel,
    xi: f64,
    epsilon: f64,
    ell: f64,
    k: usize,
    grid: &Grid,
    at_rest: bool,
) -> Result<(ModalKnot, LayerSpectrum)> {
    let h = DXI_FRACTION * epsilon;
    let mid = spectral::layer_spectrum(model, xi, epsilon, ell, k, Some(grid.clone()))?;
    let mut up = spectral::layer_spectrum(model, xi + h, epsilon, ell, k, Some(grid.clone()))?.decomposition;
    let mut dn = spectral::layer_spectrum(model, xi - h, epsilon, ell, k, Some(grid.clone()))?.decomposition;
    let d = &mid.decomposition;
    up.align_signs(d);
    dn.align_signs(d);
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| (p - q) / (2.0 * h)).collect() };
    let dphi: Vec<Vec<f64>> = (0..k).map(|j| diff(&up.phis[j], &dn.phis[j])).collect();
    let dpsi: Vec<Vec<f64>> = (0..k).map(|j| diff(&up.psis[j], &dn.psis[j])).collect();
    let dxu = &mid.profile.dxi_values;
    let jump = if at_rest {
        0.0
    } else {
        manifold::residual(model, &mid.profile).jump
    };
    let theta = d.psi_at(0, xi) * jump;
    let g = grid;
    let c: Vec<f64> = (0..k).map(|j| g.dot(&dpsi[0], &d.phis[j])).collect();
    let psi_dxu: Vec<f64> = (0..k).map(|m| g.dot(&d.psis[m], dxu)).collect();
    let mut a = vec![0.0; k * k];
    let mut p = vec![0.0; k * k];
    let mut gram = vec![0.0; k * k];
    for m in 0..k {
        for j in 0..k {
            let pj = g.dot(&d.psis[m], &dphi[j]);
            p[m * k + j] = pj;
            a[m * k + j] = c[j] * psi_dxu[m] + pj;
            gram[m * k + j] = g.dot(&d.phis[m], &d.phis[j]);
        }
    }
    let forcing = (0..k).map(|m| d.psi_at(m, xi) * jump - theta * psi_dxu[m]).collect();
    let h3 = (0..k)
        .map(|m| (0..k).map(|j| g.dot(&dpsi[m], &d.phis[j]).powi(2)).sum())
        .collect();
    let psi1_phi = (0..k).map(|j| g.dot(&d.psis[0], &d.phis[j])).collect();
    Ok((
        ModalKnot {
            lambdas: d.lambdas.clone(),
            theta,
            omega: jump.abs(),
            forcing,
            a,
            p,
            c,
            gram,
            h3,
            psi1_phi,
        },
        mid,
    ))
}

/// Eigen-data of the quasi-linear system cached on layer positions.
#[derive(Debug, Clone)]
pub struct ModalCache {
    pub xi_star: f64,
    pub knots: Vec<f64>,
    data: Vec<ModalKnot>,
    theta: MonotoneCubic,
    pub modes: usize,
    first: LayerSpectrum,
}

impl ModalCache {
    pub fn build(model: &FluxModel, zeta0: f64, epsilon: f64, ell: f64, modes: usize, n_knots: usize) -> Result<Self> {
        let xi_star = manifold::equilibrium(model, epsilon, ell)?;
        let (lo, hi) = knot_range(zeta0, xi_star, epsilon, ell)?;
        let mut knots = knots_with(lo, hi, n_knots, xi_star);
        if !knots.contains(&zeta0) {
            let j = interp::locate(&knots, zeta0);
            knots.insert(j + 1, zeta0);
            knots.dedup();
        }
        let grid = Grid::for_epsilon(ell, epsilon)?;
        let built: Vec<(ModalKnot, Option<LayerSpectrum>)> = knots
            .par_iter()
            .map(|&x| {
                modal_knot(model, x, epsilon, ell, modes, &grid, x == xi_star)
                    .map(|(m, s)| (m, if x == zeta0 { Some(s) } else { None }))
            })
            .collect::<Result<_>>()?;
        let mut first = None;
        let mut data = Vec::with_capacity(built.len());
        for (m, s) in built {
            if s.is_some() {
                first = s;
            }
            data.push(m);
        }
        let theta = MonotoneCubic::new(knots.clone(), data.iter().map(|d| d.theta).collect());
        Ok(Self {
            xi_star,
            knots,
            data,
            theta,
            modes,
            first: first.expect("initial knot present"),
        })
    }

    fn at(&self, zeta: f64) -> ModalKnot {
        let i = interp::locate(&self.knots, zeta);
        let s = ((zeta - self.knots[i]) / (self.knots[i + 1] - self.knots[i])).clamp(0.0, 1.0);
        let mut m = ModalKnot::blend(&self.data[i], &self.data[i + 1], s);
        m.theta = self.theta.eval(zeta);
        m
    }

    /// Largest `sum_j <d_xi psi_k, phi_j>^2` per mode over the knots.
    pub fn h3_sums(&self) -> Vec<f64> {
        (0..self.modes)
            .map(|m| self.data.iter().map(|d| d.h3[m]).fold(0.0, f64::max))
            .collect()
    }

    /// Spectrum at the starting position.
    pub fn initial_spectrum(&self) -> &LayerSpectrum {
        &self.first
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiLinearState {
    pub t: f64,
    pub zeta: f64,
    pub theta: f64,
    pub w_coeffs: Vec<f64>,
    pub w_norm: f64,
    /// `|z|` for the decoupled reference solution.
    pub z_norm: f64,
    /// `|w - z|`.
    pub remainder: f64,
    /// `Omega_sup (E_1(0,t)^2 |w0|^2 + 1)`.
    pub bound_rhs: f64,
    pub log_e: Vec<f64>,
    /// `<psi_1(zeta), w>` re-measured from the eigenfunction pairings.
    pub w1: f64,
    /// `<d_xi psi_1, w>`, the relative correction to the drift speed.
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemainderReport {
    pub fitted_c: f64,
    pub omega_sup: f64,
    pub horizon: Horizon,
    pub w1_max: f64,
    pub tail_energy: f64,
    pub modes: usize,
    /// `min_k (lambda_1 - lambda_k) / k^2` along the path.
    pub gap_constant: f64,
    /// Worst violation of `E_k <= E_1 exp(-C k^2 t)` (non-positive when it holds).
    pub domination_excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiLinearRun {
    pub states: Vec<QuasiLinearState>,
    pub report: RemainderReport,
    pub xi_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiLinearOptions {
    pub modes: usize,
    pub knots: usize,
    /// Hard end of the run.
    pub t_end: f64,
    /// Earlier stop once `|zeta - xi*| <= stop_distance` past the validity horizon.
    pub stop_distance: f64,
}

impl Default for QuasiLinearOptions {
    fn default() -> Self {
        Self {
            modes: 16,
            knots: 64,
            t_end: 1.0,
            stop_distance: 0.0,
        }
    }
}

/// Initial perturbation given by its modal coefficients or as a grid field.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialPerturbation {
    /// Coefficient on `phi_k` (zero-based mode index).
    Mode {
        k: usize,
        amplitude: f64,
    },
    Field(Vec<f64>),
}

pub fn integrate_quasilinear(
    model: &FluxModel,
    zeta0: f64,
    epsilon: f64,
    ell: f64,
    w0: &InitialPerturbation,
    opts: QuasiLinearOptions,
) -> Result<QuasiLinearRun> {
    if opts.modes < 8 {
        return invalid(format!(
            "quasi-linear system needs at least 8 modes, got {}",
            opts.modes
        ));
    }
    let cache = ModalCache::build(model, zeta0, epsilon, ell, opts.modes, opts.knots)?;
    integrate_quasilinear_cached(&cache, zeta0, epsilon, w0, opts)
}

pub fn integrate_quasilinear_cached(
    cache: &ModalCache,
    zeta0: f64,
    epsilon: f64,
    w0: &InitialPerturbation,
    opts: QuasiLinearOptions,
) -> Result<QuasiLinearRun> {
    let k = cache.modes;
    let dec = &cache.initial_spectrum().decomposition;
    let g = &dec.grid;
    let field = match w0 {
        InitialPerturbation::Mode { k: m, amplitude } => {
            if *m >= dec.phis.len() {
                return invalid(format!("initial mode {m} beyond the {k} retained modes"));
            }
            let norm = g.norm(&dec.phis[*m]);
            dec.phis[*m].iter().map(|p| amplitude * p / norm).collect::<Vec<f64>>()
        }
        InitialPerturbation::Field(f) => {
            if f.len() != g.len() {
                return invalid("initial perturbation does not match the grid");
            }
            f.clone()
        }
    };
    // Remove the component along phi_1, then expand in the retained modes.
    let p1 = g.dot(&dec.psis[0], &field);
    let w_field: Vec<f64> = field.iter().zip(&dec.phis[0]).map(|(w, p)| w - p1 * p).collect();
    let mut w: Vec<f64> = (0..k).map(|m| g.dot(&dec.psis[m], &w_field)).collect();
    w[0] = 0.0;
    let mut rebuilt = vec![0.0; g.len()];
    for m in 1..k {
        rebuilt.iter_mut().zip(&dec.phis[m]).for_each(|(r, p)| *r += w[m] * p);
    }
    let w0_norm = g.norm(&w_field);
    let tail: Vec<f64> = w_field.iter().zip(&rebuilt).map(|(a, b)| a - b).collect();
    let tail_energy = if w0_norm > 0.0 {
        g.norm(&tail).powi(2) / (w0_norm * w0_norm)
    } else {
        0.0
    };
    if tail_energy > 0.01 {
        return invalid(format!(
            "{:.2}% of the initial energy lies beyond {k} modes",
            100.0 * tail_energy
        ));
    }
    let w_init = w.clone();

    let (lo, hi) = (zeta0.min(cache.xi_star), zeta0.max(cache.xi_star));
    let omega_sup = cache
        .knots
        .iter()
        .zip(&cache.data)
        .filter(|(x, _)| **x >= lo && **x <= hi)
        .map(|(_, d)| d.omega)
        .fold(cache.at(zeta0).omega, f64::max);
    let horizon = validity_horizon(omega_sup, w0_norm, 1.0);

    // State: w (k), zeta, log E_k (k).
    let n = 2 * k + 1;
    let rhs = |y: &[f64], lin: &[f64]| -> Vec<f64> {
        let md = cache.at(y[k]);
        let wv = &y[..k];
        let s: f64 = md.c.iter().zip(wv).map(|(c, w)| c * w).sum();
        let mut out = vec![0.0; n];
        for m in 0..k {
            let mut aw = 0.0;
            let mut pw = 0.0;
            for j in 0..k {
                aw += md.a[m * k + j] * wv[j];
                pw += md.p[m * k + j] * wv[j];
            }
            out[m] = (md.lambdas[m] - lin[m]) * wv[m] + md.forcing[m] - md.theta * (aw + s * pw);
        }
        // the first mode is held at zero by the projection
        out[0] = 0.0;
        out[k] = md.theta * (1.0 + s);
        for m in 0..k {
            out[k + 1 + m] = md.lambdas[m];
        }
        out
    };
    let norm_of = |coef: &[f64], gram: &[f64]| -> f64 {
        let mut s = 0.0;
        for a in 0..k {
            for b in 0..k {
                s += coef[a] * gram[a * k + b] * coef[b];
            }
        }
        s.max(0.0).sqrt()
    };
    let record = |t: f64, y: &[f64], states: &mut Vec<QuasiLinearState>| {
        let md = cache.at(y[k]);
        let mut z = vec![0.0; k];
        for m in 1..k {
            z[m] = w_init[m] * y[k + 1 + m].exp();
        }
        let diff: Vec<f64> = y[..k].iter().zip(&z).map(|(a, b)| a - b).collect();
        let e1 = y[k + 1].exp();
        states.push(QuasiLinearState {
            t,
            zeta: y[k],
            theta: md.theta,
            w_coeffs: y[..k].to_vec(),
            w_norm: norm_of(&y[..k], &md.gram),
            z_norm: norm_of(&z, &md.gram),
            remainder: norm_of(&diff, &md.gram),
            bound_rhs: omega_sup * (e1 * e1 * w0_norm * w0_norm + 1.0),
            log_e: y[k + 1..].to_vec(),
            w1: md.psi1_phi.iter().zip(&y[..k]).map(|(p, w)| p * w).sum(),
            coupling: md.c.iter().zip(&y[..k]).map(|(c, w)| c * w).sum(),
        });
    };

    let mut y = vec![0.0; n];
    y[..k].copy_from_slice(&w);
    y[k] = zeta0;
    let mut t = 0.0;
    let mut states = Vec::new();
    record(t, &y, &mut states);
    let fastest = cache.at(zeta0).lambdas.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let mut dt = 0.05 / fastest;
    let mut gap_constant = f64::INFINITY;
    while t < opts.t_end {
        let md = cache.at(y[k]);
        gap_constant = gap_constant.min(
            (1..k)
                .map(|m| (md.lambdas[0] - md.lambdas[m]) / ((m + 1) as f64).powi(2))
                .fold(f64::INFINITY, f64::min),
        );
        let dist = (y[k] - cache.xi_star).abs();
        if dist <= opts.stop_distance && t >= horizon.t {
            break;
        }
        let mut h = dt;
        if md.theta != 0.0 {
            h = h.min(0.02 * dist.min(epsilon).max(1e-300) / md.theta.abs());
        }
        h = h.min(opts.t_end - t);
        let mut lin = vec![0.0; n];
        lin[1..k].copy_from_slice(&md.lambdas[1..k]);
        y = etdrk4_step(&y, h, &lin, |v| rhs(v, &lin));
        t += h;
        if y.iter().any(|v| !v.is_finite()) {
            return numerical("quasi-linear integration diverged");
        }
        record(t, &y, &mut states);
        dt *= 1.25;
    }
    let mut fitted_c: f64 = 0.0;
    let mut w1_max: f64 = 0.0;
    let mut domination_excess = f64::NEG_INFINITY;
    for s in &states {
        if s.t <= horizon.t && s.bound_rhs > 0.0 {
            fitted_c = fitted_c.max(s.remainder / s.bound_rhs);
        }
        w1_max = w1_max.max(s.w1.abs());
        for m in 1..k {
            let allowed = s.log_e[0] - gap_constant * ((m + 1) as f64).powi(2) * s.t;
            domination_excess = domination_excess.max(s.log_e[m] - allowed);
        }
    }
    Ok(QuasiLinearRun {
        states,
        report: RemainderReport {
            fitted_c,
            omega_sup,
            horizon,
            w1_max,
            tail_energy,
            modes: k,
            gap_constant,
            domination_excess,
        },
        xi_star: cache.xi_star,
    })
}

/// `(phi_1(z), f1, f2, f3)` of the Cox-Matthews scheme, by series near zero.
fn etd_coefficients(z: f64) -> (f64, f64, f64, f64) {
    if z.abs() < 0.5 {
        let mut fact = [1.0f64; 24];
        for i in 1..24 {
            fact[i] = fact[i - 1] * i as f64;
        }
        let (mut p1, mut f1, mut f2, mut f3) = (0.0, 0.0, 0.0, 0.0);
        let mut zp = 1.0;
        for j in 0..18 {
            p1 += zp / fact[j + 1];
            let n = j + 3;
            f1 += zp * (4.0 / fact[n] - 3.0 / fact[n - 1] + 1.0 / fact[n - 2]);
            f2 += zp * (-2.0 / fact[n] + 1.0 / fact[n - 1]);
            f3 += zp * (4.0 / fact[n] - 1.0 / fact[n - 1]);
            zp *= z;
        }
        (p1, f1, f2, f3)
    } else {
        let e = z.exp();
        let z3 = z * z * z;
        (
            (e - 1.0) / z,
            (-4.0 - z + e * (4.0 - 3.0 * z + z * z)) / z3,
            (2.0 + z + e * (z - 2.0)) / z3,
            (-4.0 - 3.0 * z - z * z + e * (4.0 - z)) / z3,
        )
    }
}

/// `phi` coefficients at `z`, `exp(z/2)`, and the first coefficient at `z/2`.
type EtdCoefficients = ((f64, f64, f64, f64), f64, f64);

/// One ETDRK4 step for `y' = lin * y + N(y)` with diagonal `lin`.
fn etdrk4_step(y: &[f64], h: f64, lin: &[f64], mut nonlin: impl FnMut(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let n = y.len();
    let coef: Vec<EtdCoefficients> = lin
        .iter()
        .map(|&l| {
            let z = l * h;
            (etd_coefficients(z), (0.5 * z).exp(), etd_coefficients(0.5 * z).0)
        })
        .collect();
    let nu = nonlin(y);
    let a: Vec<f64> = (0..n).map(|i| coef[i].1 * y[i] + 0.5 * h * coef[i].2 * nu[i]).collect();
    let na = nonlin(&a);
    let b: Vec<f64> = (0..n).map(|i| coef[i].1 * y[i] + 0.5 * h * coef[i].2 * na[i]).collect();
    let nb = nonlin(&b);
    let c: Vec<f64> = (0..n)
        .map(|i| coef[i].1 * a[i] + 0.5 * h * coef[i].2 * (2.0 * nb[i] - nu[i]))
        .collect();
    let nc = nonlin(&c);
    (0..n)
        .map(|i| {
            let ((_, f1, f2, f3), e_half, _) = coef[i];
            e_half * e_half * y[i] + h * (f1 * nu[i] + 2.0 * f2 * (na[i] + nb[i]) + f3 * nc[i])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_values() {
        let h = validity_horizon(1e-4, 0.0, 1.0);
        assert!((h.t - 1e4 * (1e4f64).ln()).abs() < 1e-6);
        assert!(!h.degenerate);
        let d = validity_horizon(2.0, 0.0, 1.0);
        assert!(d.degenerate && d.t == 0.0);
    }

    #[test]
    fn etd_series_matches_direct_form() {
        for z in [-0.49, -0.2, 0.3] {
            let s = etd_coefficients(z);
            let e = z.exp();
            let z3 = z * z * z;
            let f1 = (-4.0 - z + e * (4.0 - 3.0 * z + z * z)) / z3;
            assert!((s.0 - (e - 1.0) / z).abs() < 1e-13 && (s.1 - f1).abs() < 1e-10);
        }
        let s = etd_coefficients(0.0);
        assert!((s.1 - 1.0 / 6.0).abs() < 1e-16 && (s.2 - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn etdrk4_forced_decay() {
        // y' = -50 y + 1 has the exact solution (y0 - 1/50) e^{-50 t} + 1/50
        let lin = [-50.0];
        let mut y = vec![1.0];
        for _ in 0..10 {
            y = etdrk4_step(&y, 0.1, &lin, |_| vec![1.0]);
        }
        let exact = (1.0 - 0.02) * (-50.0f64).exp() + 0.02;
        assert!((y[0] - exact).abs() < 1e-14);
    }

    #[test]
    fn knots_contain_equilibrium() {
        let ks = knots_with(-0.1, 0.4, 11, 0.013);
        assert!(ks.contains(&0.013));
        assert!(ks.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn closed_forms_are_odd() {
        let b = FluxModel::make_burgers(1.0).unwrap();
        let a = FluxModel::make_abs(1.0).unwrap();
        for m in [&b, &a] {
            let p = theta_closed_form(m, 0.2, 0.1, 1.0).unwrap();
            let q = theta_closed_form(m, -0.2, 0.1, 1.0).unwrap();
            assert!(p < 0.0 && (p + q).abs() < 1e-15);
        }
    }
}
