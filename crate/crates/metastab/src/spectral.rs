//! Spectrum of the linearization `L v = eps v'' - (a v)'` about a profile.
//!
//! `L` is discretized in conservative form and symmetrized exactly by a
//! diagonal similarity, giving the symmetric operator `M = eps S` whose
//! eigenvalues are `mu = eps lambda`. The similarity weights are the
//! discrete analogue of `exp((1/2eps) int a)`.

use crate::error::{invalid, numerical, Result};
use crate::flux::FluxModel;
use crate::grid::Grid;
use crate::manifold::{self, MatchedProfile};
use crate::numerics::roots;
use crate::numerics::tridiag::SymTridiag;

/// Linear coefficient `a` on nodes and on the faces between them.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub grid: Grid,
    pub a_nodes: Vec<f64>,
    pub a_faces: Vec<f64>,
    pub xi: f64,
    pub epsilon: f64,
}

/// Piecewise-constant coefficient `a_minus` on `(-alpha, 0)`, `a_plus` on `(0, beta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOperatorSpec {
    pub a_minus: f64,
    pub a_plus: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl StepOperatorSpec {
    /// Limit coefficient of a layer at `xi` on `(-ell, ell)`.
    pub fn for_layer(model: &FluxModel, xi: f64, epsilon: f64, ell: f64) -> Self {
        Self {
            a_minus: model.df(model.u_minus),
            a_plus: model.df(model.u_plus),
            alpha: ell + xi,
            beta: ell - xi,
            epsilon,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.a_plus < 0.0 && self.a_minus > 0.0) {
            return invalid("step operator needs a_plus < 0 < a_minus");
        }
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.epsilon > 0.0) {
            return invalid("step operator needs alpha, beta, eps > 0");
        }
        Ok(())
    }
}

impl CoefficientField {
    /// `a = f'(U)` from a matched profile; face values average the nodes.
    pub fn from_profile(model: &FluxModel, profile: &MatchedProfile) -> Self {
        let a_nodes: Vec<f64> = profile.u_values.iter().map(|&u| model.df(u)).collect();
        let a_faces = a_nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Self {
            grid: profile.grid.clone(),
            a_nodes,
            a_faces,
            xi: profile.xi,
            epsilon: profile.epsilon,
        }
    }

    /// Step coefficient with exact cell averages on the faces.
    pub fn step(spec: &StepOperatorSpec, grid: &Grid) -> Result<Self> {
        spec.validate()?;
        let ell = grid.ell();
        let xi = spec.alpha - ell;
        if ((spec.alpha + spec.beta) - 2.0 * ell).abs() > 1e-12 * ell {
            return invalid("alpha + beta must equal the grid length");
        }
        let at = |x: f64| if x < xi { spec.a_minus } else { spec.a_plus };
        let a_nodes = grid.x.iter().map(|&x| at(x)).collect();
        let a_faces = grid
            .x
            .windows(2)
            .map(|w| {
                if w[1] <= xi {
                    spec.a_minus
                } else if w[0] >= xi {
                    spec.a_plus
                } else {
                    (spec.a_minus * (xi - w[0]) + spec.a_plus * (w[1] - xi)) / (w[1] - w[0])
                }
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            a_nodes,
            a_faces,
            xi,
            epsilon: spec.epsilon,
        })
    }
}

/// Conservative `L` on interior nodes plus its symmetrization.
#[derive(Debug, Clone)]
pub struct Operator {
    pub field: CoefficientField,
    /// Row `i` couples interior node `i` to its neighbours.
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    /// `ln d_i` of the similarity `S = D^{-1} L D`.
    pub log_d: Vec<f64>,
    /// `M = eps S`.
    pub m: SymTridiag,
}

/// Assembles `L` and `M`, requiring at least `max(1024, ceil(64 ell / eps))` intervals.
pub fn assemble_operator(field: &CoefficientField) -> Result<Operator> {
    let need = Grid::required_intervals(field.grid.ell(), field.epsilon);
    if field.grid.intervals() < need {
        return invalid(format!(
            "grid under-resolved for eps = {}: {} intervals, need at least {need}",
            field.epsilon,
            field.grid.intervals()
        ));
    }
    assemble_operator_coarse(field)
}

/// Assembly that only requires cell Peclet numbers below one.
pub fn assemble_operator_coarse(field: &CoefficientField) -> Result<Operator> {
    let g = &field.grid;
    let eps = field.epsilon;
    let nn = g.len();
    if nn < 4 {
        return invalid("operator needs at least two interior nodes");
    }
    let h: Vec<f64> = g.x.windows(2).map(|w| w[1] - w[0]).collect();
    for (j, (&hj, &aj)) in h.iter().zip(&field.a_faces).enumerate() {
        if hj * aj.abs() >= 2.0 * eps {
            let need = (2.0 * g.ell() * aj.abs() / (2.0 * eps)).ceil() as usize + 1;
            return invalid(format!(
                "cell Peclet number at face {j} is {:.3} >= 1; need more than {need} intervals",
                hj * aj.abs() / (2.0 * eps)
            ));
        }
    }
    let n = nn - 2;
    let (mut sub, mut diag, mut sup) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        let i = k + 1;
        let (hl, hr) = (h[i - 1], h[i]);
        let (al, ar) = (field.a_faces[i - 1], field.a_faces[i]);
        let w = g.w[i];
        sup[k] = (eps / hr - 0.5 * ar) / w;
        sub[k] = (eps / hl + 0.5 * al) / w;
        diag[k] = (-eps / hr - eps / hl - 0.5 * ar + 0.5 * al) / w;
    }
    let mut log_d = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    for k in 0..n - 1 {
        log_d[k + 1] = log_d[k] + 0.5 * (sub[k + 1] / sup[k]).ln();
        off[k] = eps * (sup[k] * sub[k + 1]).sqrt();
    }
    let m = SymTridiag::new(diag.iter().map(|d| eps * d).collect(), off)?;
    Ok(Operator {
        field: field.clone(),
        sub,
        diag,
        sup,
        log_d,
        m,
    })
}

impl Operator {
    /// `L u` on interior nodes for a full-grid field with zero boundary values.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut out = vec![0.0; n + 2];
        for k in 0..n {
            let i = k + 1;
            out[i] = self.sub[k] * u[i - 1] + self.diag[k] * u[i] + self.sup[k] * u[i + 1];
        }
        out
    }

    /// `L^* u` with respect to the grid pairing.
    pub fn apply_adjoint(&self, u: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let w = &self.field.grid.w;
        let mut out = vec![0.0; n + 2];
        for k in 0..n {
            let i = k + 1;
            let mut s = self.diag[k] * w[i] * u[i];
            if k > 0 {
                s += self.sup[k - 1] * w[i - 1] * u[i - 1];
            }
            if k + 1 < n {
                s += self.sub[k + 1] * w[i + 1] * u[i + 1];
            }
            out[i] = s / w[i];
        }
        out
    }
}

/// Eigenvalues in decreasing order with biorthonormal eigenfunctions.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub grid: Grid,
    pub xi: f64,
    pub epsilon: f64,
    pub lambdas: Vec<f64>,
    pub phis: Vec<Vec<f64>>,
    pub psis: Vec<Vec<f64>>,
    /// `<psi_1, d_xi U>` before rescaling (1 when no profile derivative was given).
    pub normalization: f64,
    /// `max |<psi_j, phi_k> - delta_jk|`.
    pub biorth_defect: f64,
}

/// Largest `n_modes` eigenpairs. With `dxi_u`, `psi_1` is scaled so that
/// `<psi_1, d_xi U> = 1`; other modes carry unit-norm `phi_k`.
pub fn eigensolve(op: &Operator, n_modes: usize, dxi_u: Option<&[f64]>) -> Result<SpectralDecomposition> {
    let g = &op.field.grid;
    let eps = op.field.epsilon;
    let n = op.diag.len();
    if n_modes == 0 || n_modes > n {
        return invalid(format!("requested {n_modes} modes from an operator of size {n}"));
    }
    let mus = op.m.top_eigenvalues(n_modes);
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(n_modes);
    let mut phis = Vec::with_capacity(n_modes);
    let mut psis = Vec::with_capacity(n_modes);
    let dmax = op.log_d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dmin = op.log_d.iter().cloned().fold(f64::INFINITY, f64::min);
    for &mu in &mus {
        let v = op.m.eigenvector(mu, &vs);
        let mut phi = vec![0.0; n + 2];
        let mut psi = vec![0.0; n + 2];
        for k in 0..n {
            phi[k + 1] = v[k] * (op.log_d[k] - dmax).exp();
            psi[k + 1] = v[k] * (dmin - op.log_d[k]).exp() / g.w[k + 1];
        }
        normalize_max(&mut phi);
        normalize_max(&mut psi);
        let s = g.dot(&psi, &phi);
        if s == 0.0 || !s.is_finite() {
            return numerical("degenerate eigenvector pairing");
        }
        psi.iter_mut().for_each(|p| *p /= s);
        vs.push(v);
        phis.push(phi);
        psis.push(psi);
    }
    // Leading mode: positive phi_1, optional profile normalization.
    if phis[0].iter().sum::<f64>() < 0.0 {
        phis[0].iter_mut().for_each(|p| *p = -*p);
        psis[0].iter_mut().for_each(|p| *p = -*p);
    }
    let mut normalization = 1.0;
    if let Some(d) = dxi_u {
        let c = g.dot(&psis[0], d);
        if !(c > 0.0) {
            return numerical(format!("<psi_1, d_xi U> = {c} is not positive"));
        }
        psis[0].iter_mut().for_each(|p| *p /= c);
        phis[0].iter_mut().for_each(|p| *p *= c);
        normalization = c;
    }
    for k in 1..n_modes {
        let nrm = g.norm(&phis[k]);
        let lead = phis[k].iter().find(|p| p.abs() > 1e-3).copied().unwrap_or(1.0);
        let s = lead.signum() / nrm;
        phis[k].iter_mut().for_each(|p| *p *= s);
        psis[k].iter_mut().for_each(|p| *p /= s);
    }
    let mut defect: f64 = 0.0;
    for j in 0..n_modes {
        for k in 0..n_modes {
            let target = if j == k { 1.0 } else { 0.0 };
            defect = defect.max((g.dot(&psis[j], &phis[k]) - target).abs());
        }
    }
    Ok(SpectralDecomposition {
        grid: g.clone(),
        xi: op.field.xi,
        epsilon: eps,
        lambdas: mus.iter().map(|m| m / eps).collect(),
        phis,
        psis,
        normalization,
        biorth_defect: defect,
    })
}

fn normalize_max(v: &mut [f64]) {
    let m = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if m > 0.0 {
        v.iter_mut().for_each(|x| *x /= m);
    }
}

impl SpectralDecomposition {
    /// Flips modes `k >= 2` so that `<psi_k^ref, phi_k> > 0`.
    pub fn align_signs(&mut self, reference: &SpectralDecomposition) {
        for k in 1..self.lambdas.len().min(reference.lambdas.len()) {
            if self.grid.dot(&reference.psis[k], &self.phis[k]) < 0.0 {
                self.phis[k].iter_mut().for_each(|p| *p = -*p);
                self.psis[k].iter_mut().for_each(|p| *p = -*p);
            }
        }
    }

    /// Value of `psi_k` at an arbitrary point by linear interpolation.
    pub fn psi_at(&self, k: usize, x: f64) -> f64 {
        crate::numerics::interp::linear(&self.grid.x, &self.psis[k], x)
    }
}

/// Profile, coefficient field and decomposition at layer position `xi`.
#[derive(Debug, Clone)]
pub struct LayerSpectrum {
    pub profile: MatchedProfile,
    pub field: CoefficientField,
    pub decomposition: SpectralDecomposition,
}

pub fn layer_spectrum(
    model: &FluxModel,
    xi: f64,
    epsilon: f64,
    ell: f64,
    n_modes: usize,
    grid: Option<Grid>,
) -> Result<LayerSpectrum> {
    let profile = manifold::build_profile(model, xi, epsilon, ell, grid, true)?;
    let field = CoefficientField::from_profile(model, &profile);
    let op = assemble_operator(&field)?;
    let decomposition = eigensolve(&op, n_modes, Some(&profile.dxi_values))?;
    Ok(LayerSpectrum {
        profile,
        field,
        decomposition,
    })
}

/// First-eigenvalue approximation for the step operator.
pub fn lambda1_asymptotic(spec: &StepOperatorSpec) -> f64 {
    let StepOperatorSpec {
        a_minus: am,
        a_plus: ap,
        alpha,
        beta,
        epsilon: eps,
    } = *spec;
    -(ap * am / (ap - am)) / eps * (-ap * (ap * beta / eps).exp() + am * (-am * alpha / eps).exp())
}

/// `D(lambda) = mantissa * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledDeterminant {
    pub mantissa: f64,
    pub log_scale: f64,
    /// Largest of the four scaled terms, for cancellation checks.
    pub largest_term: f64,
}

impl ScaledDeterminant {
    pub fn value(&self) -> f64 {
        self.mantissa * self.log_scale.exp()
    }
}

/// Transmission determinant of the step operator, evaluated in log space.
/// Defined for `lambda > -min(a^2) / (4 eps)`.
pub fn step_determinant(spec: &StepOperatorSpec, lambda: f64) -> Result<ScaledDeterminant> {
    spec.validate()?;
    let StepOperatorSpec {
        a_minus: am,
        a_plus: ap,
        alpha,
        beta,
        epsilon: eps,
    } = *spec;
    let qm = am * am + 4.0 * eps * lambda;
    let qp = ap * ap + 4.0 * eps * lambda;
    if !(qm > 0.0 && qp > 0.0) {
        return invalid(format!("lambda = {lambda} below the real-discriminant window"));
    }
    let (dm, dp) = (qm.sqrt(), qp.sqrt());
    let four_el = 4.0 * eps * lambda;
    // Cancellation-free forms with a_plus < 0 < a_minus.
    let dm_minus_am = four_el / (dm + am); // Delta_- - |a_-|
    let dp_minus_ap = four_el / (dp - ap); // Delta_+ - |a_+|
    let jump_a = ap - am;
    let c_pp = -(jump_a - (dp - dm));
    let c_pm = dp_minus_ap + dm_minus_am; // [a] + {Delta}
    let c_mp = jump_a - (dp + dm);
    let c_mm = -(jump_a + (dp - dm));
    // Exponents: mu_-^{+-} alpha and -mu_+^{+-} beta.
    let e_mp = (am + dm) * alpha / (2.0 * eps);
    let e_mm = -dm_minus_am * alpha / (2.0 * eps);
    let e_pp = -dp_minus_ap * beta / (2.0 * eps);
    let e_pm = -(ap - dp) * beta / (2.0 * eps);
    let terms = [
        (c_pp, e_mp + e_pp),
        (c_pm, e_mp + e_pm),
        (c_mp, e_mm + e_pp),
        (c_mm, e_mm + e_pm),
    ];
    let emax = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let mut mantissa = 0.0;
    let mut largest: f64 = 0.0;
    for (c, e) in terms {
        let t = c * (e - emax).exp();
        mantissa += t;
        largest = largest.max(t.abs());
    }
    Ok(ScaledDeterminant {
        mantissa,
        log_scale: emax,
        largest_term: largest,
    })
}

/// Real characteristic function valid for every `lambda`; on the window of
/// [`step_determinant`] it differs from `D` by a positive factor times
/// `Delta_+ Delta_-`. Returned up to a positive scale.
pub fn step_characteristic(spec: &StepOperatorSpec, lambda: f64) -> f64 {
    let StepOperatorSpec {
        a_minus: am,
        a_plus: ap,
        alpha,
        beta,
        epsilon: eps,
    } = *spec;
    let branch = |a: f64, len: f64| -> (f64, f64, f64) {
        let q = a * a + 4.0 * eps * lambda;
        if q > 0.0 {
            let d = q.sqrt();
            let z = d * len;
            let r = (-2.0 * z).exp();
            ((1.0 - r) / (2.0 * d), 0.5 * (1.0 + r), z)
        } else if q < 0.0 {
            let w = (-q).sqrt();
            ((w * len).sin() / w, (w * len).cos(), 0.0)
        } else {
            (len, 1.0, 0.0)
        }
    };
    let (shm, chm, _) = branch(am, alpha / (2.0 * eps));
    let (shp, chp, _) = branch(ap, beta / (2.0 * eps));
    shm * chp + shp * chm + (ap - am) * shp * shm
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepEigenvalues {
    /// Roots in decreasing order.
    pub values: Vec<f64>,
    /// Fewer than the requested number of roots were found.
    pub partial: bool,
}

const LOG_SCAN_POINTS: usize = 1_000_000;

/// The `n` largest eigenvalues of the step operator.
///
/// Roots above `-min(a^2)/(4 eps)` come from a sign scan of `D` on a
/// logarithmic grid; deeper roots from a linear scan of the real
/// characteristic function.
pub fn step_eigenvalues(spec: &StepOperatorSpec, n: usize) -> Result<StepEigenvalues> {
    spec.validate()?;
    let eps = spec.epsilon;
    let amin2 = spec.a_minus.powi(2).min(spec.a_plus.powi(2));
    let window = -amin2 / (4.0 * eps) * 0.99;
    let (la, lb) = ((1e-30f64).ln(), (-window).ln());
    let mut values = Vec::new();
    let sign_d = |l: f64| step_determinant(spec, l).map(|d| d.mantissa).unwrap_or(f64::NAN);
    let mut prev_l = -(la.exp());
    let mut prev = sign_d(prev_l);
    for j in 1..=LOG_SCAN_POINTS {
        if values.len() >= n {
            break;
        }
        let l = -((la + (lb - la) * j as f64 / LOG_SCAN_POINTS as f64).exp());
        let cur = sign_d(l);
        if cur == 0.0 {
            values.push(l);
        } else if cur.signum() != prev.signum() && prev != 0.0 {
            values.push(bisect(&sign_d, l, prev_l, cur, prev)?);
        }
        prev = cur;
        prev_l = l;
    }
    if values.len() < n {
        let char_fn = |l: f64| step_characteristic(spec, l);
        let length = spec.alpha + spec.beta;
        let step = eps * (std::f64::consts::PI / length).powi(2) / 16.0;
        let amax2 = spec.a_minus.powi(2).max(spec.a_plus.powi(2));
        let floor = -amax2 / eps - 4.0 * eps * ((n as f64 + 2.0) * std::f64::consts::PI / length).powi(2);
        let mut l0 = window;
        let mut f0 = char_fn(l0);
        while values.len() < n && l0 > floor {
            let l1 = l0 - step;
            let f1 = char_fn(l1);
            if f1 == 0.0 {
                values.push(l1);
            } else if f0 != 0.0 && f1.signum() != f0.signum() {
                values.push(bisect(&char_fn, l1, l0, f1, f0)?);
            }
            l0 = l1;
            f0 = f1;
        }
    }
    let partial = values.len() < n;
    values.truncate(n);
    Ok(StepEigenvalues { values, partial })
}

fn bisect<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fb: f64) -> Result<f64> {
    let br = roots::Bracket { a, b, fa, fb };
    roots::solve(f, br, 1e-14, 1e-300)
}

/// Structural hypotheses on `a` and on `b = a^2/4 + eps a'/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    /// `|a|_inf + eps |a'|_inf`.
    pub a0_bound: f64,
    /// `a > 0, a' <= 0, a'' <= 0` left of `xi` and `a < 0, a' <= 0, a'' >= 0` right of it.
    pub a1_sign_pattern: bool,
    /// `max |a - a^0| / eps` at distance `>= margin` from `xi`.
    pub a2_constant: f64,
    /// `eps |a'|` next to `xi` (left, right).
    pub a3_slopes: (f64, f64),
    /// `b + eps lambda_1` nonincreasing then nondecreasing.
    pub b1_unimodal: bool,
    /// Minimum of `b + eps lambda_1` at distance `>= margin` from `xi`.
    pub b2_min_away: f64,
    /// `b + eps lambda_1` next to `xi` (left, right).
    pub b3_at_xi: (f64, f64),
    /// `max |y_pm - xi| / eps` over the zeros of `b + eps lambda_1`.
    pub zero_offset: f64,
}

impl HypothesisReport {
    pub fn holds(&self) -> bool {
        self.a1_sign_pattern
            && self.a3_slopes.0 > 0.0
            && self.a3_slopes.1 > 0.0
            && self.b1_unimodal
            && self.b2_min_away > 0.0
            && self.b3_at_xi.0 < 0.0
            && self.b3_at_xi.1 < 0.0
    }
}

pub fn hypothesis_check(model: &FluxModel, field: &CoefficientField, lambda1: f64) -> HypothesisReport {
    let g = &field.grid;
    let eps = field.epsilon;
    let xi = field.xi;
    let x = &g.x;
    let a = &field.a_nodes;
    let n = x.len();
    let d1 = |v: &[f64], i: usize| (v[i + 1] - v[i - 1]) / (x[i + 1] - x[i - 1]);
    let da: Vec<f64> = (0..n)
        .map(|i| if i == 0 || i == n - 1 { f64::NAN } else { d1(a, i) })
        .collect();
    let d2a: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                f64::NAN
            } else {
                let (hl, hr) = (x[i] - x[i - 1], x[i + 1] - x[i]);
                2.0 * (a[i + 1] * hl - a[i] * (hl + hr) + a[i - 1] * hr) / (hl * hr * (hl + hr))
            }
        })
        .collect();
    let ell = g.ell();
    let delta = manifold::margin(eps, ell);
    let amax = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let damax = da.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
    let tol_d = 1e-6 * damax;
    let mut sign_ok = true;
    let near = |xx: f64| (xx - xi).abs() <= 2.0 * g.max_spacing();
    for i in 1..n - 1 {
        if near(x[i]) {
            continue;
        }
        let left = x[i] < xi;
        let s = if left { 1.0 } else { -1.0 };
        if s * a[i] <= 0.0 || da[i] > tol_d {
            sign_ok = false;
        }
        // Curvature sign, ignoring roundoff-level noise in flat regions.
        if s * d2a[i] > 1e-6 * damax / eps.max(1e-300) {
            sign_ok = false;
        }
    }
    let a0m = model.df(model.u_minus);
    let a0p = model.df(model.u_plus);
    let mut a2: f64 = 0.0;
    for i in 0..n {
        if (x[i] - xi).abs() >= delta {
            let a0 = if x[i] < xi { a0m } else { a0p };
            a2 = a2.max((a[i] - a0).abs() / eps);
        }
    }
    let il = (1..n - 1).rev().find(|&i| x[i] < xi).unwrap_or(1);
    let ir = (1..n - 1).find(|&i| x[i] > xi).unwrap_or(n - 2);
    let b: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                f64::NAN
            } else {
                0.25 * a[i] * a[i] + 0.5 * eps * da[i] + eps * lambda1
            }
        })
        .collect();
    let bscale = b.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut unimodal = true;
    for i in 1..n - 2 {
        let db = b[i + 1] - b[i];
        if x[i + 1] <= xi && db > 1e-9 * bscale {
            unimodal = false;
        }
        if x[i] >= xi && db < -1e-9 * bscale {
            unimodal = false;
        }
    }
    let b2 = (1..n - 1)
        .filter(|&i| (x[i] - xi).abs() >= delta)
        .map(|i| b[i])
        .fold(f64::INFINITY, f64::min);
    let mut offset: f64 = 0.0;
    for i in 1..n - 2 {
        if b[i].signum() != b[i + 1].signum() {
            let y = x[i] + (x[i + 1] - x[i]) * b[i] / (b[i] - b[i + 1]);
            offset = offset.max((y - xi).abs() / eps);
        }
    }
    HypothesisReport {
        a0_bound: amax + eps * damax,
        a1_sign_pattern: sign_ok,
        a2_constant: a2,
        a3_slopes: (eps * da[il].abs(), eps * da[ir].abs()),
        b1_unimodal: unimodal,
        b2_min_away: b2,
        b3_at_xi: (b[il], b[ir]),
        zero_offset: offset,
    }
}

/// Ratio `Omega / |lambda_1|` at layer position `xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaRatio {
    /// `|kappa_minus - kappa_plus|`, the mass of the residual.
    pub omega: f64,
    pub lambda1: f64,
    pub ratio: f64,
    /// `4 |tanh(u_minus xi / eps)|`, the step-coefficient prediction.
    pub predicted: f64,
    /// `lambda_1` was below working precision and the asymptotic value was used.
    pub fallback: bool,
}

pub fn meta_ratio(model: &FluxModel, xi: f64, epsilon: f64, ell: f64) -> Result<MetaRatio> {
    let ls = layer_spectrum(model, xi, epsilon, ell, 1, None)?;
    let op_norm = assemble_operator(&ls.field)?.m.norm_bound() / epsilon;
    let omega = manifold::residual(model, &ls.profile).omega;
    let mut lambda1 = ls.decomposition.lambdas[0];
    let fallback = lambda1.abs() < 1e3 * f64::EPSILON * op_norm;
    if fallback {
        lambda1 = lambda1_asymptotic(&StepOperatorSpec::for_layer(model, xi, epsilon, ell));
    }
    Ok(MetaRatio {
        omega,
        lambda1,
        ratio: omega / lambda1.abs(),
        predicted: 4.0 * (model.u_minus * xi / epsilon).tanh().abs(),
        fallback,
    })
}

/// Eigenfunctions at `xi` with their `xi`-derivatives by centred differences.
#[derive(Debug, Clone)]
pub struct XiDerivatives {
    pub spectrum: LayerSpectrum,
    pub dphi: Vec<Vec<f64>>,
    pub dpsi: Vec<Vec<f64>>,
}

/// Step of the centred differences in `xi`, relative to `eps`.
pub const DXI_STEP: f64 = 0.0005;

pub fn xi_derivatives(
    model: &FluxModel,
    xi: f64,
    epsilon: f64,
    ell: f64,
    n_modes: usize,
    grid: &Grid,
) -> Result<XiDerivatives> {
    let h = DXI_STEP * epsilon;
    let spectrum = layer_spectrum(model, xi, epsilon, ell, n_modes, Some(grid.clone()))?;
    let mut up = layer_spectrum(model, xi + h, epsilon, ell, n_modes, Some(grid.clone()))?.decomposition;
    let mut dn = layer_spectrum(model, xi - h, epsilon, ell, n_modes, Some(grid.clone()))?.decomposition;
    up.align_signs(&spectrum.decomposition);
    dn.align_signs(&spectrum.decomposition);
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| (p - q) / (2.0 * h)).collect() };
    let dphi = (0..n_modes).map(|j| diff(&up.phis[j], &dn.phis[j])).collect();
    let dpsi = (0..n_modes).map(|j| diff(&up.psis[j], &dn.psis[j])).collect();
    Ok(XiDerivatives { spectrum, dphi, dpsi })
}

impl XiDerivatives {
    fn modes(&self) -> usize {
        self.dphi.len()
    }

    /// `<d_xi psi_m, phi_j>`.
    pub fn dpsi_phi(&self, m: usize, j: usize) -> f64 {
        self.spectrum
            .decomposition
            .grid
            .dot(&self.dpsi[m], &self.spectrum.decomposition.phis[j])
    }

    /// `<psi_m, d_xi phi_j>`.
    pub fn psi_dphi(&self, m: usize, j: usize) -> f64 {
        self.spectrum
            .decomposition
            .grid
            .dot(&self.spectrum.decomposition.psis[m], &self.dphi[j])
    }

    /// Largest `|<d psi_j, phi_k> + <psi_j, d phi_k>|`, relative to the largest pairing.
    pub fn identity_defect(&self) -> f64 {
        let k = self.modes();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for m in 0..k {
            for j in 0..k {
                let (a, b) = (self.dpsi_phi(m, j), self.psi_dphi(m, j));
                worst = worst.max((a + b).abs());
                scale = scale.max(a.abs()).max(b.abs());
            }
        }
        worst / scale
    }

    /// `sum_j <d_xi psi_k, phi_j>^2` over the retained modes, per `k`.
    pub fn h3_sums(&self) -> Vec<f64> {
        let k = self.modes();
        (0..k)
            .map(|m| (0..k).map(|j| self.dpsi_phi(m, j).powi(2)).sum())
            .collect()
    }
}

/// Largest `C` with `lambda_k <= -C k^2` for `k = 2..`.
pub fn h2_constant(lambdas: &[f64]) -> f64 {
    lambdas
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, l)| -l / ((i + 1) as f64).powi(2))
        .fold(f64::INFINITY, f64::min)
}

/// Upper bounds on `|mu_1|` from the test function `psi_0 - K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstEigenvalueBound {
    /// `eps |lambda_1|`.
    pub mu1: f64,
    /// `|M psi| / |psi|` with the discrete operator.
    pub rayleigh: f64,
    /// `sup|b| |K| / (|psi_0| - |K|)`; infinite when `|psi_0| <= |K|`.
    pub chain: f64,
}

pub fn first_eigenvalue_bound(op: &Operator, lambda1: f64) -> FirstEigenvalueBound {
    let f = &op.field;
    let g = &f.grid;
    let eps = f.epsilon;
    let x = &g.x;
    let n = x.len();
    // ln psi_0 = (1/2 eps) int_xi^x a, by the trapezoid rule on faces
    let mut prim = vec![0.0; n];
    for i in 1..n {
        prim[i] = prim[i - 1] + f.a_faces[i - 1] * (x[i] - x[i - 1]);
    }
    let at_xi = crate::numerics::interp::linear(x, &prim, f.xi);
    let psi0: Vec<f64> = prim.iter().map(|p| ((p - at_xi) / (2.0 * eps)).exp()).collect();
    let ell = g.ell();
    let (pl, pr) = (psi0[0], psi0[n - 1]);
    let kk: Vec<f64> = x
        .iter()
        .map(|&xx| (pl * (ell - xx) + pr * (ell + xx)) / (2.0 * ell))
        .collect();
    let v: Vec<f64> = (1..n - 1).map(|i| (psi0[i] - kk[i]) * g.w[i].sqrt()).collect();
    let mv = op.m.apply(&v);
    let norm = |u: &[f64]| u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let rayleigh = norm(&mv) / norm(&v);
    let mut bmax: f64 = 0.0;
    for i in 1..n - 1 {
        let da = (f.a_nodes[i + 1] - f.a_nodes[i - 1]) / (x[i + 1] - x[i - 1]);
        bmax = bmax.max((0.25 * f.a_nodes[i].powi(2) + 0.5 * eps * da).abs());
    }
    let (np, nk) = (g.norm(&psi0), g.norm(&kk));
    let chain = if np > nk { bmax * nk / (np - nk) } else { f64::INFINITY };
    FirstEigenvalueBound {
        mu1: eps * lambda1.abs(),
        rayleigh,
        chain,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym_spec(eps: f64) -> StepOperatorSpec {
        StepOperatorSpec {
            a_minus: 1.0,
            a_plus: -1.0,
            alpha: 1.0,
            beta: 1.0,
            epsilon: eps,
        }
    }

    #[test]
    fn constant_coefficient_spectrum() {
        // a constant: lambda_k = -a^2/(4 eps) - eps (k pi / 2 ell)^2 up to O(h^2).
        let eps = 0.2;
        let a = 0.5;
        let g = Grid::uniform(1.0, 2000).unwrap();
        let field = CoefficientField {
            a_nodes: vec![a; g.len()],
            a_faces: vec![a; g.len() - 1],
            grid: g,
            xi: 0.0,
            epsilon: eps,
        };
        let op = assemble_operator(&field).unwrap();
        let dec = eigensolve(&op, 4, None).unwrap();
        for (k, l) in dec.lambdas.iter().enumerate() {
            let kk = (k + 1) as f64;
            let exact = -a * a / (4.0 * eps) - eps * (kk * std::f64::consts::PI / 2.0).powi(2);
            assert!((l - exact).abs() / exact.abs() < 1e-5, "{l} vs {exact}");
        }
        assert!(dec.biorth_defect < 1e-10);
    }

    #[test]
    fn adjoint_eigenfunction_is_eigenfunction() {
        let spec = sym_spec(0.1);
        let g = Grid::uniform(1.0, 1024).unwrap();
        let field = CoefficientField::step(&spec, &g).unwrap();
        let op = assemble_operator(&field).unwrap();
        let dec = eigensolve(&op, 3, None).unwrap();
        for k in 0..3 {
            let lp = op.apply(&dec.phis[k]);
            let la = op.apply_adjoint(&dec.psis[k]);
            let sp = dec.phis[k].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let sa = dec.psis[k].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 1..g.len() - 1 {
                assert!((lp[i] - dec.lambdas[k] * dec.phis[k][i]).abs() < 1e-7 * sp * 1e4);
                assert!((la[i] - dec.lambdas[k] * dec.psis[k][i]).abs() < 1e-7 * sa * 1e4);
            }
        }
    }

    #[test]
    fn determinant_roots_match_characteristic() {
        let spec = StepOperatorSpec {
            a_minus: 1.3,
            a_plus: -0.8,
            alpha: 1.2,
            beta: 0.8,
            epsilon: 0.15,
        };
        let mut prev: Option<(f64, f64)> = None;
        let top = -0.8f64.powi(2) / (4.0 * 0.15) * 0.99;
        for j in 0..4000 {
            let l = -1e-6 + top * j as f64 / 4000.0;
            let d = step_determinant(&spec, l).unwrap().mantissa;
            let g = step_characteristic(&spec, l);
            assert_eq!(
                d.signum() * g.signum(),
                prev.map_or(d.signum() * g.signum(), |p| p.0.signum() * p.1.signum())
            );
            prev = Some((d, g));
        }
    }

    #[test]
    fn step_first_root_near_asymptotic() {
        let spec = sym_spec(0.1);
        let ev = step_eigenvalues(&spec, 1).unwrap();
        let asym = lambda1_asymptotic(&spec);
        assert!(!ev.partial);
        assert!((ev.values[0] / asym - 1.0).abs() < 0.1);
    }

    #[test]
    fn grid_matches_step_oracle() {
        let spec = sym_spec(0.1);
        let g = Grid::uniform(1.0, 4000).unwrap();
        let op = assemble_operator(&CoefficientField::step(&spec, &g).unwrap()).unwrap();
        let dec = eigensolve(&op, 3, None).unwrap();
        let ev = step_eigenvalues(&spec, 3).unwrap();
        for k in 0..3 {
            assert!(
                (dec.lambdas[k] / ev.values[k] - 1.0).abs() < 1e-2,
                "k={k}: {} vs {}",
                dec.lambdas[k],
                ev.values[k]
            );
        }
    }

    #[test]
    fn under_resolved_grid_rejected() {
        let spec = sym_spec(0.01);
        let g = Grid::uniform(1.0, 1024).unwrap();
        let err = assemble_operator(&CoefficientField::step(&spec, &g).unwrap()).unwrap_err();
        assert!(format!("{err}").contains("6400"));
    }
}
