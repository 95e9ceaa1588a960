use metastab::flux::FluxModel;
use metastab::grid::Grid;
use metastab::spectral::{self, CoefficientField, StepOperatorSpec};
use nalgebra::DMatrix;

/// `(a_- - a_+)/2 = eps (k_- coth(k_- alpha) + k_+ coth(k_+ beta))`, `k = sqrt(a^2 + 4 eps lambda) / (2 eps)`.
fn secular(spec: &StepOperatorSpec, lambda: f64) -> f64 {
    let eps = spec.epsilon;
    let k = |a: f64| (a * a + 4.0 * eps * lambda).sqrt() / (2.0 * eps);
    let (km, kp) = (k(spec.a_minus), k(spec.a_plus));
    eps * (km / (km * spec.alpha).tanh() + kp / (kp * spec.beta).tanh()) - 0.5 * (spec.a_minus - spec.a_plus)
}

/// Top root by bisection on `(-min a^2 / 4 eps, 0)`; the secular function is increasing in `lambda`.
fn secular_root(spec: &StepOperatorSpec) -> f64 {
    let amin = spec.a_minus.abs().min(spec.a_plus.abs());
    let (mut lo, mut hi) = (-0.999 * amin * amin / (4.0 * spec.epsilon), 0.0);
    assert!(secular(spec, lo) < 0.0 && secular(spec, hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if secular(spec, mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn burgers() -> FluxModel {
    FluxModel::make_burgers(1.0).unwrap()
}

#[test]
fn step_roots_match_secular_equation() {
    let b = burgers();
    for (xi, eps) in [(0.0, 0.25), (0.0, 0.1), (0.3, 0.1), (-0.2, 0.15)] {
        let spec = StepOperatorSpec::for_layer(&b, xi, eps, 1.0);
        let oracle = secular_root(&spec);
        let lib = spectral::step_eigenvalues(&spec, 1).unwrap().values[0];
        assert!(
            ((lib - oracle) / oracle).abs() < 1e-8,
            "xi={xi} eps={eps}: {lib} vs {oracle}"
        );
        let grid = Grid::for_epsilon(1.0, eps).unwrap();
        let op = spectral::assemble_operator(&CoefficientField::step(&spec, &grid).unwrap()).unwrap();
        let g = spectral::eigensolve(&op, 1, None).unwrap().lambdas[0];
        assert!(((g - oracle) / oracle).abs() < 0.01, "grid {g} vs {oracle}");
    }
}

#[test]
fn frozen_step_eigenvalue() {
    let spec = StepOperatorSpec::for_layer(&burgers(), 0.0, 0.1, 1.0);
    let v = secular_root(&spec);
    assert!((v + 4.5437e-4).abs() < 1e-7, "{v}");
}

#[test]
fn symmetric_form_matches_dense_nonsymmetric_solve() {
    let b = burgers();
    let eps = 0.2;
    let grid = Grid::uniform(1.0, 200).unwrap();
    let profile = metastab::manifold::build_profile(&b, 0.1, eps, 1.0, Some(grid), false).unwrap();
    let op = spectral::assemble_operator_coarse(&CoefficientField::from_profile(&b, &profile)).unwrap();
    let n = op.diag.len();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        l[(k, k)] = op.diag[k];
        if k > 0 {
            l[(k, k - 1)] = op.sub[k];
        }
        if k + 1 < n {
            l[(k, k + 1)] = op.sup[k];
        }
    }
    let mut dense: Vec<f64> = l.complex_eigenvalues().iter().map(|z| z.re).collect();
    dense.sort_by(|a, b| b.total_cmp(a));
    let ours = spectral::eigensolve(&op, 2, None).unwrap().lambdas;
    for j in 0..2 {
        assert!(
            ((ours[j] - dense[j]) / dense[j]).abs() < 5e-3,
            "mode {j}: {} vs {}",
            ours[j],
            dense[j]
        );
    }
}

#[test]
fn biorthogonality_and_normalization() {
    let b = burgers();
    let ls = spectral::layer_spectrum(&b, 0.2, 0.1, 1.0, 6, None).unwrap();
    let d = &ls.decomposition;
    assert!(d.biorth_defect < 1e-8);
    let norm = d.grid.dot(&d.psis[0], &ls.profile.dxi_values);
    assert!((norm - 1.0).abs() < 1e-8);
}

#[test]
fn profile_derivative_carries_the_jump() {
    // int d_xi U dx = -(u_+ - u_-) up to the exponentially small boundary flux.
    let b = burgers();
    let eps = 0.02;
    let p = metastab::manifold::build_profile(&b, 0.1, eps, 1.0, None, true).unwrap();
    let ones = vec![1.0; p.grid.len()];
    let mass = p.grid.dot(&ones, &p.dxi_values);
    assert!((mass - 2.0).abs() < 0.04, "{mass}");
}

#[test]
fn second_eigenvalue_scales_like_one_over_eps() {
    let b = burgers();
    for eps in [0.1, 0.07] {
        let ls = spectral::layer_spectrum(&b, 0.0, eps, 1.0, 20, None).unwrap();
        let l = &ls.decomposition.lambdas;
        assert!(l[0] < 0.0 && l[1] < 0.0);
        assert!(spectral::h2_constant(l) > 0.0);
        assert!((l[1] / l[0]).abs() > 100.0);
    }
}

#[test]
fn rayleigh_quotient_bounds_first_eigenvalue() {
    let b = burgers();
    for (xi, eps) in [(0.0, 0.1), (0.3, 0.1), (0.2, 0.07)] {
        let ls = spectral::layer_spectrum(&b, xi, eps, 1.0, 1, None).unwrap();
        let op = spectral::assemble_operator(&ls.field).unwrap();
        let fb = spectral::first_eigenvalue_bound(&op, ls.decomposition.lambdas[0]);
        assert!(fb.rayleigh >= fb.mu1, "{fb:?}");
        assert!(fb.chain.is_finite() && fb.chain > 0.0);
    }
}

#[test]
fn derivative_identity_and_h3() {
    let b = burgers();
    let grid = Grid::for_epsilon(1.0, 0.1).unwrap();
    let d = spectral::xi_derivatives(&b, 0.2, 0.1, 1.0, 8, &grid).unwrap();
    assert!(d.identity_defect() < 1e-6, "{}", d.identity_defect());
    let h3 = d.h3_sums();
    assert!(h3.iter().all(|v| v.is_finite()) && h3.iter().cloned().fold(0.0, f64::max) < 1e4);
}

#[test]
fn asymmetric_flux_spectrum_negative() {
    let q = FluxModel::make_convex(&[0.0, 0.0, 1.0, -1.0, 0.4], 1.0, -0.5).unwrap();
    let ls = spectral::layer_spectrum(&q, 0.1, 0.1, 1.0, 3, None).unwrap();
    let l = &ls.decomposition.lambdas;
    assert!(l[0] < 0.0 && l[1] < l[0] && l[2] < l[1]);
}
