use metastab::flux::FluxModel;
use metastab::harness::fit_exponential;
use metastab::hyperbolic::{self, HyperbolicField};
use metastab::manifold;
use metastab::reduced;
use proptest::prelude::*;

fn burgers() -> FluxModel {
    FluxModel::make_burgers(1.0).unwrap()
}

fn quartic() -> FluxModel {
    FluxModel::make_convex(&[0.0, 0.0, 1.0, -1.0, 0.4], 1.0, -0.5).unwrap()
}

proptest! {
    #[test]
    fn quadratic_polynomial_is_burgers(u in -1.0f64..1.0) {
        let p = FluxModel::make_convex(&[0.0, 0.0, 0.5], 1.0, -1.0).unwrap();
        let b = burgers();
        prop_assert!((p.f(u) - b.f(u)).abs() <= 1e-14);
        prop_assert!((p.df(u) - b.df(u)).abs() <= 1e-14);
    }

    #[test]
    fn conjugate_is_an_involution(u in -0.5f64..1.0) {
        let q = quartic();
        let w = q.conjugate(u).unwrap();
        prop_assert!((q.f(w) - q.f(u)).abs() <= 1e-12);
        prop_assert!((q.conjugate(w).unwrap() - u).abs() <= 1e-9);
    }

    #[test]
    fn exact_lines_are_fitted_exactly(slope in -5.0f64..5.0, icpt in -3.0f64..3.0) {
        let xs = [1.0, 2.5, 4.0, 7.0, 9.0];
        let ys: Vec<f64> = xs.iter().map(|x| icpt + slope * x).collect();
        let fit = fit_exponential(&xs, &ys).unwrap();
        prop_assert!((fit.slope - slope).abs() <= 1e-12);
    }

    #[test]
    fn godunov_keeps_decreasing_data_in_range(mut vals in prop::collection::vec(-1.0f64..1.0, 40), steps in 1usize..60) {
        let b = burgers();
        vals.sort_by(|a, c| c.total_cmp(a));
        let mut f = HyperbolicField::new(1.0, vals).unwrap();
        let mut tv = f.total_variation(&b);
        for _ in 0..steps {
            let dt = hyperbolic::max_dt(&f, &b);
            f = hyperbolic::godunov_step(&f, &b, dt).unwrap();
            let next = f.total_variation(&b);
            prop_assert!(next <= tv + 1e-12, "{next} > {tv}");
            tv = next;
            prop_assert!(f.cells.iter().all(|u| (-1.0 - 1e-12..=1.0 + 1e-12).contains(u)));
        }
    }

    #[test]
    fn admissible_steps_are_fixed(cut in 1usize..99) {
        for m in [burgers(), quartic()] {
            let cells: Vec<f64> = (0..100).map(|i| if i < cut { m.u_minus } else { m.u_plus }).collect();
            let f = HyperbolicField::new(1.0, cells).unwrap();
            let g = hyperbolic::godunov_step(&f, &m, hyperbolic::max_dt(&f, &m)).unwrap();
            prop_assert_eq!(&g.cells, &f.cells);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn profiles_are_monotone_with_exact_boundary_values(xi in -0.5f64..0.5, eps in 0.05f64..0.2) {
        for m in [burgers(), quartic()] {
            let p = manifold::build_profile(&m, xi, eps, 1.0, None, false).unwrap();
            let u = &p.u_values;
            prop_assert_eq!(u[0], m.u_minus);
            prop_assert_eq!(u[u.len() - 1], m.u_plus);
            prop_assert!(u.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn burgers_drift_is_odd(xi in 0.05f64..0.45) {
        let b = burgers();
        let p = reduced::theta(&b, xi, 0.1, 1.0, None).unwrap().spectral;
        let q = reduced::theta(&b, -xi, 0.1, 1.0, None).unwrap().spectral;
        prop_assert!(p < 0.0);
        prop_assert!((p + q).abs() <= 1e-8 * p.abs(), "{p} {q}");
    }
}
