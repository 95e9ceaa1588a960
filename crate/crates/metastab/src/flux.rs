//! Convex flux models with a sonic point between the boundary states.
//!
//! Every model is normalized so that `f(u_star) = 0`.

use crate::error::{invalid, Result};
use crate::numerics::roots;

const CONVEXITY_SAMPLES: usize = 10_000;
const EQUAL_FLUX_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum FluxKind {
    /// Polynomial with coefficients lowest degree first (already shifted).
    Polynomial(Vec<f64>),
    /// `f(u) = |u|`; convex but not differentiable at the origin.
    Abs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxModel {
    pub kind: FluxKind,
    pub u_minus: f64,
    pub u_plus: f64,
    pub u_star: f64,
    pub c0: f64,
    pub name: String,
    /// `f(u_minus)` and `f(u_plus)`, kept separately.
    pub f_minus: f64,
    pub f_plus: f64,
}

/// One named invariant with its margin (positive means satisfied).
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxReport {
    pub checks: Vec<Check>,
}

impl FluxReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn horner(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * u + a)
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, a)| k as f64 * a).collect()
}

/// Taylor coefficients of the polynomial about `x0`.
fn taylor_shift(c: &[f64], x0: f64) -> Vec<f64> {
    let mut t = c.to_vec();
    let n = t.len();
    for k in 0..n {
        for j in (k..n - 1).rev() {
            t[j] += x0 * t[j + 1];
        }
    }
    t
}

/// Which boundary layer a quantity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Minus,
    Plus,
}

impl FluxModel {
    /// Burgers flux `u^2 / 2` with `u_plus = -u_minus`.
    pub fn make_burgers(u_minus: f64) -> Result<Self> {
        if !(u_minus > 0.0) || !u_minus.is_finite() {
            return invalid(format!("burgers flux needs u_minus > 0, got {u_minus}"));
        }
        let f = 0.5 * u_minus * u_minus;
        Ok(Self {
            kind: FluxKind::Polynomial(vec![0.0, 0.0, 0.5]),
            u_minus,
            u_plus: -u_minus,
            u_star: 0.0,
            c0: 1.0,
            name: "burgers".into(),
            f_minus: f,
            f_plus: f,
        })
    }

    /// `f(u) = |u|` with `u_plus = -u_minus`; `c0 = 0` flags the kink.
    pub fn make_abs(u_minus: f64) -> Result<Self> {
        if !(u_minus > 0.0) || !u_minus.is_finite() {
            return invalid(format!("abs flux needs u_minus > 0, got {u_minus}"));
        }
        Ok(Self {
            kind: FluxKind::Abs,
            u_minus,
            u_plus: -u_minus,
            u_star: 0.0,
            c0: 0.0,
            name: "abs".into(),
            f_minus: u_minus,
            f_plus: u_minus,
        })
    }

    /// General convex polynomial flux, shifted so that `f(u_star) = 0`.
    pub fn make_convex(coeffs: &[f64], u_minus: f64, u_plus: f64) -> Result<Self> {
        if coeffs.len() < 3 || coeffs.iter().any(|c| !c.is_finite()) {
            return invalid("polynomial flux needs at least a quadratic term");
        }
        if !(u_minus > u_plus) {
            return invalid(format!("need u_minus > u_plus, got {u_minus} <= {u_plus}"));
        }
        let dc = derivative(coeffs);
        let d2c = derivative(&dc);
        let mut c0 = f64::INFINITY;
        for k in 0..=CONVEXITY_SAMPLES {
            let u = u_plus + (u_minus - u_plus) * k as f64 / CONVEXITY_SAMPLES as f64;
            c0 = c0.min(horner(&d2c, u));
        }
        if !(c0 > 0.0) {
            return invalid(format!(
                "flux is not uniformly convex on [u_plus, u_minus]: min f'' = {c0}"
            ));
        }
        let (dp, dm) = (horner(&dc, u_plus), horner(&dc, u_minus));
        if !(dp < 0.0 && dm > 0.0) {
            return invalid(format!(
                "f' does not change sign on [u_plus, u_minus]: f'(u+) = {dp}, f'(u-) = {dm}"
            ));
        }
        let u_star = roots::find_root(|u| horner(&dc, u), u_plus, u_minus, Some((u_plus, u_minus)), 1e-15)
            .map_err(|e| crate::Error::Validation(format!("sonic point: {e}")))?;
        let shift = horner(coeffs, u_star);
        let mut c = coeffs.to_vec();
        c[0] -= shift;
        let (f_minus, f_plus) = (horner(&c, u_minus), horner(&c, u_plus));
        if (f_minus - f_plus).abs() > EQUAL_FLUX_TOL {
            return invalid(format!("f(u_plus) = {f_plus} differs from f(u_minus) = {f_minus}"));
        }
        Ok(Self {
            kind: FluxKind::Polynomial(c),
            u_minus,
            u_plus,
            u_star,
            c0,
            name: "poly".into(),
            f_minus,
            f_plus,
        })
    }

    /// Builds a model from its configuration identifier.
    pub fn from_name(name: &str, u_minus: f64, u_plus: Option<f64>, coeffs: &[f64]) -> Result<Self> {
        match name {
            "burgers" => Self::make_burgers(u_minus),
            "abs" => Self::make_abs(u_minus),
            "poly" => {
                let Some(up) = u_plus else {
                    return invalid("poly flux needs u_plus");
                };
                Self::make_convex(coeffs, u_minus, up)
            }
            other => invalid(format!("unknown flux model '{other}'")),
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self.kind, FluxKind::Polynomial(_))
    }

    pub fn f(&self, u: f64) -> f64 {
        match &self.kind {
            FluxKind::Polynomial(c) => horner(c, u),
            FluxKind::Abs => u.abs(),
        }
    }

    /// `f'`; the abs flux uses `sign(u)` with `f'(0) = 0`.
    pub fn df(&self, u: f64) -> f64 {
        match &self.kind {
            FluxKind::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, a)| acc * u + k as f64 * a),
            FluxKind::Abs => {
                if u > 0.0 {
                    1.0
                } else if u < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `f''`, absent for the nonsmooth model.
    pub fn d2f(&self, u: f64) -> Option<f64> {
        match &self.kind {
            FluxKind::Polynomial(c) => Some(horner(&derivative(&derivative(c)), u)),
            FluxKind::Abs => None,
        }
    }

    /// Jump `[[u]] = u_plus - u_minus` (negative).
    pub fn jump(&self) -> f64 {
        self.u_plus - self.u_minus
    }

    pub fn boundary(&self, side: Side) -> f64 {
        match side {
            Side::Minus => self.u_minus,
            Side::Plus => self.u_plus,
        }
    }

    pub fn boundary_flux(&self, side: Side) -> f64 {
        match side {
            Side::Minus => self.f_minus,
            Side::Plus => self.f_plus,
        }
    }

    /// `f(u_b) - f(u_b - dir * t)` for the boundary state `u_b` of `side`,
    /// where `dir` points from the sonic point towards `u_b`. Accurate
    /// for arbitrarily small `t`.
    pub fn gap_from_boundary(&self, side: Side, t: f64) -> f64 {
        let ub = self.boundary(side);
        let dir = if ub > self.u_star { 1.0 } else { -1.0 };
        match &self.kind {
            FluxKind::Polynomial(c) => {
                let tc = taylor_shift(c, ub);
                let s = -dir * t;
                -tc.iter().skip(1).rev().fold(0.0, |acc, &a| acc * s + a) * s
            }
            FluxKind::Abs => {
                let s = ub - dir * t;
                if s.signum() == ub.signum() || s == 0.0 {
                    t
                } else {
                    ub.abs() - s.abs()
                }
            }
        }
    }

    /// Precomputed evaluator of [`FluxModel::gap_from_boundary`].
    pub fn gap_evaluator(&self, side: Side) -> GapEval {
        let ub = self.boundary(side);
        let dir = if ub > self.u_star { 1.0 } else { -1.0 };
        match &self.kind {
            FluxKind::Polynomial(c) => GapEval::Poly {
                taylor: taylor_shift(c, ub),
                dir,
            },
            FluxKind::Abs => GapEval::Abs { ub, dir },
        }
    }

    /// State `v != u` on the other side of the sonic point with `f(v) = f(u)`.
    pub fn conjugate(&self, u: f64) -> Result<f64> {
        if (u - self.u_star).abs() <= 1e-15 * (1.0 + u.abs()) {
            return Ok(self.u_star);
        }
        match &self.kind {
            FluxKind::Abs => Ok(-u),
            FluxKind::Polynomial(_) => {
                let target = self.f(u);
                let dir = if u > self.u_star { -1.0 } else { 1.0 };
                let mut span = (u - self.u_star).abs().max(1e-3);
                // convexity makes f grow without bound away from u_star
                for _ in 0..60 {
                    if self.f(self.u_star + dir * span) >= target {
                        break;
                    }
                    span *= 2.0;
                }
                let far = self.u_star + dir * span;
                let (a, b) = if dir < 0.0 {
                    (far, self.u_star)
                } else {
                    (self.u_star, far)
                };
                roots::find_root(|v| self.f(v) - target, a, b, Some((a, b)), 1e-15)
            }
        }
    }

    /// Checks the structural invariants and reports their slack.
    pub fn validate(&self) -> FluxReport {
        let mut checks = vec![
            Check {
                name: "u_plus < u_star",
                pass: self.u_plus < self.u_star,
                slack: self.u_star - self.u_plus,
            },
            Check {
                name: "u_star < u_minus",
                pass: self.u_star < self.u_minus,
                slack: self.u_minus - self.u_star,
            },
            Check {
                name: "f'(u_plus) < 0",
                pass: self.df(self.u_plus) < 0.0,
                slack: -self.df(self.u_plus),
            },
            Check {
                name: "f'(u_minus) > 0",
                pass: self.df(self.u_minus) > 0.0,
                slack: self.df(self.u_minus),
            },
            Check {
                name: "f(u_plus) = f(u_minus)",
                pass: (self.f_plus - self.f_minus).abs() <= EQUAL_FLUX_TOL,
                slack: EQUAL_FLUX_TOL - (self.f_plus - self.f_minus).abs(),
            },
            Check {
                name: "f(u_star) = 0",
                pass: self.f(self.u_star).abs() <= 1e-14,
                slack: 1e-14 - self.f(self.u_star).abs(),
            },
        ];
        if self.is_smooth() {
            let mut m = f64::INFINITY;
            for k in 0..=CONVEXITY_SAMPLES {
                let u = self.u_plus + (self.u_minus - self.u_plus) * k as f64 / CONVEXITY_SAMPLES as f64;
                m = m.min(self.d2f(u).unwrap_or(f64::NAN));
            }
            checks.push(Check {
                name: "f'' >= c0 > 0",
                pass: m >= self.c0 && self.c0 > 0.0,
                slack: m - self.c0,
            });
        }
        FluxReport { checks }
    }
}

/// Cheap repeated evaluation of the boundary gap.
#[derive(Debug, Clone)]
pub enum GapEval {
    Poly { taylor: Vec<f64>, dir: f64 },
    Abs { ub: f64, dir: f64 },
}

impl GapEval {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            GapEval::Poly { taylor, dir } => {
                let s = -dir * t;
                -taylor.iter().skip(1).rev().fold(0.0, |acc, &a| acc * s + a) * s
            }
            GapEval::Abs { ub, dir } => {
                let s = ub - dir * t;
                if s.signum() == ub.signum() || s == 0.0 {
                    t
                } else {
                    ub.abs() - s.abs()
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burgers_rejects_nonpositive() {
        assert!(FluxModel::make_burgers(0.0).is_err());
        assert!(FluxModel::make_burgers(-1.0).is_err());
    }

    #[test]
    fn quartic_c0_is_one() {
        let m = FluxModel::make_convex(&[0.0, 0.0, 0.5, 0.0, 0.25], 1.0, -1.0).unwrap();
        assert!((m.c0 - 1.0).abs() < 1e-12);
        assert!(m.u_star.abs() < 1e-14);
        assert!(m.validate().all_pass());
    }

    #[test]
    fn unequal_boundary_flux_rejected() {
        assert!(FluxModel::make_convex(&[0.0, 0.0, 0.5], 1.0, -0.5).is_err());
    }

    #[test]
    fn concave_rejected() {
        assert!(FluxModel::make_convex(&[0.0, 0.0, -0.5], 1.0, -1.0).is_err());
    }

    #[test]
    fn asymmetric_quartic_shift_and_conjugate() {
        let m = FluxModel::make_convex(&[0.0, 0.0, 1.0, -1.0, 0.4], 1.0, -0.5).unwrap();
        assert!((m.f_minus - 0.4).abs() < 1e-14);
        assert!((m.c0 - 0.125).abs() < 1e-6);
        assert!((m.conjugate(1.0).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn gap_small_argument() {
        let m = FluxModel::make_burgers(1.0).unwrap();
        // f(1) - f(1 - t) = t - t^2/2
        let t = 1e-40;
        assert_eq!(m.gap_from_boundary(Side::Minus, t), t);
        let t = 0.3;
        assert!((m.gap_from_boundary(Side::Plus, t) - (t - t * t / 2.0)).abs() < 1e-15);
        let a = FluxModel::make_abs(2.0).unwrap();
        assert_eq!(a.gap_from_boundary(Side::Plus, 0.5), 0.5);
        assert_eq!(a.gap_evaluator(Side::Minus).eval(2.5), 2.0 - 0.5);
    }

    #[test]
    fn abs_has_no_second_derivative() {
        let m = FluxModel::make_abs(1.0).unwrap();
        assert!(m.d2f(0.3).is_none());
        assert!(!m.is_smooth());
    }
}
