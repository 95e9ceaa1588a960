//! Bracketed scalar root finding.

use crate::error::{numerical, Result};

const MAX_EXPANSIONS: usize = 60;
const MAX_ITER: usize = 400;

/// A sign-changing interval with the function values at its ends.
#[derive(Debug, Clone, Copy)]
pub struct Bracket {
    pub a: f64,
    pub b: f64,
    pub fa: f64,
    pub fb: f64,
}

/// Widens `[a, b]` geometrically about its centre until `f` changes sign.
///
/// The interval is clipped to `limits` when given. At most 60 doublings.
pub fn expand_bracket<F>(mut f: F, a: f64, b: f64, limits: Option<(f64, f64)>) -> Result<Bracket>
where
    F: FnMut(f64) -> f64,
{
    let clip = |x: f64| match limits {
        Some((lo, hi)) => x.clamp(lo, hi),
        None => x,
    };
    let (mut a, mut b) = (clip(a.min(b)), clip(a.max(b)));
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..MAX_EXPANSIONS {
        if !fa.is_finite() || !fb.is_finite() {
            return numerical(format!("non-finite value while bracketing on [{a}, {b}]"));
        }
        if fa == 0.0 || fb == 0.0 || fa.signum() != fb.signum() {
            return Ok(Bracket { a, b, fa, fb });
        }
        let c = 0.5 * (a + b);
        let w = (b - a).max(f64::EPSILON * c.abs().max(1.0));
        let (na, nb) = (clip(c - w), clip(c + w));
        if na == a && nb == b {
            break;
        }
        if na != a {
            a = na;
            fa = f(a);
        }
        if nb != b {
            b = nb;
            fb = f(b);
        }
    }
    numerical(format!(
        "no sign change found on [{a}, {b}] after {MAX_EXPANSIONS} expansions"
    ))
}

/// Brent-style hybrid of bisection, secant and inverse quadratic steps.
///
/// Stops when the bracket is narrower than `rtol * |x| + atol`.
pub fn solve<F>(mut f: F, br: Bracket, rtol: f64, atol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let Bracket {
        mut a,
        mut b,
        mut fa,
        mut fb,
    } = br;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return numerical("root solver called without a sign change");
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 0.5 * (rtol * b.abs() + atol).max(2.0 * f64::EPSILON * b.abs());
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return numerical(format!("non-finite residual at {b}"));
        }
    }
    numerical("root solver exceeded its iteration budget")
}

/// Expands a bracket and then solves to relative tolerance `rtol`.
pub fn find_root<F>(mut f: F, a: f64, b: f64, limits: Option<(f64, f64)>, rtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let br = expand_bracket(&mut f, a, b, limits)?;
    solve(f, br, rtol, 1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_root() {
        let r = find_root(|x| x * x * x - 2.0, 0.0, 0.5, None, 1e-14).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn respects_limits() {
        assert!(find_root(|x| x - 5.0, 0.0, 1.0, Some((-1.0, 1.0)), 1e-12).is_err());
    }

    #[test]
    fn steep_exponential() {
        let r = find_root(|y: f64| (-y).exp() - 1e-30, 0.0, 1.0, None, 1e-14).unwrap();
        assert!((r - 30.0 * std::f64::consts::LN_10).abs() < 1e-11);
    }
}
