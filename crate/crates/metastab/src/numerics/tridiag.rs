//! Tridiagonal linear solves and the symmetric tridiagonal eigenproblem.
//!
//! Eigenvalues come from Sturm-sequence bisection, eigenvectors from
//! inverse iteration with a row-pivoted elimination.

use crate::error::{invalid, Result};

/// Thomas algorithm for a diagonally dominant system. `sub[i]` couples row
/// `i + 1` to column `i`, `sup[i]` couples row `i` to column `i + 1`.
pub fn solve_dominant(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        c[i - 1] = sup[i - 1] / beta;
        beta = diag[i] - sub[i - 1] * c[i - 1];
        rhs[i] = (rhs[i] - sub[i - 1] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// General tridiagonal solve with partial pivoting; zero pivots are
/// replaced by `tiny` so near-singular shifts still return a direction.
pub fn solve_pivoted(sub: &[f64], diag: &[f64], sup: &[f64], b: &mut [f64], tiny: f64) {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut dl = sub.to_vec();
    let mut du = sup.to_vec();
    let fix = |x: f64| if x == 0.0 { tiny } else { x };
    if n == 1 {
        b[0] /= fix(d[0]);
        return;
    }
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            let p = fix(d[i]);
            d[i] = p;
            let fact = dl[i] / p;
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
            dl[i] = 0.0;
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 1 < n - 1 {
                dl[i] = du[i + 1];
                du[i + 1] = -fact * dl[i];
            } else {
                dl[i] = 0.0;
            }
            du[i] = temp;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - fact * b[i + 1];
        }
    }
    d[n - 1] = fix(d[n - 1]);
    b[n - 1] /= d[n - 1];
    b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - dl[i] * b[i + 2]) / d[i];
    }
}

/// Symmetric tridiagonal matrix with diagonal `d` and off-diagonal `e`.
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl SymTridiag {
    pub fn new(d: Vec<f64>, e: Vec<f64>) -> Result<Self> {
        if d.is_empty() || e.len() + 1 != d.len() {
            return invalid("tridiagonal shape mismatch");
        }
        if d.iter().chain(&e).any(|v| !v.is_finite()) {
            return invalid("tridiagonal entries must be finite");
        }
        Ok(Self { d, e })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.e[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt() * self.norm_bound().max(1.0);
        let mut count = 0;
        let mut q = self.d[0] - x;
        for i in 0..self.len() {
            if i > 0 {
                q = self.d[i] - x - self.e[i - 1] * self.e[i - 1] / q;
            }
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Eigenvalue with ascending index `m` by bisection.
    pub fn eigenvalue(&self, m: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let floor = 4.0 * f64::EPSILON * f64::MIN_POSITIVE.sqrt();
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * mid.abs() + floor {
                break;
            }
            if self.sturm_count(mid) > m {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// The `k` largest eigenvalues, in decreasing order.
    pub fn top_eigenvalues(&self, k: usize) -> Vec<f64> {
        let n = self.len();
        (0..k.min(n)).map(|j| self.eigenvalue(n - 1 - j)).collect()
    }

    /// Unit eigenvector for a converged eigenvalue `mu`.
    pub fn eigenvector(&self, mu: f64, previous: &[Vec<f64>]) -> Vec<f64> {
        let n = self.len();
        let norm = self.norm_bound().max(f64::MIN_POSITIVE);
        let tiny = f64::EPSILON * norm;
        let diag: Vec<f64> = self.d.iter().map(|v| v - mu).collect();
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_749_895).fract())
            .collect();
        for _ in 0..4 {
            solve_pivoted(&self.e, &diag, &self.e, &mut v, tiny);
            for p in previous {
                let dot: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(p).for_each(|(x, y)| *x -= dot * y);
            }
            let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= s);
        }
        v
    }

    /// Applies the matrix to `v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.d[i] * v[i];
                if i > 0 {
                    s += self.e[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.e[i] * v[i + 1];
                }
                s
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn discrete_laplacian_spectrum() {
        let n = 200;
        let t = SymTridiag::new(vec![-2.0; n], vec![1.0; n - 1]).unwrap();
        let top = t.top_eigenvalues(5);
        for (j, mu) in top.iter().enumerate() {
            let exact = -4.0 * (((j + 1) as f64) * PI / (2.0 * (n as f64 + 1.0))).sin().powi(2);
            assert!((mu - exact).abs() < 1e-13, "{mu} vs {exact}");
        }
        let mut prev: Vec<Vec<f64>> = Vec::new();
        for mu in &top {
            let v = t.eigenvector(*mu, &prev);
            let r = t.apply(&v);
            let res: f64 = r.iter().zip(&v).map(|(a, b)| (a - mu * b).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1e-12);
            prev.push(v);
        }
        let dot: f64 = prev[0].iter().zip(&prev[3]).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-12);
    }

    #[test]
    fn pivoted_matches_dominant() {
        let n = 7;
        let sub = vec![0.3; n - 1];
        let sup = vec![-0.2; n - 1];
        let diag = vec![2.0; n];
        let rhs: Vec<f64> = (0..n).map(|i| i as f64 - 1.5).collect();
        let mut a = rhs.clone();
        let mut b = rhs.clone();
        solve_dominant(&sub, &diag, &sup, &mut a);
        solve_pivoted(&sub, &diag, &sup, &mut b, 1e-300);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn pivoting_path() {
        // Zero leading diagonal forces a row interchange.
        let sub = vec![1.0, 1.0];
        let diag = vec![0.0, 1.0, 3.0];
        let sup = vec![2.0, 1.0];
        let x = [1.0, -2.0, 0.5];
        let mut b = vec![
            diag[0] * x[0] + sup[0] * x[1],
            sub[0] * x[0] + diag[1] * x[1] + sup[1] * x[2],
            sub[1] * x[1] + diag[2] * x[2],
        ];
        solve_pivoted(&sub, &diag, &sup, &mut b, 1e-300);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-14);
        }
    }
}
