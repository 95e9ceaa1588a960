//! Interpolation on sorted abscissae.

/// Index `i` with `xs[i] <= x < xs[i+1]`, clamped to the table.
pub fn locate(xs: &[f64], x: f64) -> usize {
    let n = xs.len();
    if x <= xs[0] {
        return 0;
    }
    if x >= xs[n - 1] {
        return n - 2;
    }
    xs.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2)
}

/// Piecewise-linear value of a tabulated function.
pub fn linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = locate(xs, x);
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

/// Fritsch–Carlson monotone cubic Hermite interpolant.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n);
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let s: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut ds = vec![0.0; n];
        ds[0] = s[0];
        ds[n - 1] = s[n - 2];
        for i in 1..n - 1 {
            if s[i - 1] * s[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                ds[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
            }
        }
        Self { xs, ys, ds }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = locate(&self.xs, x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.ds[i] + h01 * self.ys[i + 1] + h11 * h * self.ds[i + 1]
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knots_and_stays_monotone() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x: &f64| x.tanh()).collect();
        let p = MonotoneCubic::new(xs.clone(), ys.clone());
        for (x, y) in xs.iter().zip(&ys) {
            assert!((p.eval(*x) - y).abs() < 1e-15);
        }
        let mut prev = p.eval(0.0);
        for k in 1..1000 {
            let v = p.eval(k as f64 * 2.7e-3);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn linear_midpoint() {
        assert_eq!(linear(&[0.0, 1.0, 2.0], &[0.0, 2.0, 0.0], 1.5), 1.0);
    }
}
