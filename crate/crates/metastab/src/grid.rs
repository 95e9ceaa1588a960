//! Uniform node grids on `[-ell, ell]`.

use crate::error::{invalid, Result};

/// Interior node floor used by every solver.
pub const MIN_INTERVALS: usize = 1024;
/// Intervals per unit `ell / epsilon`.
pub const NODES_PER_LAYER: f64 = 64.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub x: Vec<f64>,
    /// Trapezoid weights; these define the discrete `L^2` pairing.
    pub w: Vec<f64>,
}

impl Grid {
    /// `n` equal intervals on `[-ell, ell]`, endpoints included.
    pub fn uniform(ell: f64, n: usize) -> Result<Self> {
        if !(ell > 0.0) || n < 2 {
            return invalid(format!(
                "grid needs ell > 0 and at least 2 intervals (ell={ell}, n={n})"
            ));
        }
        let h = 2.0 * ell / n as f64;
        let mut x: Vec<f64> = (0..=n).map(|j| -ell + j as f64 * h).collect();
        x[n] = ell;
        Ok(Self::from_nodes(x))
    }

    /// Interval count that resolves a layer of width `epsilon`.
    pub fn required_intervals(ell: f64, epsilon: f64) -> usize {
        MIN_INTERVALS.max((NODES_PER_LAYER * ell / epsilon).ceil() as usize)
    }

    pub fn for_epsilon(ell: f64, epsilon: f64) -> Result<Self> {
        Self::uniform(ell, Self::required_intervals(ell, epsilon))
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn intervals(&self) -> usize {
        self.x.len() - 1
    }

    pub fn ell(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    pub fn max_spacing(&self) -> f64 {
        self.x.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Grid from sorted nodes.
    pub fn from_nodes(x: Vec<f64>) -> Self {
        let n = x.len();
        let w = (0..n)
            .map(|i| {
                let left = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
                let right = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect();
        Self { x, w }
    }

    /// Discrete pairing `<u, v>`.
    pub fn dot(&self, u: &[f64], v: &[f64]) -> f64 {
        self.w.iter().zip(u.iter().zip(v)).map(|(w, (a, b))| w * a * b).sum()
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.dot(u, u).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_integrate_constants() {
        let g = Grid::uniform(1.5, 30).unwrap();
        let s: f64 = g.w.iter().sum();
        assert!((s - 3.0).abs() < 1e-14);
        assert_eq!(Grid::required_intervals(1.0, 0.01), 6400);
        assert_eq!(Grid::required_intervals(1.0, 0.25), 1024);
    }
}
