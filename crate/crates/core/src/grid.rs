//! Graded radial grids on (0, R] and piecewise-linear radial profiles
//! extended by zero outside the domain.

use crate::error::{Error, Result};
use std::sync::Arc;

/// Radial mesh with nodes R (j/M)^g for j = 1..M, clustered toward the
/// origin for g > 1. The origin itself is excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub r_outer: f64,
    pub m: usize,
    pub grading: f64,
    pub nodes: Vec<f64>,
}

/// Builds a graded radial grid.
pub fn build_grid(r_outer: f64, m: usize, grading: f64) -> Result<Arc<RadialGrid>> {
    if !(r_outer > 0.0) {
        return Err(Error::InvalidParams(format!("R must be positive, got {r_outer}")));
    }
    if m < 8 {
        return Err(Error::InvalidParams(format!("M must be >= 8, got {m}")));
    }
    if !(grading >= 1.0) {
        return Err(Error::InvalidParams(format!("grading must be >= 1, got {grading}")));
    }
    let nodes = (1..=m)
        .map(|j| r_outer * (j as f64 / m as f64).powf(grading))
        .collect();
    Ok(Arc::new(RadialGrid { r_outer, m, grading, nodes }))
}

impl RadialGrid {
    /// Index of the cell [r_j, r_{j+1}) containing r, as the 0-based index
    /// into `nodes` of its left node; None if r < r_1 or r >= R.
    pub fn cell_of(&self, r: f64) -> Option<usize> {
        if r < self.nodes[0] || r >= self.r_outer {
            return None;
        }
        // invert r = R (j/M)^g, then fix up rounding
        let guess = (r / self.r_outer).powf(1.0 / self.grading) * self.m as f64;
        let mut j = (guess.floor() as usize).clamp(1, self.m - 1) - 1;
        while j + 1 < self.m && r >= self.nodes[j + 1] {
            j += 1;
        }
        while j > 0 && r < self.nodes[j] {
            j -= 1;
        }
        Some(j)
    }
}

/// A radial profile: values at grid nodes, evaluated as the constant v_1 on
/// (0, r_1], piecewise linear on [r_1, R], and zero beyond R.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<f64>,
}

impl RadialFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.m {
            return Err(Error::InvalidParams(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.m
            )));
        }
        Ok(RadialFunction { grid, values })
    }

    /// Samples a closure at the grid nodes.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes.iter().map(|&r| f(r)).collect();
        RadialFunction { grid: grid.clone(), values }
    }

    pub fn zero(grid: Arc<RadialGrid>) -> Self {
        let values = vec![0.0; grid.m];
        RadialFunction { grid, values }
    }

    /// Evaluation per the extension rule.
    pub fn eval_at(&self, r: f64) -> f64 {
        let g = &self.grid;
        if r > g.r_outer {
            return 0.0;
        }
        if r <= g.nodes[0] {
            return self.values[0];
        }
        if r == g.r_outer {
            return self.values[g.m - 1];
        }
        let j = g.cell_of(r).expect("r inside [r_1, R)");
        let (r0, r1) = (g.nodes[j], g.nodes[j + 1]);
        let w = (r - r0) / (r1 - r0);
        self.values[j] + w * (self.values[j + 1] - self.values[j])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        RadialFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_and_graded_nodes() {
        let g = build_grid(1.0, 8, 1.0).unwrap();
        for (j, a) in g.nodes.iter().enumerate() {
            let b = (j + 1) as f64 / 8.0;
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
        let g = build_grid(1.0, 8, 2.0).unwrap();
        for (j, a) in g.nodes.iter().enumerate() {
            let b = ((j + 1) as f64 / 8.0).powi(2);
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn first_node_of_production_grid() {
        let g = build_grid(1.0, 200, 3.0).unwrap();
        assert!((g.nodes[0] - 200.0f64.powi(-3)).abs() < 1e-20);
    }

    #[test]
    fn evaluation_rule() {
        let g = build_grid(1.0, 8, 1.0).unwrap();
        let u = RadialFunction::from_fn(g.clone(), |r| r);
        assert_eq!(u.eval_at(2.0), 0.0);
        assert_eq!(u.eval_at(g.nodes[3]), g.nodes[3]);
        let mid = 0.5 * (g.nodes[0] + g.nodes[1]);
        assert!((u.eval_at(mid) - mid).abs() < 1e-15);
        // constant extension inside the first node
        assert_eq!(u.eval_at(1e-6), g.nodes[0]);
    }

    #[test]
    fn cell_lookup_consistent() {
        let g = build_grid(2.5, 37, 3.0).unwrap();
        for j in 0..g.m - 1 {
            let r = 0.5 * (g.nodes[j] + g.nodes[j + 1]);
            assert_eq!(g.cell_of(r), Some(j));
            assert_eq!(g.cell_of(g.nodes[j]), Some(j));
        }
        assert_eq!(g.cell_of(g.nodes[0] / 2.0), None);
        assert_eq!(g.cell_of(3.0), None);
    }

    #[test]
    fn rejects_bad_grid() {
        assert!(build_grid(0.0, 10, 1.0).is_err());
        assert!(build_grid(1.0, 4, 1.0).is_err());
        assert!(build_grid(1.0, 10, 0.5).is_err());
    }
}
