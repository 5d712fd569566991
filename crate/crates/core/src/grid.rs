//! Uniform symmetric space grids and local Lagrange interpolation on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes `x_i = i·dx` for `i = -k..=k`; zero is always a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceGrid {
    dx: f64,
    half_count: usize,
}

impl SpaceGrid {
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Effective half width `k·dx`, at least the requested one.
    pub fn half_width(&self) -> f64 {
        self.half_count as f64 * self.dx
    }

    /// Number of nodes on each side of zero.
    pub fn half_count(&self) -> usize {
        self.half_count
    }

    pub fn len(&self) -> usize {
        2 * self.half_count + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the node at zero.
    pub fn center(&self) -> usize {
        self.half_count
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 - self.half_count as f64) * self.dx
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    /// Sample `g` at every node.
    pub fn sample<F: Fn(f64) -> f64>(&self, g: F) -> GridFunction {
        GridFunction { grid: *self, values: self.nodes().map(g).collect() }
    }
}

/// Build a grid covering `[-half_width, half_width]` with spacing exactly `dx`.
///
/// The half node count is `ceil(half_width / dx)`, so the grid may extend slightly
/// past the requested width.
pub fn make_grid(half_width: f64, dx: f64) -> Result<SpaceGrid> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::InvalidGrid(format!("half width must be positive, got {half_width}")));
    }
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(Error::InvalidGrid(format!("spacing must be positive, got {dx}")));
    }
    let ratio = half_width / dx;
    // Absorb round-off so that e.g. 1/0.5 does not become 3 nodes a side.
    let half_count = (ratio - 1e-9 * ratio.max(1.0)).ceil().max(1.0);
    if half_count > 1e8 {
        return Err(Error::InvalidGrid(format!("{half_count} nodes per side is too many")));
    }
    Ok(SpaceGrid { dx, half_count: half_count as usize })
}

/// Values of a function at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: SpaceGrid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: SpaceGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "non-finite value {} at x = {}",
                values[i],
                grid.node(i)
            )));
        }
        Ok(Self { grid, values })
    }

    /// Value at `x = 0`.
    pub fn at_center(&self) -> f64 {
        self.values[self.grid.center()]
    }

    pub fn interpolate(&self, x: f64, r: usize) -> f64 {
        interpolate(self, x, r)
    }
}

/// Degree-`r` Lagrange interpolation through the `r + 1` nodes nearest `x`.
///
/// Ties go to the left, the stencil is shifted inward at the boundary and `x` is
/// clamped to the grid before evaluation.
///
/// # Panics
///
/// If `r == 0` or the grid has fewer than `r + 1` nodes.
pub fn interpolate(f: &GridFunction, x: f64, r: usize) -> f64 {
    let grid = &f.grid;
    assert!(r >= 1, "interpolation order must be at least 1");
    assert!(grid.len() > r, "grid of {} nodes cannot carry order {r}", grid.len());

    let k = grid.half_count as f64;
    let u = (x / grid.dx).clamp(-k, k) + k;
    let last_start = grid.len() - r - 1;
    let start = ((u - (r as f64 + 1.0) / 2.0).ceil().max(0.0) as usize).min(last_start);
    let v = u - start as f64;
    let values = &f.values[start..=start + r];

    // Exact hit on a node.
    if v == v.trunc() {
        return values[v as usize];
    }

    // First barycentric form on integer nodes 0..=r: w_j = (-1)^{r-j} / (j! (r-j)!).
    let mut total = 1.0;
    for m in 0..=r {
        total *= v - m as f64;
    }
    let mut acc = 0.0;
    let mut binom = 1.0; // C(r, j)
    for (j, y) in values.iter().enumerate() {
        let sign = if (r - j) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom / (v - j as f64) * y;
        binom = binom * (r - j) as f64 / (j + 1) as f64;
    }
    acc * total / factorial(r)
}

fn factorial(r: usize) -> f64 {
    (1..=r).map(|i| i as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_step_grid() {
        let g = make_grid(1.0, 0.5).unwrap();
        let nodes: Vec<f64> = g.nodes().collect();
        assert_eq!(nodes, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn grid_expands_to_cover() {
        let g = make_grid(1.0, 0.4).unwrap();
        assert_eq!(g.len(), 7);
        assert!((g.node(0) + 1.2).abs() < 1e-15);
        assert!((g.node(6) - 1.2).abs() < 1e-15);
        assert_eq!(g.node(g.center()), 0.0);
    }

    #[test]
    fn degenerate_grids_rejected() {
        assert!(make_grid(1.0, 0.0).is_err());
        assert!(make_grid(0.0, 0.1).is_err());
        assert!(make_grid(1.0, f64::NAN).is_err());
    }

    #[test]
    fn grid_function_checks_values() {
        let g = make_grid(1.0, 0.5).unwrap();
        assert!(GridFunction::new(g, vec![0.0; 4]).is_err());
        assert!(GridFunction::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn node_values_returned_exactly() {
        let g = make_grid(2.0, 0.25).unwrap();
        let f = g.sample(|x| (3.0 * x).sin() + 0.1);
        for (i, x) in g.nodes().enumerate() {
            for r in 1..=6 {
                assert_eq!(interpolate(&f, x, r), f.values[i]);
            }
        }
    }

    #[test]
    fn cubic_reproduced() {
        let p = |x: f64| x * x * x - 2.0 * x + 1.0;
        let g = make_grid(1.0, 0.4).unwrap();
        let f = g.sample(p);
        for r in 3..=6 {
            for i in 0..=100 {
                let x = -1.2 + 2.4 * i as f64 / 100.0;
                assert!((interpolate(&f, x, r) - p(x)).abs() < 1e-11, "r={r} x={x}");
            }
        }
    }

    #[test]
    fn sine_fifth_order() {
        let g = make_grid(3.0, 0.01).unwrap();
        let f = g.sample(f64::sin);
        assert!((interpolate(&f, 0.005, 5) - 0.005f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn clamped_outside() {
        let g = make_grid(1.0, 0.25).unwrap();
        let f = g.sample(|x| x.exp());
        assert_eq!(interpolate(&f, 5.0, 3), interpolate(&f, 1.0, 3));
        assert_eq!(interpolate(&f, -7.0, 4), f.values[0]);
    }

    #[test]
    fn ties_go_left() {
        // r = 1 at a midpoint uses the two bracketing nodes; r = 2 at a midpoint
        // between nodes 5 and 6 uses 4, 5, 6.
        let g = make_grid(2.0, 0.25).unwrap();
        let mut f = g.sample(|x| x);
        let x = g.node(5) + 0.125;
        f.values[7] = 100.0;
        let y = interpolate(&f, x, 2);
        assert!((y - x).abs() < 1e-14);
        f.values[7] = g.node(7);
        f.values[4] = -100.0;
        assert!((interpolate(&f, x, 2) - x).abs() > 1.0);
    }
}
