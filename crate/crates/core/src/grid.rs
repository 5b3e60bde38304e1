//! Uniform nodal phase-space grid over `(x, v1, v2)`.
//!
//! An axis with `n` cells carries `n + 1` nodes, first and last on the box
//! boundary. Node coordinates are computed as `center + (2k - n) * (half / n)`
//! so that a symmetric axis is mirror-exact in floating point
//! (`node(n - k) == -node(k)` bitwise) and node `k` of a grid coincides
//! bitwise with node `2k` of the grid refined by two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible cell count per axis.
pub const MIN_CELLS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub cells: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, cells: usize) -> Self {
        Self { min, max, cells }
    }

    /// Number of nodes, `cells + 1`.
    #[inline]
    pub fn len(&self) -> usize {
        self.cells + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / self.cells as f64
    }

    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        let center = 0.5 * (self.min + self.max);
        let half_step = 0.5 * (self.max - self.min) / self.cells as f64;
        center + (2 * k as i64 - self.cells as i64) as f64 * half_step
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }

    /// Mirror index `k -> cells - k`.
    #[inline]
    pub fn mirror(&self, k: usize) -> usize {
        self.cells - k
    }

    /// The same axis with twice the cell count.
    pub fn refined(&self, factor: usize) -> Self {
        Self::new(self.min, self.max, self.cells * factor)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::InvalidGrid(format!("{name} extent not finite")));
        }
        if self.max <= self.min {
            return Err(Error::InvalidGrid(format!(
                "{name} extent [{}, {}] has non-positive span",
                self.min, self.max
            )));
        }
        if self.cells < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "{name} count below minimum ({} < {MIN_CELLS})",
                self.cells
            )));
        }
        Ok(())
    }
}

/// Tensor grid over `(x, v1, v2)` with values stored row-major
/// `(i_x, i_v1, i_v2)`, `v2` fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub x: Axis,
    pub v1: Axis,
    pub v2: Axis,
}

impl PhaseGrid {
    pub fn nx(&self) -> usize {
        self.x.len()
    }
    pub fn nv1(&self) -> usize {
        self.v1.len()
    }
    pub fn nv2(&self) -> usize {
        self.v2.len()
    }
    pub fn dx(&self) -> f64 {
        self.x.spacing()
    }
    pub fn dv1(&self) -> f64 {
        self.v1.spacing()
    }
    pub fn dv2(&self) -> f64 {
        self.v2.spacing()
    }

    /// Values per x-slab, `nv1 * nv2`.
    #[inline]
    pub fn slab(&self) -> usize {
        self.nv1() * self.nv2()
    }

    /// Total node count.
    #[inline]
    pub fn size(&self) -> usize {
        self.nx() * self.slab()
    }

    #[inline]
    pub fn index(&self, ix: usize, iv1: usize, iv2: usize) -> usize {
        (ix * self.nv1() + iv1) * self.nv2() + iv2
    }

    #[inline]
    pub fn unravel(&self, flat: usize) -> (usize, usize, usize) {
        let iv2 = flat % self.nv2();
        let rest = flat / self.nv2();
        (rest / self.nv1(), rest % self.nv1(), iv2)
    }

    /// Grid with every axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            x: self.x.refined(factor),
            v1: self.v1.refined(factor),
            v2: self.v2.refined(factor),
        }
    }

    pub fn same_space(&self, other: &PhaseGrid) -> bool {
        self.x == other.x
    }
}

/// Builds a grid from `[(min, max); 3]` extents and `(n_x, n_v1, n_v2)` cell counts.
pub fn make_grid(extents: [(f64, f64); 3], counts: (usize, usize, usize)) -> Result<PhaseGrid> {
    let grid = PhaseGrid {
        x: Axis::new(extents[0].0, extents[0].1, counts.0),
        v1: Axis::new(extents[1].0, extents[1].1, counts.1),
        v2: Axis::new(extents[2].0, extents[2].1, counts.2),
    };
    grid.x.validate("x")?;
    grid.v1.validate("v1")?;
    grid.v2.validate("v2")?;
    if grid.v2.min != -grid.v2.max {
        return Err(Error::InvalidGrid(format!(
            "v2 extent not symmetric: [{}, {}]",
            grid.v2.min, grid.v2.max
        )));
    }
    Ok(grid)
}

/// Trapezoid weights (in units of the spacing) for an axis: 1/2 at both ends.
pub fn trapezoid_weights(n_nodes: usize) -> Vec<f64> {
    let mut w = vec![1.0; n_nodes];
    w[0] = 0.5;
    w[n_nodes - 1] = 0.5;
    w
}
