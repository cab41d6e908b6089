//! Uniform finite-volume grid on (-1, 1) and grid functions.
//!
//! Cells are `[x_{i-1/2}, x_{i+1/2}]` with centers `x_i = -1 + (i + 1/2) h`,
//! `h = 2/n`. Faces are computed as `-1 + 2i/n` so the first and last face
//! are exactly ±1 regardless of `n`; the diffusion coefficient vanishes
//! there, which is what makes the weighted Neumann condition exact in the
//! discretization.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::float;
use crate::{Error, Result};

/// Minimal number of cells accepted by [`Grid::new`].
pub const MIN_CELLS: usize = 8;

/// Uniform cell-centered grid on (-1, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n_cells: usize,
}

impl Grid {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < MIN_CELLS {
            return Err(Error::Parameter(format!(
                "grid needs at least {MIN_CELLS} cells, got {n_cells}"
            )));
        }
        Ok(Self { n_cells })
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Cell width `2 / n_cells`.
    #[inline]
    pub fn h(&self) -> f64 {
        2.0 / self.n_cells as f64
    }

    /// Center of cell `i`.
    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_cells);
        (2.0 * i as f64 + 1.0) / self.n_cells as f64 - 1.0
    }

    /// Face `i` for `i = 0..=n_cells`; `face(0) = -1` and `face(n) = 1` exactly.
    #[inline]
    pub fn face(&self, i: usize) -> f64 {
        debug_assert!(i <= self.n_cells);
        2.0 * i as f64 / self.n_cells as f64 - 1.0
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(move |i| self.center(i))
    }

    /// Discrete L² inner product `h Σ u_i v_i`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.n_cells);
        debug_assert_eq!(v.len(), self.n_cells);
        let mut acc = 0.0;
        for (a, b) in u.iter().zip(v) {
            acc += a * b;
        }
        acc * self.h()
    }
}

/// A grid function: one value per cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::GridMismatch(format!(
                "field has {} values for a grid of {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_cells()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n_cells()],
        }
    }

    /// Sample a function of `x` at the cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: grid.centers().map(f).collect(),
        }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Discrete L² inner product with another field on the same grid.
    pub fn inner(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.grid.inner(&self.values, &other.values)
    }

    /// Discrete L² norm `sqrt(h Σ u_i²)`.
    pub fn norm_l2(&self) -> f64 {
        float::sqrt(self.inner(self))
    }

    /// Largest absolute value over the cells.
    pub fn norm_sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(float::abs(*v)))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Field) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    /// Error when the two fields live on different grids.
    pub fn check_same_grid(&self, other: &Field, what: &str) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{what}: {} vs {} cells",
                self.grid.n_cells(),
                other.grid.n_cells()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn faces_hit_endpoints_exactly() {
        for n in [8, 12, 100, 513] {
            let g = Grid::new(n).unwrap();
            assert_eq!(g.face(0), -1.0);
            assert_eq!(g.face(n), 1.0);
        }
    }

    #[test]
    fn spacing_is_uniform() {
        let g = Grid::new(12).unwrap();
        let h = g.h();
        for i in 0..12 {
            assert_relative_eq!(g.face(i + 1) - g.face(i), h, max_relative = 1e-14);
            assert_relative_eq!(
                g.center(i),
                0.5 * (g.face(i) + g.face(i + 1)),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn too_coarse_grid_rejected() {
        assert!(Grid::new(4).is_err());
    }

    #[test]
    fn constant_field_norm() {
        let g = Grid::new(64).unwrap();
        let u = Field::constant(g, 1.0);
        assert_relative_eq!(u.norm_l2(), core::f64::consts::SQRT_2, epsilon = 1e-14);
    }

    #[test]
    fn field_length_checked() {
        let g = Grid::new(8).unwrap();
        assert!(Field::new(g, alloc::vec![0.0; 7]).is_err());
    }
}
