//! Uniform tensor grids over axis-aligned boxes.
//!
//! Nodes carry displacement values; cells carry strains and densities. In one
//! dimension the second axis is degenerate (one node row, one cell row).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    origin: [f64; 2],
    h: f64,
    cells: [usize; 2],
}

impl Grid {
    pub fn new(dim: usize, origin: [f64; 2], h: f64, cells: [usize; 2]) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(invalid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("spacing must be positive, got {h}")));
        }
        if cells[0] == 0 || (dim == 2 && cells[1] == 0) {
            return Err(invalid("grid needs at least one cell per axis"));
        }
        let cells = if dim == 1 { [cells[0], 1] } else { cells };
        let origin = if dim == 1 { [origin[0], 0.0] } else { origin };
        Ok(Grid { dim, origin, h, cells })
    }

    /// Grid on the box `[lo, hi]` with spacing `h`; the box sides must be
    /// integer multiples of `h` (relative slack 1e-9).
    pub fn for_box(dim: usize, lo: [f64; 2], hi: [f64; 2], h: f64) -> Result<Self> {
        let mut cells = [1usize; 2];
        for a in 0..dim {
            let len = hi[a] - lo[a];
            if !(len > 0.0) {
                return Err(invalid(format!("empty box along axis {a}")));
            }
            let n = (len / h).round();
            if n < 1.0 || ((n * h - len).abs() > 1e-9 * len) {
                return Err(Error::GridMismatch(format!(
                    "side {len} along axis {a} is not a multiple of spacing {h}"
                )));
            }
            cells[a] = n as usize;
        }
        Grid::new(dim, lo, h, cells)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }

    pub fn nodes(&self) -> [usize; 2] {
        if self.dim == 1 {
            [self.cells[0] + 1, 1]
        } else {
            [self.cells[0] + 1, self.cells[1] + 1]
        }
    }

    pub fn num_nodes(&self) -> usize {
        let n = self.nodes();
        n[0] * n[1]
    }

    pub fn num_cells(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    /// Upper corner of the box.
    pub fn upper(&self) -> [f64; 2] {
        let mut hi = self.origin;
        for a in 0..self.dim {
            hi[a] += self.cells[a] as f64 * self.h;
        }
        hi
    }

    /// Lebesgue measure of the box.
    pub fn volume(&self) -> f64 {
        self.cell_volume() * self.num_cells() as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.nodes()[0] + i
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.cells[0] + i
    }

    pub fn node_coords(&self, i: usize, j: usize) -> [f64; 2] {
        let mut x = [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
        ];
        if self.dim == 1 {
            x[1] = 0.0;
        }
        x
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        let mut x = [
            self.origin[0] + (i as f64 + 0.5) * self.h,
            self.origin[1] + (j as f64 + 0.5) * self.h,
        ];
        if self.dim == 1 {
            x[1] = 0.0;
        }
        x
    }

    /// Whether node `(i, j)` lies on the boundary of the box.
    pub fn is_boundary_node(&self, i: usize, j: usize) -> bool {
        let n = self.nodes();
        let on_x = i == 0 || i + 1 == n[0];
        if self.dim == 1 {
            on_x
        } else {
            on_x || j == 0 || j + 1 == n[1]
        }
    }

    /// Mask selecting the outer ring of nodes.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let n = self.nodes();
        let mut mask = Vec::with_capacity(self.num_nodes());
        for j in 0..n[1] {
            for i in 0..n[0] {
                mask.push(self.is_boundary_node(i, j));
            }
        }
        mask
    }

    /// Rescales coordinates and spacing by `s` (used for the change of variables
    /// `y = s * y_hat`).
    pub fn scaled(&self, s: f64) -> Grid {
        Grid {
            dim: self.dim,
            origin: [self.origin[0] * s, self.origin[1] * s],
            h: self.h * s,
            cells: self.cells,
        }
    }

    /// Same grid translated by `z`.
    pub fn translated(&self, z: [f64; 2]) -> Grid {
        let mut g = *self;
        for a in 0..self.dim {
            g.origin[a] += z[a];
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_grid_counts() {
        let g = Grid::for_box(2, [0.0, 0.0], [2.0, 1.0], 0.25).unwrap();
        assert_eq!(g.cells(), [8, 4]);
        assert_eq!(g.nodes(), [9, 5]);
        assert!((g.volume() - 2.0).abs() < 1e-14);
        assert_eq!(g.boundary_mask().iter().filter(|b| **b).count(), 2 * 9 + 2 * 3);
    }

    #[test]
    fn incommensurate_box_is_rejected() {
        assert!(matches!(
            Grid::for_box(1, [0.0, 0.0], [1.0, 0.0], 0.3),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn one_dimensional_layout() {
        let g = Grid::for_box(1, [-1.0, 5.0], [1.0, 7.0], 0.5).unwrap();
        assert_eq!(g.nodes(), [5, 1]);
        assert_eq!(g.num_cells(), 4);
        assert_eq!(g.cell_center(0, 0), [-0.75, 0.0]);
        assert!(g.is_boundary_node(4, 0) && !g.is_boundary_node(2, 0));
    }
}
