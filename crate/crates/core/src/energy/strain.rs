//! Discrete gradients on the cell lattice.
//!
//! In 2D every grid cell is split along its `(i, j)`–`(i+1, j+1)` diagonal into
//! two triangles; the gradient is constant on each. The lower triangle uses
//! forward differences from node `(i, j)`, the upper one backward differences
//! from node `(i+1, j+1)`. The pair is the conforming P1 gradient, so it is
//! exact on affine fields, has no oscillating null modes and nests under grid
//! refinement. In 1D there is one forward difference per cell.

use rayon::prelude::*;

use super::field::DisplacementField;
use crate::grid::Grid;
use crate::media::{Density, GradientMode};
use crate::tensor::Mat2;

/// Gradient samples per cell in dimension `dim`.
pub fn samples_per_cell(dim: usize) -> usize {
    if dim == 1 {
        1
    } else {
        2
    }
}

/// Piecewise-constant tensor field, `samples_per_cell` samples per cell,
/// cell-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainField {
    grid: Grid,
    values: Vec<Mat2>,
}

impl StrainField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Mat2] {
        &self.values
    }

    /// Samples of cell `(i, j)`: `[lower, upper]` in 2D, one entry in 1D.
    pub fn cell(&self, i: usize, j: usize) -> &[Mat2] {
        let k = samples_per_cell(self.grid.dim());
        let c = self.grid.cell_index(i, j);
        &self.values[c * k..(c + 1) * k]
    }

    /// Average over the samples of a cell.
    pub fn cell_mean(&self, i: usize, j: usize) -> Mat2 {
        let s = self.cell(i, j);
        s.iter().fold(Mat2::ZERO, |acc, m| acc + *m) * (1.0 / s.len() as f64)
    }

    /// Sample location: triangle centroid in 2D, cell centre in 1D.
    pub fn sample_point(&self, i: usize, j: usize, t: usize) -> [f64; 2] {
        let x = self.grid.node_coords(i, j);
        let h = self.grid.h();
        match (self.grid.dim(), t) {
            (1, _) => [x[0] + 0.5 * h, 0.0],
            (_, 0) => [x[0] + 2.0 * h / 3.0, x[1] + h / 3.0],
            _ => [x[0] + h / 3.0, x[1] + 2.0 * h / 3.0],
        }
    }
}

fn cell_gradients(u: &DisplacementField, i: usize, j: usize, out: &mut [Mat2]) {
    let h = u.grid().h();
    let dim = u.dim();
    if dim == 1 {
        let (a, b) = (u.value(i, 0)[0], u.value(i + 1, 0)[0]);
        out[0] = Mat2::new((b - a) / h, 0.0, 0.0, 0.0);
        return;
    }
    let a = u.value(i, j);
    let b = u.value(i + 1, j);
    let c = u.value(i, j + 1);
    let d = u.value(i + 1, j + 1);
    let mut lower = Mat2::ZERO;
    let mut upper = Mat2::ZERO;
    for k in 0..2 {
        lower.0[k] = [(b[k] - a[k]) / h, (c[k] - a[k]) / h];
        upper.0[k] = [(d[k] - c[k]) / h, (d[k] - b[k]) / h];
    }
    out[0] = lower;
    out[1] = upper;
}

/// Full discrete gradient `grad u`.
pub fn grad(u: &DisplacementField) -> StrainField {
    let grid = *u.grid();
    let k = samples_per_cell(grid.dim());
    let nx = grid.cells()[0];
    let mut values = vec![Mat2::ZERO; grid.num_cells() * k];
    values.par_chunks_mut(nx * k).enumerate().for_each(|(j, row)| {
        for (i, out) in row.chunks_mut(k).enumerate() {
            cell_gradients(u, i, j, out);
        }
    });
    StrainField { grid, values }
}

/// `e(u) = (grad u + grad u^T) / 2` in symmetrized mode, `grad u` in full mode.
pub fn sym_grad(u: &DisplacementField, mode: GradientMode) -> StrainField {
    let mut g = grad(u);
    if mode == GradientMode::Symmetrized {
        for m in &mut g.values {
            *m = m.sym();
        }
    }
    g
}

/// Cell densities `g_c = mean_t W(x_c, M_t)` with the coefficient taken at
/// the cell centre, plus the per-sample stresses `dW/dM` scaled by
/// `1 / samples_per_cell` (so they are the derivatives of `g_c`).
pub(crate) fn cell_density_and_stress<D: Density + ?Sized>(
    u: &DisplacementField,
    medium: &D,
    want_stress: bool,
) -> (Vec<f64>, Vec<Mat2>) {
    let grid = *u.grid();
    let k = samples_per_cell(grid.dim());
    let nx = grid.cells()[0];
    let inv = 1.0 / k as f64;
    let mut dens = vec![0.0; grid.num_cells()];
    let mut stress = if want_stress { vec![Mat2::ZERO; grid.num_cells() * k] } else { Vec::new() };
    let fill = |j: usize, drow: &mut [f64], mut srow: Option<&mut [Mat2]>| {
        let mut buf = [Mat2::ZERO; 2];
        for (i, slot) in drow.iter_mut().enumerate() {
            cell_gradients(u, i, j, &mut buf[..k]);
            let x = grid.cell_center(i, j);
            let acc = medium.eval_samples(x, &mut buf[..k], srow.is_some());
            if let Some(srow) = srow.as_deref_mut() {
                for t in 0..k {
                    srow[i * k + t] = buf[t] * inv;
                }
            }
            *slot = acc * inv;
        }
    };
    if want_stress {
        dens.par_chunks_mut(nx)
            .zip(stress.par_chunks_mut(nx * k))
            .enumerate()
            .for_each(|(j, (d, s))| fill(j, d, Some(s)));
    } else {
        dens.par_chunks_mut(nx).enumerate().for_each(|(j, d)| fill(j, d, None));
    }
    (dens, stress)
}

/// Cell densities `g_c` of the local energy.
pub fn cell_density<D: Density + ?Sized>(u: &DisplacementField, medium: &D) -> Vec<f64> {
    cell_density_and_stress(u, medium, false).0
}

/// Discrete local energy `sum_c h^n g_c`.
pub fn local_energy<D: Density + ?Sized>(u: &DisplacementField, medium: &D) -> f64 {
    let g = cell_density(u, medium);
    u.grid().cell_volume() * g.iter().sum::<f64>()
}

/// Nodal gradient of `sum_c weight_c * g_c`, given per-sample stresses from
/// [`cell_density_and_stress`]. Masked nodes get zero.
pub(crate) fn assemble_gradient(u: &DisplacementField, mut stress: Vec<Mat2>, weight: &[f64]) -> Vec<f64> {
    let grid = *u.grid();
    let dim = grid.dim();
    let h = grid.h();
    let [cx, cy] = grid.cells();
    let nodes = grid.nodes();
    let k = samples_per_cell(dim);
    stress.par_chunks_mut(k).zip(weight.par_iter()).for_each(|(s, &w)| {
        for m in s {
            *m = *m * (w / h);
        }
    });
    let stress = &stress;
    let s = |i: usize, j: usize, t: usize| -> Mat2 { stress[grid.cell_index(i, j) * k + t] };
    let mut out = vec![0.0; grid.num_nodes() * dim];
    out.par_chunks_mut(nodes[0] * dim).enumerate().for_each(|(j, row)| {
        for i in 0..nodes[0] {
            let n = grid.node_index(i, j);
            if u.is_pinned(n) {
                continue;
            }
            let g = &mut row[i * dim..(i + 1) * dim];
            if dim == 1 {
                if i < cx {
                    g[0] -= s(i, 0, 0).0[0][0];
                }
                if i > 0 {
                    g[0] += s(i - 1, 0, 0).0[0][0];
                }
                continue;
            }
            for (kk, gk) in g.iter_mut().enumerate() {
                let mut acc = 0.0;
                // node a of cell (i, j)
                if i < cx && j < cy {
                    let l = s(i, j, 0).0[kk];
                    acc -= l[0] + l[1];
                }
                // node b of cell (i-1, j)
                if i > 0 && j < cy {
                    acc += s(i - 1, j, 0).0[kk][0] - s(i - 1, j, 1).0[kk][1];
                }
                // node c of cell (i, j-1)
                if i < cx && j > 0 {
                    acc += s(i, j - 1, 0).0[kk][1] - s(i, j - 1, 1).0[kk][0];
                }
                // node d of cell (i-1, j-1)
                if i > 0 && j > 0 {
                    let up = s(i - 1, j - 1, 1).0[kk];
                    acc += up[0] + up[1];
                }
                *gk = acc;
            }
        }
    });
    out
}

/// Local energy and its nodal gradient.
pub fn local_energy_and_gradient<D: Density + ?Sized>(u: &DisplacementField, medium: &D) -> (f64, Vec<f64>) {
    let (g, stress) = cell_density_and_stress(u, medium, true);
    let vol = u.grid().cell_volume();
    let weight = vec![vol; g.len()];
    (vol * g.iter().sum::<f64>(), assemble_gradient(u, stress, &weight))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::MediumSpec;

    fn grid2(h: f64) -> Grid {
        Grid::for_box(2, [0.0, 0.0], [1.0, 1.0], h).unwrap()
    }

    #[test]
    fn affine_fields_are_exact() {
        let m = Mat2::new(0.3, -1.2, 2.5, 0.7);
        let u = DisplacementField::affine(grid2(1.0 / 16.0), &m, [0.4, -0.1]);
        let e = sym_grad(&u, GradientMode::Symmetrized);
        for s in e.values() {
            assert!(s.max_abs_diff(&m.sym()) < 1e-12);
        }
        let g = sym_grad(&u, GradientMode::Full);
        for s in g.values() {
            assert!(s.max_abs_diff(&m) < 1e-12);
        }
    }

    #[test]
    fn rigid_motions_have_zero_strain() {
        let mut u = DisplacementField::zeros(grid2(1.0 / 8.0));
        u.add_rigid_motion([0.3, -2.0], 0.7);
        for s in sym_grad(&u, GradientMode::Symmetrized).values() {
            assert!(s.frob() < 1e-13);
        }
    }

    #[test]
    fn quadratic_field_matches_taylor_bound() {
        let h = 1.0 / 128.0;
        let u = DisplacementField::from_fn(grid2(h), |x| [x[0] * x[0], 0.0]);
        let e = sym_grad(&u, GradientMode::Symmetrized);
        for j in 0..128 {
            for i in 0..128 {
                for t in 0..2 {
                    let x = e.sample_point(i, j, t);
                    assert!((e.cell(i, j)[t].0[0][0] - 2.0 * x[0]).abs() <= 2.0 * h);
                }
            }
        }
    }

    #[test]
    fn one_dimensional_forward_differences() {
        let g = Grid::for_box(1, [0.0, 0.0], [1.0, 0.0], 0.25).unwrap();
        let u = DisplacementField::from_fn(g, |x| [x[0] * x[0], 0.0]);
        let d = grad(&u);
        let want = [0.25, 0.75, 1.25, 1.75];
        for (s, w) in d.values().iter().zip(want) {
            assert!((s.0[0][0] - w).abs() < 1e-14);
        }
    }

    #[test]
    fn local_gradient_matches_finite_differences() {
        for (dim, mode) in [(2, GradientMode::Symmetrized), (2, GradientMode::Full), (1, GradientMode::Full)] {
            let g = if dim == 2 { grid2(0.125) } else { Grid::for_box(1, [0.0, 0.0], [1.0, 0.0], 0.125).unwrap() };
            let medium = MediumSpec::constant(dim, 3.0, 1.5).with_mode(mode);
            let u = DisplacementField::from_fn(g, |x| [(3.0 * x[0]).sin() + x[1], x[0] * x[1] - x[1]]);
            let (_, grad) = local_energy_and_gradient(&u, &medium);
            let step = 1e-6;
            for n in 0..u.values().len() {
                let mut up = u.values().to_vec();
                let mut dn = u.values().to_vec();
                up[n] += step;
                dn[n] -= step;
                let ep = local_energy(&DisplacementField::from_values(g, up, None).unwrap(), &medium);
                let em = local_energy(&DisplacementField::from_values(g, dn, None).unwrap(), &medium);
                let fd = (ep - em) / (2.0 * step);
                assert!((fd - grad[n]).abs() <= 1e-6 * (1.0 + fd.abs()), "dim {dim} node {n}: {fd} vs {}", grad[n]);
            }
        }
    }
}
