//! Cell problems
//!
//! ```text
//! m(u_M, A) = inf { int_A W(x, e(v)) : v = u_M on the boundary of A }
//! ```
//!
//! on lattice-aligned cubes, the derived cell formulas, deterministic
//! homogenization and the subadditive-process checks for random media.
//!
//! Cell problems are solved for the corrector `phi = v - u_M`, which vanishes
//! on the outer node ring. The energy sees `M + grad phi`, so translated or
//! rescaled problems run through bit-identical arithmetic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::energy::DisplacementField;
use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::media::{Base, CoefficientField, Density, GradientMode, LatticeBox, MediumSpec, RandomMedium, Rescaled};
use crate::solve::{descend, minimize_from, LocalObjective, SolveOptions};
use crate::tensor::Mat2;

/// `W(x, M + G)` as a density of `G`.
struct Offset<'a, D: ?Sized> {
    inner: &'a D,
    m: Mat2,
}

impl<D: Density + ?Sized> Density for Offset<'_, D> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn p(&self) -> f64 {
        self.inner.p()
    }
    fn mode(&self) -> GradientMode {
        self.inner.mode()
    }
    fn bounds(&self) -> (f64, f64) {
        self.inner.bounds()
    }
    fn eval_with_stress(&self, x: [f64; 2], g: &Mat2) -> (f64, Mat2) {
        self.inner.eval_with_stress(x, &(*g + self.m))
    }
    fn eval_samples(&self, x: [f64; 2], gs: &mut [Mat2], stress: bool) -> f64 {
        for g in gs.iter_mut() {
            *g = *g + self.m;
        }
        self.inner.eval_samples(x, gs, stress)
    }
    fn period(&self) -> Option<f64> {
        self.inner.period()
    }
}

/// Minimum of the local energy on `Q_side(center)` with affine datum `M`,
/// for the density `W(x / delta, M)`.
#[derive(Debug, Clone)]
pub struct CellProblem<D> {
    pub m: Mat2,
    pub center: [f64; 2],
    pub side: f64,
    pub medium: D,
    /// Grid cells per cube side.
    pub cells: usize,
    /// Oscillation scale: the problem sees `W(x / delta, M)`.
    pub delta: f64,
}

/// Smallest admissible cells per cube side.
pub const MIN_CELLS_PER_SIDE: usize = 16;
/// Smallest admissible grid cells per coefficient period.
pub const MIN_CELLS_PER_PERIOD: f64 = 8.0;

impl<D: Density> CellProblem<D> {
    pub fn new(m: Mat2, center: [f64; 2], side: f64, medium: D, cells: usize) -> Self {
        CellProblem { m, center, side, medium, cells, delta: 1.0 }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn dim(&self) -> usize {
        self.medium.dim()
    }

    pub fn h(&self) -> f64 {
        self.side / self.cells as f64
    }

    pub fn grid(&self) -> Result<Grid> {
        if !(self.side > 0.0 && self.side.is_finite()) || !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid("cell side and delta must be positive"));
        }
        if self.cells < MIN_CELLS_PER_SIDE {
            return Err(Error::Resolution(format!(
                "{} cells per side, need at least {MIN_CELLS_PER_SIDE}",
                self.cells
            )));
        }
        if let Some(period) = self.medium.period() {
            let per = period * self.delta / self.h();
            if per < MIN_CELLS_PER_PERIOD * (1.0 - 1e-12) {
                return Err(Error::Resolution(format!(
                    "{per:.3} grid cells per coefficient period, need at least {MIN_CELLS_PER_PERIOD}"
                )));
            }
        }
        let dim = self.dim();
        let half = 0.5 * self.side;
        let lo = [self.center[0] - half, if dim == 2 { self.center[1] - half } else { 0.0 }];
        Grid::new(dim, lo, self.h(), [self.cells, self.cells])
    }

    /// Volume `side^n` of the cube.
    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim() as i32)
    }
}

/// Solution of a cell problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CellValue {
    /// `m / |A|`.
    pub value: f64,
    /// `m`.
    pub energy: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Minimizer `v = u_M + phi`.
    pub field: DisplacementField,
}

/// Upper growth bound `c2 (|E|^p + 1)` for the normalized cell value.
pub fn growth_upper<D: Density + ?Sized>(medium: &D, m: &Mat2) -> f64 {
    medium.bounds().1 * (medium.growth_norm(m).powf(medium.p()) + 1.0)
}

/// Lower growth bound `c1 |E|^p`.
pub fn growth_lower<D: Density + ?Sized>(medium: &D, m: &Mat2) -> f64 {
    medium.bounds().0 * medium.growth_norm(m).powf(medium.p())
}

fn corrector_start(grid: Grid) -> Result<DisplacementField> {
    DisplacementField::zeros(grid).with_dirichlet(grid.boundary_mask(), |_| [0.0, 0.0])
}

fn finish(grid: Grid, m: &Mat2, phi: &DisplacementField, energy: f64, converged: bool, iterations: usize) -> CellValue {
    let mut v = DisplacementField::affine(grid, m, [0.0, 0.0]);
    let sum: Vec<f64> = v.values().iter().zip(phi.values()).map(|(a, b)| a + b).collect();
    v.set_free_values(&sum);
    let v = v.with_dirichlet(grid.boundary_mask(), |x| m.apply(x)).expect("mask matches grid");
    CellValue { value: energy / grid.volume(), energy, converged, iterations, field: v }
}

fn solve_corrector<D: Density + ?Sized>(
    grid: Grid,
    medium: &D,
    m: &Mat2,
    inits: Vec<DisplacementField>,
    opts: &SolveOptions,
) -> Result<CellValue> {
    let shifted = Offset { inner: medium, m: *m };
    let obj = LocalObjective { medium: &shifted };
    let r = minimize_from(&obj, inits, opts)?;
    Ok(finish(grid, m, &r.field, r.energy, r.converged, r.iterations))
}

/// Solves a cell problem from the zero corrector (affine start).
pub fn minimize_cell<D: Density>(cell: &CellProblem<D>, opts: &SolveOptions) -> Result<CellValue> {
    let grid = cell.grid()?;
    let medium = Rescaled { inner: &cell.medium, delta: cell.delta };
    let single = SolveOptions { restarts: 1, ..opts.clone() };
    solve_corrector(grid, &medium, &cell.m, vec![corrector_start(grid)?], &single)
}

/// One entry of a cell-value table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableEntry {
    /// Cube side (`r` or `t`).
    pub side: f64,
    /// Oscillation scale `delta_k` (1 when unscaled).
    pub delta: f64,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerBounds {
    pub r: f64,
    pub min: f64,
    pub max: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WPrimeEstimate {
    /// Lower cell formula at the smallest `r`.
    pub w_prime: f64,
    /// Upper cell formula at the smallest `r`.
    pub w_second: f64,
    pub inner: Vec<InnerBounds>,
    pub table: Vec<TableEntry>,
    /// Some inner spread exceeded 5%.
    pub flagged: bool,
}

/// Relative spread above which an inner liminf/limsup pair is flagged.
pub const SPREAD_FLAG: f64 = 0.05;

/// Fills the `(r, delta_k)` table of `m_k(u_M, Q_r(x)) / r^n` with
/// `cells_per_period` grid cells per `delta_k` (at least 16 per side), then
/// takes min/max over the deepest half of the `k`-list per `r`.
pub fn estimate_w_prime_second<D: Density>(
    medium: &D,
    m: &Mat2,
    x: [f64; 2],
    deltas: &[f64],
    rs: &[f64],
    cells_per_period: usize,
    opts: &SolveOptions,
) -> Result<WPrimeEstimate> {
    let decreasing = |v: &[f64]| v.len() >= 3 && v.windows(2).all(|w| w[1] < w[0]) && v.iter().all(|&x| x > 0.0);
    if !decreasing(rs) || !decreasing(deltas) {
        return Err(invalid("r and delta lists need at least 3 strictly decreasing positive values"));
    }
    let (r_min, d_max) = (*rs.last().unwrap(), deltas[0]);
    if r_min / d_max < 8.0 * (1.0 - 1e-12) {
        return Err(invalid(format!("scale separation r_min/delta_max = {} is below 8", r_min / d_max)));
    }
    let jobs: Vec<(f64, f64)> = rs.iter().flat_map(|&r| deltas.iter().map(move |&d| (r, d))).collect();
    let table: Vec<TableEntry> = jobs
        .par_iter()
        .map(|&(r, d)| {
            let cells = ((r / d) * cells_per_period as f64).round().max(MIN_CELLS_PER_SIDE as f64) as usize;
            let cv = minimize_cell(&CellProblem::new(*m, x, r, medium, cells).with_delta(d), opts)?;
            Ok(TableEntry { side: r, delta: d, value: cv.value, converged: cv.converged, iterations: cv.iterations })
        })
        .collect::<Result<_>>()?;
    let deep = deltas.len().div_ceil(2);
    let mut inner = Vec::with_capacity(rs.len());
    for (ri, &r) in rs.iter().enumerate() {
        let row = &table[ri * deltas.len()..(ri + 1) * deltas.len()];
        let tail = &row[deltas.len() - deep..];
        let min = tail.iter().map(|e| e.value).fold(f64::INFINITY, f64::min);
        let max = tail.iter().map(|e| e.value).fold(f64::NEG_INFINITY, f64::max);
        let flagged = max - min > SPREAD_FLAG * max.abs();
        inner.push(InnerBounds { r, min, max, flagged });
    }
    let last = inner.last().unwrap();
    Ok(WPrimeEstimate {
        w_prime: last.min,
        w_second: last.max,
        flagged: inner.iter().any(|b| b.flagged),
        inner,
        table,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomDetResult {
    pub table: Vec<TableEntry>,
    /// Value at the largest `t`.
    pub estimate: f64,
    /// Gap between the last two values.
    pub error_bar: f64,
}

/// `m(u_M, Q_t(t x)) / t^n` for increasing `t`, `cells_per_period` grid
/// cells per unit coefficient period.
pub fn homogenize_det<D: Density>(
    medium: &D,
    m: &Mat2,
    x: [f64; 2],
    ts: &[f64],
    cells_per_period: usize,
    opts: &SolveOptions,
) -> Result<HomDetResult> {
    if ts.is_empty() || ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("t list must be non-empty and strictly increasing"));
    }
    let period = medium.period().unwrap_or(1.0);
    if ts[0] / period < 4.0 {
        return Err(invalid("smallest cube must span at least 4 periods"));
    }
    let table: Vec<TableEntry> = ts
        .par_iter()
        .map(|&t| {
            let cells = ((t / period) * cells_per_period as f64).round() as usize;
            let cell = CellProblem::new(*m, [t * x[0], t * x[1]], t, medium, cells);
            let cv = minimize_cell(&cell, opts)?;
            Ok(TableEntry { side: t, delta: 1.0, value: cv.value, converged: cv.converged, iterations: cv.iterations })
        })
        .collect::<Result<_>>()?;
    let n = table.len();
    let estimate = table[n - 1].value;
    let error_bar = if n > 1 { (table[n - 1].value - table[n - 2].value).abs() } else { f64::NAN };
    Ok(HomDetResult { table, estimate, error_bar })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescalingCheck {
    /// `m_k(u_M, Q_r(x)) / r^n` with `W(x / delta)`.
    pub scaled: f64,
    /// `m(u_M, Q_{r/delta}(x/delta)) / (r/delta)^n`.
    pub unscaled: f64,
    pub residual: f64,
}

/// Solves `m_k(u_M, Q_r(x))` and `delta^n m(u_M, Q_{r/delta}(x/delta))` on
/// grids related by `y = delta y_hat` and returns their relative residual.
pub fn rescaling_identity_check<D: Density>(
    medium: &D,
    m: &Mat2,
    r: f64,
    delta: f64,
    x: [f64; 2],
    cells: usize,
    opts: &SolveOptions,
) -> Result<RescalingCheck> {
    let scaled = CellProblem::new(*m, x, r, medium, cells).with_delta(delta);
    let grid = scaled.grid()?;
    // Matched grids: grid lines must sit on the delta-lattice of the medium.
    if let Some(period) = medium.period() {
        let on_lattice = |v: f64| (v - v.round()).abs() <= 1e-9 * v.abs().max(1.0);
        let h = grid.h();
        let per = period * delta / h;
        let corner = (0..grid.dim()).all(|a| on_lattice(grid.origin()[a] / h));
        if !on_lattice(per) || !corner {
            return Err(Error::GridMismatch(format!(
                "grid with spacing {h} is not aligned with the coefficient lattice of period {}",
                period * delta
            )));
        }
    }
    let unscaled = CellProblem::new(*m, [x[0] / delta, x[1] / delta], r / delta, medium, cells);
    let a = minimize_cell(&scaled, opts)?;
    let b = minimize_cell(&unscaled, opts)?;
    let den = a.value.abs().max(b.value.abs());
    let residual = if den == 0.0 { 0.0 } else { (a.value - b.value).abs() / den };
    Ok(RescalingCheck { scaled: a.value, unscaled: b.value, residual })
}

/// Closed-form `W_hom(M)` of a one-dimensional medium,
/// `c (E[a^{-1/(p-1)}])^{-(p-1)} |E|^p`, with the mean over one period or
/// over the law of an iid checkerboard. `None` in 2D.
pub fn one_dim_w_hom(spec: &MediumSpec, m: &Mat2) -> Option<f64> {
    if spec.dim != 1 {
        return None;
    }
    let q = 1.0 / (spec.p - 1.0);
    let w = |a: f64| a.powf(-q);
    let mean = match &spec.field {
        CoefficientField::Constant { a } => w(*a),
        CoefficientField::Laminate { values, fraction, .. } => fraction * w(values[0]) + (1.0 - fraction) * w(values[1]),
        CoefficientField::Checkerboard { values } => 0.5 * (w(values[0]) + w(values[1])),
        CoefficientField::RandomCheckerboard { values, probability } => {
            probability * w(values[0]) + (1.0 - probability) * w(values[1])
        }
    };
    let Base::Iso { c } = spec.base;
    Some(c * mean.powf(-(spec.p - 1.0)) * spec.growth_norm(m).powf(spec.p))
}

/// Random guillotine partition of `a` into `parts` integer boxes: the
/// largest box (lowest index on ties) is cut along its longest axis at a
/// uniformly drawn interior lattice plane.
pub fn random_partition(dim: usize, a: LatticeBox, parts: usize, seed: u64) -> Vec<LatticeBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![a];
    while out.len() < parts {
        let (k, _) = out.iter().enumerate().fold((usize::MAX, 0usize), |best, (k, b)| {
            if b.len() > best.1 && b.len() > 1 {
                (k, b.len())
            } else {
                best
            }
        });
        if k == usize::MAX {
            break;
        }
        let b = out[k];
        let ext = [b.hi[0] - b.lo[0], if dim == 2 { b.hi[1] - b.lo[1] } else { 0 }];
        let axis = if ext[1] > ext[0] { 1 } else { 0 };
        let cut = b.lo[axis] + rng.random_range(1..ext[axis]);
        let (mut left, mut right) = (b, b);
        left.hi[axis] = cut;
        right.lo[axis] = cut;
        out[k] = left;
        out.insert(k + 1, right);
    }
    out
}

/// Local minimum on a (possibly non-cubic) integer box with corrector start
/// fields `inits`.
fn box_value(
    medium: &RandomMedium,
    m: &Mat2,
    b: &LatticeBox,
    cells_per_unit: usize,
    inits: Option<Vec<DisplacementField>>,
    opts: &SolveOptions,
) -> Result<(f64, bool, DisplacementField, Grid)> {
    let dim = medium.dim();
    let n = [(b.hi[0] - b.lo[0]) as usize, if dim == 2 { (b.hi[1] - b.lo[1]) as usize } else { 1 }];
    let h = 1.0 / cells_per_unit as f64;
    let grid = Grid::new(dim, [b.lo[0] as f64, b.lo[1] as f64], h, [n[0] * cells_per_unit, n[1] * cells_per_unit])?;
    let inits = match inits {
        Some(v) => v,
        None => vec![corrector_start(grid)?],
    };
    let shifted = Offset { inner: medium, m: *m };
    let obj = LocalObjective { medium: &shifted };
    let r = minimize_from(&obj, inits, &SolveOptions { restarts: 1, ..opts.clone() })?;
    Ok((r.energy, r.converged, r.field, grid))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionReport {
    pub parts: Vec<LatticeBox>,
    /// `sum_i mu(A_i)`.
    pub parts_sum: f64,
    /// `mu(A)`, best of the independent start and the glued start.
    pub whole: f64,
    /// `max(0, mu(A) - sum_i mu(A_i))`.
    pub slack: f64,
    /// `slack / sum_i mu(A_i)`.
    pub relative_slack: f64,
    /// Same, with `mu(A)` from the affine start only.
    pub independent_relative_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceReport {
    pub shift: [i64; 2],
    /// Normalized `mu(shift(omega, z), A)`.
    pub shifted_medium: f64,
    /// Normalized `mu(omega, A + z)`.
    pub shifted_box: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubadditivityReport {
    pub h: f64,
    pub partitions: Vec<PartitionReport>,
    pub covariance: Vec<CovarianceReport>,
    /// Every computed normalized value satisfied `0 <= mu/|B| <= c2(|E|^p + 1)`.
    pub bounded: bool,
    pub max_relative_slack: f64,
    pub max_covariance_difference: f64,
    pub all_converged: bool,
    pub violations: Vec<String>,
}

/// Discrete checks of the subadditive-process axioms for `mu(B) = m_omega(u_M, B)`
/// on integer boxes: subadditivity over each partition of `a`, covariance
/// under the lattice shifts `zs`, and the growth bound.
pub fn subadditive_properties_check(
    medium: &RandomMedium,
    m: &Mat2,
    a: LatticeBox,
    partitions: &[Vec<LatticeBox>],
    zs: &[[i64; 2]],
    cells_per_unit: usize,
    opts: &SolveOptions,
) -> Result<SubadditivityReport> {
    let dim = medium.dim();
    let upper = growth_upper(medium, m);
    let mut violations = Vec::new();
    let mut bounded = true;
    let mut all_converged = true;
    let mut check_bound = |what: &str, energy: f64, b: &LatticeBox, violations: &mut Vec<String>| {
        let v = energy / b.len() as f64;
        if !(v >= 0.0 && v <= upper * (1.0 + 1e-12)) {
            bounded = false;
            violations.push(format!("{what}: normalized value {v} outside [0, {upper}]"));
        }
    };

    for part in partitions {
        let cells: usize = part.iter().map(|b| b.len()).sum();
        let disjoint = part.iter().enumerate().all(|(i, p)| {
            part[..i].iter().all(|q| (0..dim).any(|ax| p.hi[ax] <= q.lo[ax] || q.hi[ax] <= p.lo[ax]))
        });
        if cells != a.len() || !disjoint || !part.iter().all(|p| a.contains_box(p)) {
            return Err(invalid("partition is not a disjoint cover of the box"));
        }
    }

    let (e_whole, conv_whole, _, grid_a) = box_value(medium, m, &a, cells_per_unit, None, opts)?;
    all_converged &= conv_whole;
    check_bound("whole box", e_whole, &a, &mut violations);

    let mut reports = Vec::with_capacity(partitions.len());
    for part in partitions {
        let solved: Vec<(f64, bool, DisplacementField, Grid)> = part
            .par_iter()
            .map(|b| box_value(medium, m, b, cells_per_unit, None, opts))
            .collect::<Result<_>>()?;
        // Glue the part correctors; they vanish on every part boundary, so
        // the glued field is admissible for the whole box.
        let mut glued = vec![0.0; grid_a.num_nodes() * dim];
        let mut parts_sum = 0.0;
        for (b, (e, conv, phi, g)) in part.iter().zip(&solved) {
            parts_sum += e;
            all_converged &= conv;
            check_bound("part", *e, b, &mut violations);
            let off = [
                ((b.lo[0] - a.lo[0]) as usize) * cells_per_unit,
                if dim == 2 { ((b.lo[1] - a.lo[1]) as usize) * cells_per_unit } else { 0 },
            ];
            let nodes = g.nodes();
            for j in 0..nodes[1] {
                for i in 0..nodes[0] {
                    let src = g.node_index(i, j);
                    let dst = grid_a.node_index(i + off[0], j + off[1]);
                    for k in 0..dim {
                        let v = phi.values()[src * dim + k];
                        if v != 0.0 {
                            glued[dst * dim + k] = v;
                        }
                    }
                }
            }
        }
        let start = corrector_start(grid_a)?;
        let mut init = start.clone();
        init.set_free_values(&glued);
        let shifted = Offset { inner: medium, m: *m };
        let obj = LocalObjective { medium: &shifted };
        let from_glue = descend(&obj, init, &SolveOptions { restarts: 1, ..opts.clone() });
        all_converged &= from_glue.converged;
        let whole = e_whole.min(from_glue.energy);
        let slack = (whole - parts_sum).max(0.0);
        let rel = |s: f64| if parts_sum > 0.0 { s / parts_sum } else { 0.0 };
        reports.push(PartitionReport {
            parts: part.clone(),
            parts_sum,
            whole,
            slack,
            relative_slack: rel(slack),
            independent_relative_slack: rel((e_whole - parts_sum).max(0.0)),
        });
    }

    let mut covariance = Vec::with_capacity(zs.len());
    for &z in zs {
        let z = if dim == 1 { [z[0], 0] } else { z };
        let moved_medium = medium.shift(z)?;
        let moved_box = a.translate(z);
        let (e1, c1, _, _) = box_value(&moved_medium, m, &a, cells_per_unit, None, opts)?;
        let (e2, c2, _, _) = box_value(medium, m, &moved_box, cells_per_unit, None, opts)?;
        all_converged &= c1 && c2;
        check_bound("shifted medium", e1, &a, &mut violations);
        check_bound("shifted box", e2, &moved_box, &mut violations);
        let (v1, v2) = (e1 / a.len() as f64, e2 / a.len() as f64);
        let difference = (v1 - v2).abs();
        if difference > 1e-10 {
            violations.push(format!("covariance under shift {z:?}: {v1} vs {v2}"));
        }
        covariance.push(CovarianceReport { shift: z, shifted_medium: v1, shifted_box: v2, difference });
    }

    let max_relative_slack = reports.iter().map(|r| r.relative_slack).fold(0.0, f64::max);
    let max_covariance_difference = covariance.iter().map(|c| c.difference).fold(0.0, f64::max);
    Ok(SubadditivityReport {
        h: 1.0 / cells_per_unit as f64,
        partitions: reports,
        covariance,
        bounded,
        max_relative_slack,
        max_covariance_difference,
        all_converged,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> SolveOptions {
        SolveOptions { tolerance: 1e-12, ..Default::default() }
    }

    fn laminate(dim: usize, p: f64) -> MediumSpec {
        MediumSpec::new(dim, p, CoefficientField::Laminate { axis: 0, values: [1.0, 4.0], fraction: 0.5 }, [1.0, 4.0])
            .unwrap()
            .with_mode(GradientMode::Full)
    }

    #[test]
    fn constant_medium_cell_value_is_affine_energy() {
        let medium = MediumSpec::constant(2, 2.0, 1.0);
        let m = Mat2::new(0.0, 1.0, 1.0, 0.0) * 0.5;
        let cv = minimize_cell(&CellProblem::new(m, [0.3, -0.2], 1.0, &medium, 16), &tight()).unwrap();
        // The affine field is the exact discrete minimizer here.
        assert!((cv.value - 2.0).abs() < 1e-10, "{}", cv.value);
        let zero = minimize_cell(&CellProblem::new(Mat2::ZERO, [0.0, 0.0], 1.0, &medium, 16), &tight()).unwrap();
        assert_eq!(zero.value, 0.0);
        assert!(zero.field.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laminate_harmonic_means() {
        for (p, want) in [(2.0, 1.6), (1.5, (0.5 * (1.0 + 1.0 / 16.0f64)).powf(-0.5)), (3.0, 0.75f64.powi(-2))] {
            let medium = laminate(1, p);
            let r = homogenize_det(&medium, &Mat2::new(1.0, 0.0, 0.0, 0.0), [0.0, 0.0], &[4.0, 8.0], 8, &tight()).unwrap();
            assert!((r.estimate - want).abs() < 0.02 * want, "p = {p}: {} vs {want}", r.estimate);
        }
    }

    #[test]
    fn skew_part_does_not_change_cell_values() {
        let medium = MediumSpec::new(2, 2.0, CoefficientField::Checkerboard { values: [1.0, 3.0] }, [1.0, 3.0]).unwrap();
        let m = Mat2::new(0.4, 0.1, 0.1, -0.2);
        let skew = Mat2::new(0.0, 0.7, -0.7, 0.0);
        let a = minimize_cell(&CellProblem::new(m, [0.0, 0.0], 2.0, &medium, 16), &tight()).unwrap();
        let b = minimize_cell(&CellProblem::new(m + skew, [0.0, 0.0], 2.0, &medium, 16), &tight()).unwrap();
        assert!((a.value - b.value).abs() <= 2e-8 * a.value);
    }

    #[test]
    fn refinement_never_increases_the_value() {
        let medium = MediumSpec::new(2, 2.0, CoefficientField::Checkerboard { values: [1.0, 5.0] }, [1.0, 5.0]).unwrap();
        let m = Mat2::new(0.3, 0.0, 0.0, 0.1);
        let coarse = minimize_cell(&CellProblem::new(m, [1.0, 1.0], 2.0, &medium, 16), &tight()).unwrap();
        let fine = minimize_cell(&CellProblem::new(m, [1.0, 1.0], 2.0, &medium, 32), &tight()).unwrap();
        assert!(fine.value <= coarse.value * (1.0 + 1e-8));
    }

    #[test]
    fn rescaling_identity_is_exact_on_matched_grids() {
        let medium = laminate(2, 2.0);
        let m = Mat2::new(0.5, 0.2, 0.2, 0.1);
        let c = rescaling_identity_check(&medium, &m, 1.0, 0.125, [0.5, 0.5], 64, &tight()).unwrap();
        assert!(c.residual <= 1e-8, "{c:?}");
        assert!(matches!(
            rescaling_identity_check(&medium, &m, 1.0, 0.1, [0.5, 0.5], 64, &tight()),
            Err(Error::GridMismatch(_)) | Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn one_dimensional_oracle() {
        let lam = MediumSpec::new(1, 2.0, CoefficientField::Laminate { axis: 0, values: [1.0, 4.0], fraction: 0.5 }, [1.0, 4.0])
            .unwrap()
            .with_mode(GradientMode::Full);
        assert!((one_dim_w_hom(&lam, &Mat2::new(1.0, 0.0, 0.0, 0.0)).unwrap() - 1.6).abs() < 1e-14);
        assert_eq!(one_dim_w_hom(&MediumSpec::constant(2, 2.0, 1.0), &Mat2::ZERO), None);
    }

    #[test]
    fn partitions_cover_the_box() {
        let a = LatticeBox::new(2, [0, 0], [4, 4]);
        for seed in 0..20 {
            let parts = random_partition(2, a, 4, seed);
            assert_eq!(parts.iter().map(|b| b.len()).sum::<usize>(), 16);
            assert_eq!(parts.len(), 4);
        }
    }

    #[test]
    fn subadditive_checks_on_a_small_random_medium() {
        let spec = MediumSpec::new(
            2,
            2.0,
            CoefficientField::RandomCheckerboard { values: [1.0, 4.0], probability: 0.5 },
            [1.0, 4.0],
        )
        .unwrap();
        let a = LatticeBox::new(2, [0, 0], [2, 2]);
        let omega = RandomMedium::sample(&spec, 11, a).unwrap();
        let m = Mat2::new(1.0, 0.0, 0.0, 0.0);
        let parts = vec![random_partition(2, a, 3, 1)];
        let r = subadditive_properties_check(&omega, &m, a, &parts, &[[1, 0], [0, 1]], 8, &tight()).unwrap();
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert!(r.bounded);
        assert_eq!(r.max_covariance_difference, 0.0);
        assert!(r.max_relative_slack <= 1e-12);
    }
}
