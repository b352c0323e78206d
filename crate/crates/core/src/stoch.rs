//! Monte-Carlo estimates of `m_omega(u_M, Q_t) / t^n` over iid random
//! checkerboards, and their ensemble behaviour as `t` grows.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{growth_upper, minimize_cell, CellProblem, CellValue};
use crate::error::{invalid, Error, Result};
use crate::media::{realization_seed, LatticeBox, MediumSpec, RandomMedium};
use crate::solve::SolveOptions;
use crate::tensor::Mat2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochStudy {
    pub medium: MediumSpec,
    pub m: Mat2,
    /// Integer cube sides.
    pub ts: Vec<u32>,
    pub samples: usize,
    pub base_seed: u64,
    /// Grid cells per lattice cell.
    pub cells_per_unit: usize,
    /// Realization caches are read from and written to this directory when set.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

impl StochStudy {
    pub fn validate(&self) -> Result<()> {
        self.medium.validate()?;
        if !self.medium.is_random() {
            return Err(invalid("stochastic studies need a random checkerboard medium"));
        }
        if self.ts.is_empty() || self.ts.iter().any(|&t| t < 4) {
            return Err(invalid("cube sides must be integers >= 4"));
        }
        if self.samples < 8 {
            return Err(invalid("at least 8 samples per cube size are needed"));
        }
        if self.cells_per_unit < 8 {
            return Err(invalid("at least 8 grid cells per lattice cell are needed"));
        }
        Ok(())
    }
}

/// Integer cube `Q_t(0)`: `[-floor(t/2), t - floor(t/2))` per axis.
pub fn centered_cube(dim: usize, t: u32) -> LatticeBox {
    let lo = -((t / 2) as i64);
    let hi = lo + t as i64;
    LatticeBox::new(dim, [lo, lo], [hi, hi])
}

fn cube_cell<'a>(medium: &'a RandomMedium, m: &Mat2, b: &LatticeBox, cells_per_unit: usize) -> CellProblem<&'a RandomMedium> {
    let side = (b.hi[0] - b.lo[0]) as f64;
    let center = [0.5 * (b.lo[0] + b.hi[0]) as f64, 0.5 * (b.lo[1] + b.hi[1]) as f64];
    let center = if medium.spec().dim == 1 { [center[0], 0.0] } else { center };
    CellProblem::new(*m, center, side, medium, cells_per_unit * side as usize)
}

/// Solves the cell problem of realization `seed` on the integer cube `cube`.
pub fn cell_value_on(
    medium: &RandomMedium,
    m: &Mat2,
    cube: &LatticeBox,
    cells_per_unit: usize,
    opts: &SolveOptions,
) -> Result<CellValue> {
    minimize_cell(&cube_cell(medium, m, cube, cells_per_unit), opts)
}

/// Draws realization `seed` around `Q_t(0)` and returns its normalized cell value.
pub fn sample_cell_value(
    spec: &MediumSpec,
    m: &Mat2,
    t: u32,
    seed: u64,
    cells_per_unit: usize,
    opts: &SolveOptions,
) -> Result<CellValue> {
    let cube = centered_cube(spec.dim, t);
    let omega = RandomMedium::sample(spec, seed, cube)?;
    cell_value_on(&omega, m, &cube, cells_per_unit, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochRow {
    pub t: u32,
    pub mean: f64,
    pub sd: f64,
    pub stderr: f64,
    pub seeds: Vec<u64>,
    pub values: Vec<f64>,
    pub converged: Vec<bool>,
    pub iterations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochResult {
    pub rows: Vec<StochRow>,
    /// Mean at the largest `t`.
    pub estimate: f64,
    /// `max(stderr, |mean(t_max) - mean(t_max / 2)|)`; the second term only
    /// when `t_max / 2` is in the study.
    pub error_bar: f64,
}

/// Largest fraction of unconverged solves a study tolerates.
pub const MAX_UNCONVERGED_FRACTION: f64 = 0.1;

/// Runs every `(t, i)` realization and reduces in index order.
pub fn ergodic_estimate(study: &StochStudy, opts: &SolveOptions) -> Result<StochResult> {
    study.validate()?;
    let dim = study.medium.dim;
    let upper = growth_upper(&study.medium, &study.m);
    let jobs: Vec<(u32, u64)> =
        study.ts.iter().flat_map(|&t| (0..study.samples as u64).map(move |i| (t, i))).collect();
    let solved: Vec<(u64, CellValue)> = jobs
        .par_iter()
        .map(|&(t, i)| {
            let seed = realization_seed(study.base_seed, t as u64, i);
            let cube = centered_cube(dim, t);
            let omega = match &study.cache_dir {
                Some(dir) => RandomMedium::load_or_sample(&study.medium, seed, cube, dir)?,
                None => RandomMedium::sample(&study.medium, seed, cube)?,
            };
            Ok((seed, cell_value_on(&omega, &study.m, &cube, study.cells_per_unit, opts)?))
        })
        .collect::<Result<_>>()?;

    let unconverged = solved.iter().filter(|(_, v)| !v.converged).count();
    if unconverged as f64 > MAX_UNCONVERGED_FRACTION * solved.len() as f64 {
        return Err(Error::Study(format!("{unconverged} of {} cell solves did not converge", solved.len())));
    }
    for (seed, v) in &solved {
        if !(v.value >= 0.0 && v.value <= upper * (1.0 + 1e-12)) {
            return Err(Error::Study(format!("realization {seed}: value {} violates the bound {upper}", v.value)));
        }
    }

    let mut rows = Vec::with_capacity(study.ts.len());
    for (k, &t) in study.ts.iter().enumerate() {
        let chunk = &solved[k * study.samples..(k + 1) * study.samples];
        let values: Vec<f64> = chunk.iter().map(|(_, v)| v.value).collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        rows.push(StochRow {
            t,
            mean,
            sd,
            stderr: sd / n.sqrt(),
            seeds: chunk.iter().map(|(s, _)| *s).collect(),
            values,
            converged: chunk.iter().map(|(_, v)| v.converged).collect(),
            iterations: chunk.iter().map(|(_, v)| v.iterations).collect(),
        });
    }
    let last = rows.iter().max_by_key(|r| r.t).unwrap();
    let mut error_bar = last.stderr;
    if let Some(half) = rows.iter().find(|r| 2 * r.t == last.t) {
        error_bar = error_bar.max((last.mean - half.mean).abs());
    }
    Ok(StochResult { estimate: last.mean, error_bar, rows })
}

/// Spearman rank correlation of `(x_i, y_i)` (no tie correction).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{CoefficientField, GradientMode};

    fn law(values: [f64; 2]) -> MediumSpec {
        MediumSpec::new(1, 2.0, CoefficientField::RandomCheckerboard { values, probability: 0.5 }, [1.0, 4.0])
            .unwrap()
            .with_mode(GradientMode::Full)
    }

    fn slope() -> Mat2 {
        Mat2::new(1.0, 0.0, 0.0, 0.0)
    }

    #[test]
    fn one_dimensional_value_is_the_cellwise_harmonic_mean() {
        let spec = law([1.0, 4.0]);
        let opts = SolveOptions { tolerance: 1e-12, ..Default::default() };
        let cube = centered_cube(1, 16);
        let omega = RandomMedium::sample(&spec, 5, cube).unwrap();
        let v = cell_value_on(&omega, &slope(), &cube, 8, &opts).unwrap();
        // Oracle: m/t = (mean over cells of 1/a)^-1 for W = a |w'|^2.
        let inv: f64 = (cube.lo[0]..cube.hi[0]).map(|k| 1.0 / omega.cell_value([k, 0])).sum::<f64>() / 16.0;
        assert!((v.value - 1.0 / inv).abs() < 1e-8, "{} vs {}", v.value, 1.0 / inv);
    }

    #[test]
    fn degenerate_law_has_no_variance() {
        let study = StochStudy {
            medium: law([1.0, 1.0]),
            m: slope(),
            ts: vec![4, 8],
            samples: 8,
            base_seed: 3,
            cells_per_unit: 8,
            cache_dir: None,
        };
        let r = ergodic_estimate(&study, &SolveOptions::default()).unwrap();
        for row in &r.rows {
            assert!(row.sd < 1e-9);
            assert!((row.mean - 1.0).abs() < 1e-8);
        }
        let zero = sample_cell_value(&study.medium, &Mat2::ZERO, 4, 1, 8, &SolveOptions::default()).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn studies_are_reproducible_and_shift_coupled() {
        let study = StochStudy {
            medium: law([1.0, 4.0]),
            m: slope(),
            ts: vec![4],
            samples: 8,
            base_seed: 9,
            cells_per_unit: 8,
            cache_dir: None,
        };
        let a = ergodic_estimate(&study, &SolveOptions::default()).unwrap();
        let b = ergodic_estimate(&study, &SolveOptions::default()).unwrap();
        assert_eq!(a, b);
        // Enlarging the t list leaves earlier draws alone.
        let wider = StochStudy { ts: vec![4, 8], ..study.clone() };
        let c = ergodic_estimate(&wider, &SolveOptions::default()).unwrap();
        assert_eq!(c.rows[0], a.rows[0]);

        let cube = centered_cube(1, 8);
        let omega = RandomMedium::sample(&study.medium, 17, cube).unwrap();
        let shifted = omega.shift([3, 0]).unwrap();
        let v1 = cell_value_on(&shifted, &slope(), &cube, 8, &SolveOptions::default()).unwrap();
        let v2 = cell_value_on(&omega, &slope(), &cube.translate([3, 0]), 8, &SolveOptions::default()).unwrap();
        assert!((v1.value - v2.value).abs() <= 1e-10);
    }

    #[test]
    fn invalid_studies_are_rejected() {
        let mut s = StochStudy {
            medium: law([1.0, 4.0]),
            m: slope(),
            ts: vec![2],
            samples: 8,
            base_seed: 0,
            cells_per_unit: 8,
            cache_dir: None,
        };
        assert!(s.validate().is_err());
        s.ts = vec![4];
        s.samples = 3;
        assert!(s.validate().is_err());
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[0.1, 0.2, 0.3]), 1.0);
    }
}
