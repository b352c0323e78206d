//! One-dimensional laboratory on `I = (0, 1)` with `w(0) = 0`, `w(1) = lambda`:
//!
//! ```text
//! G_eps(w) = (1/eps) int_I f( (1/2) int_{x-eps}^{x+eps} |w'|^p )
//! G(w)     = alpha int_I |w'|^p + 2 beta #J_w
//! ```
//!
//! The minimum of `G` over the datum class is `min(alpha lambda^p, 2 beta)`,
//! so the elastic and fracture branches cross at `(2 beta / alpha)^(1/p)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{
    limit_energy, nonlocal_energy, DisplacementField, FProfile, Facet, FunctionalParams, Piece, PieceField,
    PiecewiseCompetitor,
};
use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::kernel::{KernelSpec, SupportBody};
use crate::media::{GradientMode, MediumSpec};
use crate::solve::{descend, Objective, SolveOptions, SolveResult};
use crate::tensor::Mat2;

/// Grid cells per `eps` unless set explicitly. At `eps / 8` the discrete
/// jump already costs `2 beta (1 + 1/16)`.
pub const DEFAULT_CELLS_PER_EPS: f64 = 32.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OneDProblem {
    pub lambda: f64,
    pub p: f64,
    pub f: FProfile,
    pub epsilon: f64,
    pub cells: usize,
}

impl OneDProblem {
    pub fn new(lambda: f64, p: f64, f: FProfile, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(invalid("epsilon must be positive"));
        }
        let cells = (DEFAULT_CELLS_PER_EPS / epsilon).ceil() as usize;
        let pb = OneDProblem { lambda, p, f, epsilon, cells };
        pb.validate()?;
        Ok(pb)
    }

    pub fn with_cells(self, cells: usize) -> Result<Self> {
        let pb = OneDProblem { cells, ..self };
        pb.validate()?;
        Ok(pb)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let pb = OneDProblem { lambda, ..self.clone() };
        pb.validate()?;
        Ok(pb)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(invalid("p must exceed 1"));
        }
        self.f.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(invalid("epsilon must lie in (0, 1/2)"));
        }
        if self.cells == 0 || self.h() > self.epsilon / 8.0 * (1.0 + 1e-12) {
            return Err(Error::Resolution(format!("h = {} exceeds eps/8 = {}", self.h(), self.epsilon / 8.0)));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn grid(&self) -> Grid {
        Grid::new(1, [0.0, 0.0], self.h(), [self.cells, 1]).expect("validated")
    }

    /// Uniform kernel `1/2` on `[-1, 1]`, `W = |w'|^p`, restrict-renormalize.
    pub fn params(&self) -> Result<FunctionalParams<MediumSpec>> {
        let kernel = KernelSpec::uniform(SupportBody::ball(1.0, 1)?);
        let medium = MediumSpec::constant(1, self.p, 1.0).with_mode(GradientMode::Full);
        FunctionalParams::new(self.epsilon, kernel, self.f.clone(), medium)
    }

    fn pinned(&self, values: impl Fn(f64) -> f64) -> DisplacementField {
        let g = self.grid();
        let lambda = self.lambda;
        DisplacementField::from_fn(g, |x| [values(x[0]), 0.0])
            .with_dirichlet(g.boundary_mask(), |x| [lambda * x[0], 0.0])
            .expect("mask matches grid")
    }

    /// `x -> lambda x`.
    pub fn affine(&self) -> DisplacementField {
        let lambda = self.lambda;
        self.pinned(|x| lambda * x)
    }

    /// `0` up to the midpoint node, `lambda` after it: a single one-cell ramp.
    pub fn ramp(&self) -> DisplacementField {
        let (lambda, mid) = (self.lambda, (self.cells / 2) as f64 * self.h());
        self.pinned(|x| if x <= mid + 0.25 * self.h() { 0.0 } else { lambda })
    }

    /// `(2 beta / alpha)^(1/p)`.
    pub fn predicted_crossover(&self) -> f64 {
        (2.0 * self.f.beta() / self.f.alpha()).powf(1.0 / self.p)
    }

    /// `min(alpha lambda^p, 2 beta)`.
    pub fn limit_minimum(&self) -> f64 {
        (self.f.alpha() * self.lambda.powf(self.p)).min(2.0 * self.f.beta())
    }
}

/// `G_eps(w)` for a scalar field on the problem's grid.
pub fn g_eps_energy(w: &DisplacementField, problem: &OneDProblem) -> Result<f64> {
    problem.validate()?;
    if w.dim() != 1 || w.grid() != &problem.grid() {
        return Err(Error::GridMismatch("field does not live on the problem grid".into()));
    }
    nonlocal_energy(w, &problem.params()?)
}

/// Competitor on `(0, 1)` with the given jump points; piece `k` has slope
/// `slopes[k]`.
pub fn competitor_1d(slopes: &[f64], jumps: &[f64]) -> Result<PiecewiseCompetitor> {
    if slopes.len() != jumps.len() + 1 {
        return Err(invalid("need one slope per piece"));
    }
    let mut cuts = vec![0.0];
    cuts.extend_from_slice(jumps);
    cuts.push(1.0);
    if cuts.windows(2).any(|c| !(c[0] < c[1])) {
        return Err(invalid("jump points must be increasing and inside (0, 1)"));
    }
    let pieces = slopes
        .iter()
        .enumerate()
        .map(|(k, &s)| Piece {
            lo: [cuts[k], 0.0],
            hi: [cuts[k + 1], 0.0],
            field: PieceField::Affine { gradient: Mat2::new(s, 0.0, 0.0, 0.0) },
        })
        .collect();
    Ok(PiecewiseCompetitor {
        dim: 1,
        domain: ([0.0, 0.0], [1.0, 0.0]),
        pieces,
        jumps: jumps.iter().map(|&x| Facet::new([x, 0.0], [1.0, 0.0], 0.0)).collect(),
    })
}

/// `alpha int |w'|^p + 2 beta #J_w`.
pub fn g_limit(w: &PiecewiseCompetitor, alpha: f64, beta: f64, p: f64) -> Result<f64> {
    if w.dim != 1 {
        return Err(invalid("one-dimensional competitor expected"));
    }
    let medium = MediumSpec::constant(1, p, 1.0).with_mode(GradientMode::Full);
    limit_energy(w, &medium, alpha, beta, &SupportBody::ball(1.0, 1)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Elastic,
    Fracture,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Elastic => "elastic",
            Branch::Fracture => "fracture",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    /// Lower of the two branch energies.
    pub energy: f64,
    pub branch: Branch,
    pub elastic_energy: f64,
    pub fracture_energy: f64,
    /// `min(alpha lambda^p, 2 beta)`.
    pub limit: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossoverResult {
    pub rows: Vec<SweepRow>,
    /// Zero of `E_elastic - E_fracture`, interpolated linearly between the
    /// last elastic and the first fracture row.
    pub lambda_star: f64,
    pub predicted: f64,
}

/// Minimizes from the affine and the ramp start; the lower energy wins,
/// the elastic branch on ties.
pub fn solve_branches(problem: &OneDProblem, opts: &SolveOptions) -> Result<(SweepRow, SolveResult)> {
    opts.validate()?;
    let params = problem.params()?;
    let nl = params.on_grid(&problem.grid())?;
    let obj: &dyn Objective = &nl;
    let (el, fr) = rayon::join(|| descend(obj, problem.affine(), opts), || descend(obj, problem.ramp(), opts));
    let fracture = fr.energy < el.energy - 1e-12 * el.energy.abs().max(1.0);
    let (branch, best) = if fracture { (Branch::Fracture, fr.clone()) } else { (Branch::Elastic, el.clone()) };
    let row = SweepRow {
        lambda: problem.lambda,
        energy: best.energy,
        branch,
        elastic_energy: el.energy,
        fracture_energy: fr.energy,
        limit: problem.limit_minimum(),
        iterations: best.iterations,
        converged: best.converged,
    };
    Ok((row, best))
}

/// Runs the sweep (entries in parallel, rows in input order) and locates the
/// first change of branch.
pub fn crossover(problem: &OneDProblem, lambdas: &[f64], opts: &SolveOptions) -> Result<CrossoverResult> {
    if lambdas.len() < 2 || lambdas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("lambda sweep needs at least two strictly increasing values"));
    }
    let problems = lambdas.iter().map(|&l| problem.with_lambda(l)).collect::<Result<Vec<_>>>()?;
    let rows: Vec<SweepRow> =
        problems.par_iter().map(|pb| solve_branches(pb, opts).map(|r| r.0)).collect::<Result<_>>()?;
    let k = rows
        .iter()
        .position(|r| r.branch == Branch::Fracture)
        .ok_or_else(|| Error::Study("sweep never reaches the fracture branch".into()))?;
    if k == 0 {
        return Err(Error::Study("sweep starts on the fracture branch; lower its first lambda".into()));
    }
    let d = |r: &SweepRow| r.elastic_energy - r.fracture_energy;
    let (a, b) = (&rows[k - 1], &rows[k]);
    let (da, db) = (d(a), d(b));
    let lambda_star = a.lambda + (b.lambda - a.lambda) * da / (da - db);
    Ok(CrossoverResult { rows, lambda_star, predicted: problem.predicted_crossover() })
}
