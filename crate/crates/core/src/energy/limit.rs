use serde::{Deserialize, Serialize};

use super::field::DisplacementField;
use super::strain::local_energy;
use crate::error::{invalid, Result};
use crate::grid::Grid;
use crate::kernel::{phi_rho, SupportBody};
use crate::media::Density;
use crate::tensor::Mat2;

/// Flat piece of a jump set: a point in 1D, a segment centred at `point`
/// with length `extent` in 2D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Facet {
    pub point: [f64; 2],
    pub normal: [f64; 2],
    #[serde(default)]
    pub extent: f64,
}

impl Facet {
    pub fn new(point: [f64; 2], normal: [f64; 2], extent: f64) -> Self {
        Facet { point, normal, extent }
    }

    /// Segment end points; both equal `point` in 1D.
    pub fn endpoints(&self, dim: usize) -> ([f64; 2], [f64; 2]) {
        if dim == 1 {
            return (self.point, self.point);
        }
        let t = [-self.normal[1], self.normal[0]];
        let half = 0.5 * self.extent;
        (
            [self.point[0] - half * t[0], self.point[1] - half * t[1]],
            [self.point[0] + half * t[0], self.point[1] + half * t[1]],
        )
    }

    /// `H^{n-1}` measure: 1 in 1D, the length in 2D.
    pub fn measure(&self, dim: usize) -> f64 {
        if dim == 1 {
            1.0
        } else {
            self.extent
        }
    }
}

/// Displacement on one piece of a competitor.
#[derive(Debug, Clone, PartialEq)]
pub enum PieceField {
    /// `x -> M x + b`; only `M` enters the energy.
    Affine { gradient: Mat2 },
    /// Grid field covering exactly the piece.
    Sampled(DisplacementField),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub field: PieceField,
}

/// Piecewise-smooth competitor of the limit functional: box-shaped smooth
/// pieces separated by flat facets.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCompetitor {
    pub dim: usize,
    pub domain: ([f64; 2], [f64; 2]),
    pub pieces: Vec<Piece>,
    pub jumps: Vec<Facet>,
}

impl PiecewiseCompetitor {
    /// Single affine piece, no jumps.
    pub fn affine(dim: usize, domain: ([f64; 2], [f64; 2]), gradient: Mat2) -> Self {
        PiecewiseCompetitor {
            dim,
            domain,
            pieces: vec![Piece { lo: domain.0, hi: domain.1, field: PieceField::Affine { gradient } }],
            jumps: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim;
        if !(dim == 1 || dim == 2) {
            return Err(invalid("competitor dimension must be 1 or 2"));
        }
        let vol = |lo: [f64; 2], hi: [f64; 2]| (0..dim).map(|a| hi[a] - lo[a]).product::<f64>();
        let (dlo, dhi) = self.domain;
        let total = vol(dlo, dhi);
        if !(total > 0.0) {
            return Err(invalid("competitor domain is empty"));
        }
        let tol = 1e-9 * total.max(1.0);
        let mut covered = 0.0;
        for (n, p) in self.pieces.iter().enumerate() {
            if (0..dim).any(|a| !(p.lo[a] < p.hi[a]) || p.lo[a] < dlo[a] - 1e-12 || p.hi[a] > dhi[a] + 1e-12) {
                return Err(invalid(format!("piece {n} is empty or leaves the domain")));
            }
            for q in &self.pieces[..n] {
                let overlap: f64 = (0..dim).map(|a| (p.hi[a].min(q.hi[a]) - p.lo[a].max(q.lo[a])).max(0.0)).product();
                if overlap > tol {
                    return Err(invalid(format!("piece {n} overlaps an earlier piece")));
                }
            }
            if let PieceField::Sampled(u) = &p.field {
                let g = u.grid();
                if g.dim() != dim
                    || (0..dim).any(|a| (g.origin()[a] - p.lo[a]).abs() > 1e-12 || (g.upper()[a] - p.hi[a]).abs() > 1e-9)
                {
                    return Err(invalid(format!("sampled field of piece {n} does not cover the piece")));
                }
            }
            covered += vol(p.lo, p.hi);
        }
        if (covered - total).abs() > tol {
            return Err(invalid("pieces do not partition the domain"));
        }
        for (n, f) in self.jumps.iter().enumerate() {
            let norm = f.normal[0].hypot(if dim == 2 { f.normal[1] } else { 0.0 });
            if (norm - 1.0).abs() > 1e-9 || (dim == 1 && f.normal[1] != 0.0) {
                return Err(invalid(format!("facet {n} normal is not a unit vector")));
            }
            if dim == 2 && !(f.extent > 0.0) {
                return Err(invalid(format!("facet {n} has non-positive extent")));
            }
        }
        Ok(())
    }
}

/// Midpoint points per unit length used for affine pieces in varying media.
const BULK_QUADRATURE_PER_UNIT: f64 = 256.0;

fn bulk_term<D: Density + ?Sized>(p: &Piece, dim: usize, medium: &D) -> Result<f64> {
    match &p.field {
        PieceField::Sampled(u) => Ok(local_energy(u, medium)),
        PieceField::Affine { gradient } => {
            let mut cells = [1usize; 2];
            for a in 0..dim {
                cells[a] = ((p.hi[a] - p.lo[a]) * BULK_QUADRATURE_PER_UNIT).ceil().max(1.0) as usize;
            }
            let hx = [(p.hi[0] - p.lo[0]) / cells[0] as f64, (p.hi[1] - p.lo[1]) / cells[1] as f64];
            let w = if dim == 1 { hx[0] } else { hx[0] * hx[1] };
            // Grid only supplies the index bookkeeping here.
            let g = Grid::new(dim, p.lo, 1.0, cells)?;
            let mut sum = 0.0;
            for j in 0..g.cells()[1] {
                for i in 0..g.cells()[0] {
                    let x = [p.lo[0] + (i as f64 + 0.5) * hx[0], p.lo[1] + (j as f64 + 0.5) * hx[1]];
                    sum += medium.eval(x, gradient);
                }
            }
            Ok(w * sum)
        }
    }
}

/// `alpha * int W(x, e(u)) + beta * sum_facets phi(nu) |facet|`.
pub fn limit_energy<D: Density + ?Sized>(
    u: &PiecewiseCompetitor,
    medium: &D,
    alpha: f64,
    beta: f64,
    s: &SupportBody,
) -> Result<f64> {
    u.validate()?;
    let mut bulk = 0.0;
    for p in &u.pieces {
        bulk += bulk_term(p, u.dim, medium)?;
    }
    let mut surface = 0.0;
    for f in &u.jumps {
        surface += phi_rho(f.normal, s)? * f.measure(u.dim);
    }
    Ok(alpha * bulk + beta * surface)
}
