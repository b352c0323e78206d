//! Kernel geometry and discrete convolution.
//!
//! A kernel is a density profile `rho` supported on a convex symmetric body
//! `S`. The body induces the gauge `|x|_S`, the anisotropic surface density
//! `phi(nu) = 2 sup_{y in S} |y . nu|`, and chord lengths `mu_xi`. The rescaled
//! kernel `rho_eps(x) = eps^-n rho(x / eps)` is sampled on the grid lattice as a
//! [`MollifierStencil`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::energy::Facet;
use crate::error::{invalid, Error, Result};

const SUPPORT_SLACK: f64 = 1e-12;

/// Serializable description of a support body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum SupportShape {
    /// Axis-aligned box with the given half-widths (one per axis).
    Box { half_widths: Vec<f64> },
    /// Euclidean ball.
    Ball { radius: f64, dim: usize },
    /// Convex hull of the vertices and their negatives.
    Polytope { vertices: Vec<Vec<f64>> },
}

/// A facet of a symmetric 2D polygon: `normal . y <= offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct HalfPlane {
    normal: [f64; 2],
    offset: f64,
}

/// Bounded convex symmetric body with the origin in its interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SupportShape", into = "SupportShape")]
pub struct SupportBody {
    shape: SupportShape,
    dim: usize,
    // Hull vertices (counter-clockwise) and facets, polytopes only.
    #[serde(skip)]
    hull: Vec<[f64; 2]>,
    #[serde(skip)]
    facets: Vec<HalfPlane>,
}

impl From<SupportBody> for SupportShape {
    fn from(s: SupportBody) -> Self {
        s.shape
    }
}

impl TryFrom<SupportShape> for SupportBody {
    type Error = Error;

    fn try_from(shape: SupportShape) -> Result<Self> {
        match &shape {
            SupportShape::Box { half_widths } => {
                let dim = half_widths.len();
                if !(dim == 1 || dim == 2) {
                    return Err(invalid("box support needs 1 or 2 half-widths"));
                }
                if half_widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                    return Err(invalid("box half-widths must be positive and finite"));
                }
                Ok(SupportBody { shape, dim, hull: vec![], facets: vec![] })
            }
            SupportShape::Ball { radius, dim } => {
                if !(*dim == 1 || *dim == 2) {
                    return Err(invalid("ball support dimension must be 1 or 2"));
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(invalid("ball radius must be positive and finite"));
                }
                let dim = *dim;
                Ok(SupportBody { shape, dim, hull: vec![], facets: vec![] })
            }
            SupportShape::Polytope { vertices } => {
                let dim = vertices.first().map(|v| v.len()).unwrap_or(0);
                if !(dim == 1 || dim == 2) || vertices.iter().any(|v| v.len() != dim) {
                    return Err(invalid("polytope vertices must all have dimension 1 or 2"));
                }
                if vertices.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(invalid("polytope vertices must be finite"));
                }
                if dim == 1 {
                    let w = vertices.iter().map(|v| v[0].abs()).fold(0.0, f64::max);
                    if w <= 0.0 {
                        return Err(invalid("origin is not interior to the polytope"));
                    }
                    return Ok(SupportBody { shape, dim, hull: vec![], facets: vec![] });
                }
                let mut pts: Vec<[f64; 2]> = Vec::with_capacity(2 * vertices.len());
                for v in vertices {
                    pts.push([v[0], v[1]]);
                    pts.push([-v[0], -v[1]]);
                }
                let hull = convex_hull(pts);
                if hull.len() < 3 {
                    return Err(invalid("polytope is degenerate (collinear vertices)"));
                }
                let mut facets = Vec::with_capacity(hull.len());
                for k in 0..hull.len() {
                    let a = hull[k];
                    let b = hull[(k + 1) % hull.len()];
                    // Outward normal of a counter-clockwise edge.
                    let mut n = [b[1] - a[1], a[0] - b[0]];
                    let len = (n[0] * n[0] + n[1] * n[1]).sqrt();
                    n = [n[0] / len, n[1] / len];
                    let offset = n[0] * a[0] + n[1] * a[1];
                    if offset <= 1e-14 {
                        return Err(invalid("origin is not interior to the polytope"));
                    }
                    facets.push(HalfPlane { normal: n, offset });
                }
                Ok(SupportBody { shape, dim, hull, facets })
            }
        }
    }
}

/// Andrew's monotone chain; returns the hull counter-clockwise without
/// collinear points.
fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

impl SupportBody {
    pub fn new(shape: SupportShape) -> Result<Self> {
        Self::try_from(shape)
    }

    pub fn ball(radius: f64, dim: usize) -> Result<Self> {
        Self::new(SupportShape::Ball { radius, dim })
    }

    pub fn cube(half_widths: &[f64]) -> Result<Self> {
        Self::new(SupportShape::Box { half_widths: half_widths.to_vec() })
    }

    pub fn polytope(vertices: &[[f64; 2]]) -> Result<Self> {
        Self::new(SupportShape::Polytope {
            vertices: vertices.iter().map(|v| v.to_vec()).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &SupportShape {
        &self.shape
    }

    /// Minkowski gauge `|x|_S = inf { lambda > 0 : x in lambda S }`.
    pub fn gauge(&self, x: [f64; 2]) -> f64 {
        match &self.shape {
            SupportShape::Box { half_widths } => (0..self.dim)
                .map(|a| x[a].abs() / half_widths[a])
                .fold(0.0, f64::max),
            SupportShape::Ball { radius, .. } => norm(x, self.dim) / radius,
            SupportShape::Polytope { vertices } => {
                if self.dim == 1 {
                    let w = vertices.iter().map(|v| v[0].abs()).fold(0.0, f64::max);
                    x[0].abs() / w
                } else {
                    self.facets
                        .iter()
                        .map(|f| (f.normal[0] * x[0] + f.normal[1] * x[1]) / f.offset)
                        .fold(0.0, f64::max)
                }
            }
        }
    }

    /// Support function `sup_{y in S} y . v` (equal to `sup |y . v|` by symmetry).
    pub fn support(&self, v: [f64; 2]) -> f64 {
        match &self.shape {
            SupportShape::Box { half_widths } => {
                (0..self.dim).map(|a| half_widths[a] * v[a].abs()).sum()
            }
            SupportShape::Ball { radius, .. } => radius * norm(v, self.dim),
            SupportShape::Polytope { vertices } => {
                if self.dim == 1 {
                    let w = vertices.iter().map(|p| p[0].abs()).fold(0.0, f64::max);
                    w * v[0].abs()
                } else {
                    self.hull
                        .iter()
                        .map(|p| (p[0] * v[0] + p[1] * v[1]).abs())
                        .fold(0.0, f64::max)
                }
            }
        }
    }

    /// Lebesgue measure of `S`.
    pub fn volume(&self) -> f64 {
        match &self.shape {
            SupportShape::Box { half_widths } => half_widths.iter().map(|w| 2.0 * w).product(),
            SupportShape::Ball { radius, .. } => {
                if self.dim == 1 {
                    2.0 * radius
                } else {
                    PI * radius * radius
                }
            }
            SupportShape::Polytope { vertices } => {
                if self.dim == 1 {
                    2.0 * vertices.iter().map(|v| v[0].abs()).fold(0.0, f64::max)
                } else {
                    let n = self.hull.len();
                    0.5 * (0..n)
                        .map(|k| {
                            let a = self.hull[k];
                            let b = self.hull[(k + 1) % n];
                            a[0] * b[1] - a[1] * b[0]
                        })
                        .sum::<f64>()
                }
            }
        }
    }

    /// Half-widths of the smallest axis-aligned box containing `S`.
    pub fn bounding_half_widths(&self) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (a, o) in out.iter_mut().enumerate().take(self.dim) {
            let mut e = [0.0; 2];
            e[a] = 1.0;
            *o = self.support(e);
        }
        out
    }

    /// Largest Euclidean norm of a point of `S`.
    pub fn circumradius(&self) -> f64 {
        match &self.shape {
            SupportShape::Box { half_widths } => half_widths.iter().map(|w| w * w).sum::<f64>().sqrt(),
            SupportShape::Ball { radius, .. } => *radius,
            SupportShape::Polytope { .. } => {
                if self.dim == 1 {
                    self.support([1.0, 0.0])
                } else {
                    self.hull.iter().map(|p| norm(*p, 2)).fold(0.0, f64::max)
                }
            }
        }
    }

    /// Radius of the largest centred Euclidean ball inside `S`.
    pub fn inradius(&self) -> f64 {
        match &self.shape {
            SupportShape::Box { half_widths } => half_widths.iter().cloned().fold(f64::INFINITY, f64::min),
            SupportShape::Ball { radius, .. } => *radius,
            SupportShape::Polytope { .. } => {
                if self.dim == 1 {
                    self.support([1.0, 0.0])
                } else {
                    self.facets.iter().map(|f| f.offset).fold(f64::INFINITY, f64::min)
                }
            }
        }
    }
}

fn norm(x: [f64; 2], dim: usize) -> f64 {
    if dim == 1 {
        x[0].abs()
    } else {
        x[0].hypot(x[1])
    }
}

/// `|x|_S`.
pub fn gauge(x: [f64; 2], s: &SupportBody) -> f64 {
    s.gauge(x)
}

/// Anisotropic surface density `phi(nu) = 2 sup_{y in S} |y . nu|`.
///
/// Positively 1-homogeneous and even in `nu`, so the unit constraint is not
/// enforced; only the zero vector is rejected.
pub fn phi_rho(nu: [f64; 2], s: &SupportBody) -> Result<f64> {
    let n = norm(nu, s.dim);
    if !(n > 0.0) || !n.is_finite() {
        return Err(invalid("phi_rho needs a non-zero finite direction"));
    }
    Ok(2.0 * s.support(nu))
}

/// Length of the chord of `S` through the origin in direction `xi`.
pub fn mu_xi(xi: [f64; 2], s: &SupportBody) -> Result<f64> {
    let n = norm(xi, s.dim);
    if !(n > 0.0) || !n.is_finite() {
        return Err(invalid("mu_xi needs a non-zero finite direction"));
    }
    let unit = [xi[0] / n, xi[1] / n];
    Ok(2.0 / s.gauge(unit))
}

/// `max_xi mu_xi |<nu, xi>|` over `n_directions` equispaced unit directions
/// plus `nu` itself.
pub fn phi_via_slicing(nu: [f64; 2], s: &SupportBody, n_directions: usize) -> Result<f64> {
    if n_directions < 4 {
        return Err(invalid("phi_via_slicing needs at least 4 directions"));
    }
    let n = norm(nu, s.dim);
    if !(n > 0.0) || !n.is_finite() {
        return Err(invalid("phi_via_slicing needs a non-zero finite direction"));
    }
    let unit = [nu[0] / n, nu[1] / n];
    let score = |xi: [f64; 2]| -> Result<f64> {
        let dot = xi[0] * nu[0] + xi[1] * nu[1];
        Ok(mu_xi(xi, s)? * dot.abs())
    };
    let mut best = score(unit)?;
    if s.dim == 1 {
        return Ok(best.max(score([1.0, 0.0])?));
    }
    for j in 0..n_directions {
        let theta = 2.0 * PI * j as f64 / n_directions as f64;
        best = best.max(score([theta.cos(), theta.sin()])?);
    }
    Ok(best)
}

/// Anisotropic distance `d_S(x, [a, b])` from a point to a segment.
fn segment_gauge_distance(x: [f64; 2], a: [f64; 2], b: [f64; 2], s: &SupportBody) -> f64 {
    let at = |t: f64| s.gauge([x[0] - a[0] - t * (b[0] - a[0]), x[1] - a[1] - t * (b[1] - a[1])]);
    // Convex in t: golden-section search.
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (at(c), at(d));
    for _ in 0..80 {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = at(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = at(d);
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    at(0.0).min(at(1.0)).min(fc).min(fd)
}

fn segment_euclid_distance(x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ax = [x[0] - a[0], x[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { ((ax[0] * ab[0] + ax[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (ax[0] - t * ab[0]).hypot(ax[1] - t * ab[1])
}

/// Volume of the anisotropic tube `{x in domain : d_S(x, J) < h}` by counting
/// cell centres on a lattice of spacing `h / 16` anchored at `domain.0`.
pub fn tube_volume(
    interface: &[Facet],
    h: f64,
    s: &SupportBody,
    domain: ([f64; 2], [f64; 2]),
) -> Result<f64> {
    if interface.is_empty() {
        return Err(Error::EmptyInterface);
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("tube width must be positive"));
    }
    let dim = s.dim();
    let (lo, hi) = domain;
    let res = h / 16.0;
    let segments: Vec<([f64; 2], [f64; 2])> = interface.iter().map(|f| f.endpoints(dim)).collect();
    let bw = s.bounding_half_widths();
    let r_out = s.circumradius();
    let r_in = s.inradius();

    let mut cell_lo = [0usize; 2];
    let mut cell_hi = [1usize; 2];
    for a in 0..dim {
        let ncell = ((hi[a] - lo[a]) / res).ceil() as usize;
        let mut min_c = f64::INFINITY;
        let mut max_c = f64::NEG_INFINITY;
        for (p, q) in &segments {
            min_c = min_c.min(p[a].min(q[a]) - h * bw[a]);
            max_c = max_c.max(p[a].max(q[a]) + h * bw[a]);
        }
        let first = (((min_c - lo[a]) / res).floor().max(0.0)) as usize;
        let last = ((((max_c - lo[a]) / res).ceil()).max(0.0) as usize).min(ncell);
        cell_lo[a] = first.min(ncell);
        cell_hi[a] = last;
    }

    let mut count: u64 = 0;
    for j in cell_lo[1]..cell_hi[1] {
        for i in cell_lo[0]..cell_hi[0] {
            let mut x = [lo[0] + (i as f64 + 0.5) * res, 0.0];
            if dim == 2 {
                x[1] = lo[1] + (j as f64 + 0.5) * res;
                if x[1] > hi[1] {
                    continue;
                }
            }
            if x[0] > hi[0] {
                continue;
            }
            let inside = segments.iter().any(|&(a, b)| {
                let e = segment_euclid_distance(x, a, b);
                if e >= h * r_out {
                    false
                } else if e < h * r_in {
                    true
                } else {
                    segment_gauge_distance(x, a, b, s) < h
                }
            });
            if inside {
                count += 1;
            }
        }
    }
    Ok(count as f64 * res.powi(dim as i32))
}

/// Radial profile of the kernel as a function of the gauge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    Uniform,
    /// Proportional to `(1 - |x|_S)^exponent`.
    GaugePolynomial { exponent: f64 },
}

impl Profile {
    fn shape_value(&self, g: f64) -> f64 {
        if g > 1.0 + SUPPORT_SLACK {
            return 0.0;
        }
        match self {
            Profile::Uniform => 1.0,
            Profile::GaugePolynomial { exponent } => (1.0 - g).max(0.0).powf(*exponent),
        }
    }

    /// `int_S shape(|x|_S) dx / |S|`.
    fn mean_over_support(&self, dim: usize) -> f64 {
        match self {
            Profile::Uniform => 1.0,
            // n int_0^1 (1 - r)^q r^{n-1} dr
            Profile::GaugePolynomial { exponent: q } => {
                if dim == 1 {
                    1.0 / (q + 1.0)
                } else {
                    2.0 / ((q + 1.0) * (q + 2.0))
                }
            }
        }
    }
}

/// Convolution kernel `rho` with unit mass supported on `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelConfig", into = "KernelConfig")]
pub struct KernelSpec {
    support: SupportBody,
    profile: Profile,
    normalization: f64,
}

/// Serialized form of [`KernelSpec`]; the normalization is always recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub support: SupportBody,
    #[serde(default = "default_profile")]
    pub profile: Profile,
}

fn default_profile() -> Profile {
    Profile::Uniform
}

impl TryFrom<KernelConfig> for KernelSpec {
    type Error = Error;
    fn try_from(c: KernelConfig) -> Result<Self> {
        KernelSpec::new(c.support, c.profile)
    }
}

impl From<KernelSpec> for KernelConfig {
    fn from(k: KernelSpec) -> Self {
        KernelConfig { support: k.support, profile: k.profile }
    }
}

impl KernelSpec {
    pub fn new(support: SupportBody, profile: Profile) -> Result<Self> {
        if let Profile::GaugePolynomial { exponent } = profile {
            if !(exponent >= 0.0 && exponent.is_finite()) {
                return Err(invalid("gauge-polynomial exponent must be finite and >= 0"));
            }
        }
        let mass = support.volume() * profile.mean_over_support(support.dim());
        Ok(KernelSpec { normalization: 1.0 / mass, support, profile })
    }

    pub fn uniform(support: SupportBody) -> Self {
        Self::new(support, Profile::Uniform).expect("uniform profile is always valid")
    }

    pub fn support(&self) -> &SupportBody {
        &self.support
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    /// `rho(x)`.
    pub fn density(&self, x: [f64; 2]) -> f64 {
        self.normalization * self.profile.shape_value(self.support.gauge(x))
    }
}

/// Lattice sampling of `rho_eps`; offsets are in grid units.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifierStencil {
    pub dim: usize,
    pub offsets: Vec<[i64; 2]>,
    pub weights: Vec<f64>,
    pub epsilon: f64,
    pub h: f64,
}

/// Samples `rho_eps` at lattice offsets inside the closed body `eps S` and
/// renormalizes the weights to unit sum.
pub fn make_stencil(kernel: &KernelSpec, epsilon: f64, h: f64) -> Result<MollifierStencil> {
    if !(epsilon > 0.0 && h > 0.0 && epsilon.is_finite() && h.is_finite()) {
        return Err(invalid("epsilon and h must be positive"));
    }
    let dim = kernel.dim();
    let bw = kernel.support().bounding_half_widths();
    let reach = |a: usize| -> i64 {
        if a < dim {
            (epsilon * bw[a] / h + 1e-9).floor() as i64
        } else {
            0
        }
    };
    let (rx, ry) = (reach(0), reach(1));
    let mut offsets = Vec::new();
    let mut weights = Vec::new();
    let mut inside = 0usize;
    for j in -ry..=ry {
        for i in -rx..=rx {
            let x = [i as f64 * h / epsilon, j as f64 * h / epsilon];
            if kernel.support().gauge(x) > 1.0 + SUPPORT_SLACK {
                continue;
            }
            inside += 1;
            let w = kernel.density(x);
            if w > 0.0 {
                offsets.push([i, j]);
                weights.push(w);
            }
        }
    }
    let required = 3usize.pow(dim as u32);
    if inside < required {
        return Err(Error::KernelUnderResolved { found: inside, required });
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(MollifierStencil { dim, offsets, weights, epsilon, h })
}

/// Treatment of stencil samples that fall outside the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPolicy {
    /// Drop outside samples and renormalize the remaining weights.
    #[default]
    RestrictRenormalize,
    /// Outside samples contribute zero.
    ZeroExtend,
    /// Outside samples take the value of the nearest in-grid sample.
    Clamp,
}

/// `out(x) = sum_i w_i field(x - o_i)` on a `dims[0] x dims[1]` row-major grid.
pub fn convolve(
    field: &[f64],
    dims: [usize; 2],
    stencil: &MollifierStencil,
    policy: BoundaryPolicy,
) -> Vec<f64> {
    use rayon::prelude::*;
    assert_eq!(field.len(), dims[0] * dims[1], "field does not match grid dimensions");
    let (nx, ny) = (dims[0] as i64, dims[1] as i64);
    let mut out = vec![0.0; field.len()];
    out.par_chunks_mut(dims[0]).enumerate().for_each(|(j, row)| {
        let j = j as i64;
        for (i, slot) in row.iter_mut().enumerate() {
            let i = i as i64;
            let mut acc = 0.0;
            let mut mass = 0.0;
            for (o, w) in stencil.offsets.iter().zip(&stencil.weights) {
                let (mut si, mut sj) = (i - o[0], j - o[1]);
                let inside = si >= 0 && si < nx && sj >= 0 && sj < ny;
                if !inside {
                    match policy {
                        BoundaryPolicy::RestrictRenormalize | BoundaryPolicy::ZeroExtend => continue,
                        BoundaryPolicy::Clamp => {
                            si = si.clamp(0, nx - 1);
                            sj = sj.clamp(0, ny - 1);
                        }
                    }
                }
                acc += w * field[(sj * nx + si) as usize];
                mass += w;
            }
            *slot = match policy {
                BoundaryPolicy::RestrictRenormalize => acc / mass,
                _ => acc,
            };
        }
    });
    out
}

/// Transpose of [`convolve`] with the same stencil and policy, so that
/// `<convolve(a), b> = <a, convolve_adjoint(b)>`.
pub fn convolve_adjoint(
    field: &[f64],
    dims: [usize; 2],
    stencil: &MollifierStencil,
    policy: BoundaryPolicy,
) -> Vec<f64> {
    use rayon::prelude::*;
    assert_eq!(field.len(), dims[0] * dims[1], "field does not match grid dimensions");
    let (nx, ny) = (dims[0] as i64, dims[1] as i64);
    match policy {
        BoundaryPolicy::RestrictRenormalize | BoundaryPolicy::ZeroExtend => {
            let scaled: Vec<f64> = if policy == BoundaryPolicy::RestrictRenormalize {
                let ones = vec![1.0; field.len()];
                let mass = convolve(&ones, dims, stencil, BoundaryPolicy::ZeroExtend);
                field.iter().zip(&mass).map(|(f, m)| f / m).collect()
            } else {
                field.to_vec()
            };
            let mut out = vec![0.0; field.len()];
            out.par_chunks_mut(dims[0]).enumerate().for_each(|(j, row)| {
                let j = j as i64;
                for (i, slot) in row.iter_mut().enumerate() {
                    let i = i as i64;
                    let mut acc = 0.0;
                    for (o, w) in stencil.offsets.iter().zip(&stencil.weights) {
                        let (ti, tj) = (i + o[0], j + o[1]);
                        if ti >= 0 && ti < nx && tj >= 0 && tj < ny {
                            acc += w * scaled[(tj * nx + ti) as usize];
                        }
                    }
                    *slot = acc;
                }
            });
            out
        }
        BoundaryPolicy::Clamp => {
            // Clamped reads alias several targets onto one source; scatter in
            // fixed order.
            let mut out = vec![0.0; field.len()];
            for j in 0..ny {
                for i in 0..nx {
                    let b = field[(j * nx + i) as usize];
                    for (o, w) in stencil.offsets.iter().zip(&stencil.weights) {
                        let si = (i - o[0]).clamp(0, nx - 1);
                        let sj = (j - o[1]).clamp(0, ny - 1);
                        out[(sj * nx + si) as usize] += w * b;
                    }
                }
            }
            out
        }
    }
}
