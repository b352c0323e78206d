//! Energy densities `W(x, M)` of coefficient-scalar power-law form.
//!
//! Every builder produces `W(x, M) = a(x) |M + M^T|^p` (symmetrized mode) or
//! `W(x, M) = a(x) |M|^p` (full-gradient mode), where `a` is constant,
//! periodic (laminate, checkerboard) or an iid random checkerboard realization.
//! Custom densities plug in through the [`Density`] trait.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::tensor::Mat2;

/// Which gradient the density sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    /// Depends on `M + M^T` only.
    #[default]
    Symmetrized,
    /// Depends on the full matrix `M`.
    Full,
}

/// An energy density `W(x, M)`.
pub trait Density: Sync {
    fn dim(&self) -> usize;
    fn p(&self) -> f64;
    fn mode(&self) -> GradientMode;
    /// Declared growth constants `(c1, c2)`.
    fn bounds(&self) -> (f64, f64);
    /// `W(x, M)` together with `dW/dM`.
    fn eval_with_stress(&self, x: [f64; 2], m: &Mat2) -> (f64, Mat2);

    fn eval(&self, x: [f64; 2], m: &Mat2) -> f64 {
        self.eval_with_stress(x, m).0
    }

    /// `sum_t W(x, ms[t])` at one point; with `stress` set, each `ms[t]` is
    /// overwritten by `dW/dM(x, ms[t])`. Overridden where the coefficient
    /// lookup is worth sharing between samples.
    fn eval_samples(&self, x: [f64; 2], ms: &mut [Mat2], stress: bool) -> f64 {
        let mut acc = 0.0;
        for m in ms {
            let (w, s) = self.eval_with_stress(x, m);
            acc += w;
            if stress {
                *m = s;
            }
        }
        acc
    }

    /// Length scale of the coefficient pattern (lattice cell or period), if
    /// the density varies in space.
    fn period(&self) -> Option<f64> {
        None
    }

    /// The quantity raised to the power `p` in the growth bounds.
    fn growth_norm(&self, m: &Mat2) -> f64 {
        let m = m.truncate(self.dim());
        match self.mode() {
            GradientMode::Symmetrized => m.twice_sym().frob(),
            GradientMode::Full => m.frob(),
        }
    }
}

/// `a |E|^p` and its derivative in `M`, with `E = M + M^T` or `E = M`.
pub fn power_law(a: f64, p: f64, mode: GradientMode, dim: usize, m: &Mat2) -> (f64, Mat2) {
    let m = m.truncate(dim);
    let (e, factor) = match mode {
        GradientMode::Symmetrized => (m.twice_sym(), 2.0),
        GradientMode::Full => (m, 1.0),
    };
    let n2 = e.frob_sq();
    if n2 == 0.0 {
        return (0.0, Mat2::ZERO);
    }
    // p = 2 is the common case and powf dominates the cost of a cell.
    let np = if p == 2.0 { n2 } else { n2.powf(0.5 * p) };
    (a * np, e * (factor * a * p * np / n2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Base {
    /// `c |M + M^T|^p`; `iso-affine` is accepted as a synonym since affine
    /// offsets are disallowed.
    #[serde(alias = "iso-affine")]
    Iso { c: f64 },
}

impl Base {
    fn scale(&self) -> f64 {
        match self {
            Base::Iso { c } => *c,
        }
    }
}

/// Spatial coefficient `a(x)`; every periodic structure has period 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientField {
    Constant { a: f64 },
    /// `values.0` on `{frac(x_axis) < fraction}`, `values.1` elsewhere.
    Laminate { axis: usize, values: [f64; 2], fraction: f64 },
    /// `values.0` on unit cells with even index sum.
    Checkerboard { values: [f64; 2] },
    /// iid unit cells: `values.0` with probability `probability`, else `values.1`.
    RandomCheckerboard { values: [f64; 2], probability: f64 },
}

impl CoefficientField {
    fn values(&self) -> Vec<f64> {
        match self {
            CoefficientField::Constant { a } => vec![*a],
            CoefficientField::Laminate { values, .. }
            | CoefficientField::Checkerboard { values }
            | CoefficientField::RandomCheckerboard { values, .. } => values.to_vec(),
        }
    }

    /// Length of the coefficient period, `None` for constant fields.
    pub fn period(&self) -> Option<f64> {
        match self {
            CoefficientField::Constant { .. } => None,
            _ => Some(1.0),
        }
    }
}

/// Declarative description of a medium in the class `W(p, c1, c2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    pub dim: usize,
    pub p: f64,
    #[serde(default = "default_base")]
    pub base: Base,
    pub field: CoefficientField,
    pub bounds: [f64; 2],
    #[serde(default)]
    pub mode: GradientMode,
}

fn default_base() -> Base {
    Base::Iso { c: 1.0 }
}

impl MediumSpec {
    pub fn new(dim: usize, p: f64, field: CoefficientField, bounds: [f64; 2]) -> Result<Self> {
        let spec = MediumSpec { dim, p, base: default_base(), field, bounds, mode: GradientMode::Symmetrized };
        spec.validate()?;
        Ok(spec)
    }

    pub fn constant(dim: usize, p: f64, a: f64) -> Self {
        Self::new(dim, p, CoefficientField::Constant { a }, [a, a]).expect("valid constant medium")
    }

    pub fn with_mode(mut self, mode: GradientMode) -> Self {
        self.mode = mode;
        self
    }

    /// Structural checks. Coefficients outside `bounds` are not rejected here;
    /// [`check_class_membership`] reports them.
    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 1 || self.dim == 2) {
            return Err(invalid(format!("medium dimension must be 1 or 2, got {}", self.dim)));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(invalid(format!("exponent p must be > 1, got {}", self.p)));
        }
        let [c1, c2] = self.bounds;
        if !(c1 > 0.0 && c1 <= c2 && c2.is_finite()) {
            return Err(invalid(format!("bounds must satisfy 0 < c1 <= c2, got ({c1}, {c2})")));
        }
        let c = self.base.scale();
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid("base coefficient must be positive"));
        }
        if self.field.values().iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(invalid("coefficient values must be positive and finite"));
        }
        match &self.field {
            CoefficientField::Laminate { axis, fraction, .. } => {
                if *axis >= self.dim {
                    return Err(invalid(format!("laminate axis {axis} out of range")));
                }
                if !(0.0..=1.0).contains(fraction) {
                    return Err(invalid("laminate fraction must lie in [0, 1]"));
                }
            }
            CoefficientField::RandomCheckerboard { probability, .. }
                if !(0.0..=1.0).contains(probability) => {
                    return Err(invalid("random checkerboard probability must lie in [0, 1]"));
                }
            _ => {}
        }
        Ok(())
    }

    pub fn is_random(&self) -> bool {
        matches!(self.field, CoefficientField::RandomCheckerboard { .. })
    }

    /// Effective coefficient `c a(x)` of a deterministic medium.
    ///
    /// # Panics
    /// For random checkerboards, which need a [`RandomMedium`] realization.
    pub fn coefficient(&self, x: [f64; 2]) -> f64 {
        let a = match &self.field {
            CoefficientField::Constant { a } => *a,
            CoefficientField::Laminate { axis, values, fraction } => {
                let t = x[*axis] - x[*axis].floor();
                if t < *fraction {
                    values[0]
                } else {
                    values[1]
                }
            }
            CoefficientField::Checkerboard { values } => {
                let mut s = x[0].floor() as i64;
                if self.dim == 2 {
                    s += x[1].floor() as i64;
                }
                if s.rem_euclid(2) == 0 {
                    values[0]
                } else {
                    values[1]
                }
            }
            CoefficientField::RandomCheckerboard { .. } => {
                panic!("random checkerboard coefficients need a RandomMedium realization")
            }
        };
        self.base.scale() * a
    }

    /// Stable 64-bit digest of the spec, used to key realization caches.
    pub fn digest(&self) -> u64 {
        let text = toml::to_string(self).expect("medium spec serializes");
        let h = Sha256::digest(text.as_bytes());
        u64::from_le_bytes(h[..8].try_into().expect("digest has 8 bytes"))
    }
}

fn power_law_samples(a: f64, p: f64, mode: GradientMode, dim: usize, ms: &mut [Mat2], stress: bool) -> f64 {
    let mut acc = 0.0;
    for m in ms {
        let (w, s) = power_law(a, p, mode, dim, m);
        acc += w;
        if stress {
            *m = s;
        }
    }
    acc
}

impl Density for MediumSpec {
    fn dim(&self) -> usize {
        self.dim
    }
    fn p(&self) -> f64 {
        self.p
    }
    fn mode(&self) -> GradientMode {
        self.mode
    }
    fn bounds(&self) -> (f64, f64) {
        (self.bounds[0], self.bounds[1])
    }
    fn eval_with_stress(&self, x: [f64; 2], m: &Mat2) -> (f64, Mat2) {
        power_law(self.coefficient(x), self.p, self.mode, self.dim, m)
    }
    fn eval_samples(&self, x: [f64; 2], ms: &mut [Mat2], stress: bool) -> f64 {
        power_law_samples(self.coefficient(x), self.p, self.mode, self.dim, ms, stress)
    }
    fn period(&self) -> Option<f64> {
        self.field.period()
    }
}

/// `W(x, M)` evaluated at a density, convenience wrapper.
pub fn eval_density<D: Density + ?Sized>(medium: &D, x: [f64; 2], m: &Mat2) -> f64 {
    medium.eval(x, m)
}

/// `W_delta(x, M) = W(x / delta, M)`.
#[derive(Debug, Clone, Copy)]
pub struct Rescaled<'a, D: ?Sized> {
    pub inner: &'a D,
    pub delta: f64,
}

impl<D: Density + ?Sized> Density for Rescaled<'_, D> {
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
    fn eval_with_stress(&self, x: [f64; 2], m: &Mat2) -> (f64, Mat2) {
        self.inner.eval_with_stress([x[0] / self.delta, x[1] / self.delta], m)
    }
    fn eval_samples(&self, x: [f64; 2], ms: &mut [Mat2], stress: bool) -> f64 {
        self.inner.eval_samples([x[0] / self.delta, x[1] / self.delta], ms, stress)
    }
    fn period(&self) -> Option<f64> {
        self.inner.period().map(|p| p * self.delta)
    }
}

impl<D: Density + ?Sized> Density for &D {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn p(&self) -> f64 {
        (**self).p()
    }
    fn mode(&self) -> GradientMode {
        (**self).mode()
    }
    fn bounds(&self) -> (f64, f64) {
        (**self).bounds()
    }
    fn eval_with_stress(&self, x: [f64; 2], m: &Mat2) -> (f64, Mat2) {
        (**self).eval_with_stress(x, m)
    }
    fn eval_samples(&self, x: [f64; 2], ms: &mut [Mat2], stress: bool) -> f64 {
        (**self).eval_samples(x, ms, stress)
    }
    fn period(&self) -> Option<f64> {
        (**self).period()
    }
}

/// Half-open integer box `[lo, hi)` of lattice cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeBox {
    pub lo: [i64; 2],
    pub hi: [i64; 2],
}

impl LatticeBox {
    pub fn new(dim: usize, lo: [i64; 2], hi: [i64; 2]) -> Self {
        if dim == 1 {
            LatticeBox { lo: [lo[0], 0], hi: [hi[0], 1] }
        } else {
            LatticeBox { lo, hi }
        }
    }

    /// Smallest box of unit cells covering the real box `[lo, hi]`.
    pub fn covering(dim: usize, lo: [f64; 2], hi: [f64; 2]) -> Self {
        let f = |v: f64| v.floor() as i64;
        let c = |v: f64| v.ceil() as i64;
        Self::new(dim, [f(lo[0]), f(lo[1])], [c(hi[0]), c(hi[1])])
    }

    pub fn len(&self) -> usize {
        ((self.hi[0] - self.lo[0]).max(0) * (self.hi[1] - self.lo[1]).max(0)) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, k: [i64; 2]) -> bool {
        (0..2).all(|a| k[a] >= self.lo[a] && k[a] < self.hi[a])
    }

    pub fn contains_box(&self, other: &LatticeBox) -> bool {
        other.is_empty() || (0..2).all(|a| other.lo[a] >= self.lo[a] && other.hi[a] <= self.hi[a])
    }

    pub fn translate(&self, z: [i64; 2]) -> LatticeBox {
        LatticeBox { lo: [self.lo[0] + z[0], self.lo[1] + z[1]], hi: [self.hi[0] + z[0], self.hi[1] + z[1]] }
    }

    pub fn grow(&self, dim: usize, margin: i64) -> LatticeBox {
        let m1 = if dim == 2 { margin } else { 0 };
        LatticeBox { lo: [self.lo[0] - margin, self.lo[1] - m1], hi: [self.hi[0] + margin, self.hi[1] + m1] }
    }

    fn index(&self, k: [i64; 2]) -> usize {
        let w = self.hi[0] - self.lo[0];
        ((k[1] - self.lo[1]) * w + (k[0] - self.lo[0])) as usize
    }

    fn cells(&self) -> impl Iterator<Item = [i64; 2]> + '_ {
        (self.lo[1]..self.hi[1]).flat_map(move |j| (self.lo[0]..self.hi[0]).map(move |i| [i, j]))
    }
}

/// Default shift margin (in cells) around the queried box.
pub const SHIFT_MARGIN: i64 = 8;

/// Uniform draw attached to lattice cell `k` of realization `seed`.
///
/// Counter-based: the draw depends only on `(seed, k)`, never on the window
/// that happens to be materialized.
pub fn cell_uniform(seed: u64, k: [i64; 2]) -> f64 {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&k[0].to_le_bytes());
    key[16..24].copy_from_slice(&k[1].to_le_bytes());
    key[24..].copy_from_slice(b"gl-cell\0");
    ChaCha8Rng::from_seed(key).random::<f64>()
}

/// Seed of realization `index` at cube size `t` in a study with base seed
/// `base`. Adding sizes or samples never changes earlier seeds.
pub fn realization_seed(base: u64, t: u64, index: u64) -> u64 {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&base.to_le_bytes());
    key[8..16].copy_from_slice(&t.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..].copy_from_slice(b"gl-real\0");
    ChaCha8Rng::from_seed(key).random::<u64>()
}

/// A realization of an iid random checkerboard on a lattice window.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomMedium {
    spec: MediumSpec,
    seed: u64,
    // Window in the coordinates of the unshifted realization.
    base_window: LatticeBox,
    values: Arc<Vec<f64>>,
    // Accumulated shift: cell k of this medium is cell k + offset of the base.
    offset: [i64; 2],
    // Box the experiment queries (current coordinates).
    query: LatticeBox,
}

impl RandomMedium {
    /// Samples the realization on `query` grown by [`SHIFT_MARGIN`] cells.
    pub fn sample(spec: &MediumSpec, seed: u64, query: LatticeBox) -> Result<Self> {
        Self::sample_with_margin(spec, seed, query, SHIFT_MARGIN)
    }

    pub fn sample_with_margin(spec: &MediumSpec, seed: u64, query: LatticeBox, margin: i64) -> Result<Self> {
        spec.validate()?;
        let CoefficientField::RandomCheckerboard { values, probability } = spec.field else {
            return Err(invalid("RandomMedium requires a random-checkerboard coefficient field"));
        };
        if margin < 0 || query.is_empty() {
            return Err(invalid("random medium needs a non-empty query box and non-negative margin"));
        }
        let query = LatticeBox::new(spec.dim, query.lo, query.hi);
        let window = query.grow(spec.dim, margin);
        let scale = spec.base.scale();
        let cells: Vec<f64> = window
            .cells()
            .map(|k| {
                let a = if cell_uniform(seed, k) < probability { values[0] } else { values[1] };
                scale * a
            })
            .collect();
        Ok(RandomMedium { spec: spec.clone(), seed, base_window: window, values: Arc::new(cells), offset: [0, 0], query })
    }

    /// Loads the realization from `cache_dir` if a matching file exists,
    /// otherwise samples it and writes the cache file.
    pub fn load_or_sample(spec: &MediumSpec, seed: u64, query: LatticeBox, cache_dir: &Path) -> Result<Self> {
        let fresh = Self::sample(spec, seed, query)?;
        let path = fresh.cache_path(cache_dir);
        if let Ok(bytes) = std::fs::read(&path) {
            let cached = decode_realization(&bytes)?;
            if cached.spec_digest == spec.digest() && cached.seed == seed && cached.window == fresh.base_window {
                if cached.values != *fresh.values {
                    return Err(Error::Decode(format!("cache {} disagrees with its key", path.display())));
                }
                return Ok(fresh);
            }
        }
        std::fs::create_dir_all(cache_dir).map_err(|source| Error::Io { path: cache_dir.into(), source })?;
        let mut file = std::fs::File::create(&path).map_err(|source| Error::Io { path: path.clone(), source })?;
        file.write_all(&fresh.encode()).map_err(|source| Error::Io { path: path.clone(), source })?;
        Ok(fresh)
    }

    pub fn cache_path(&self, dir: &Path) -> PathBuf {
        let w = self.base_window;
        dir.join(format!(
            "rm-{:016x}-{:016x}-{}_{}_{}_{}.bin",
            self.spec.digest(),
            self.seed,
            w.lo[0],
            w.lo[1],
            w.hi[0],
            w.hi[1]
        ))
    }

    pub fn spec(&self) -> &MediumSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Allocated window in current coordinates.
    pub fn window(&self) -> LatticeBox {
        self.base_window.translate([-self.offset[0], -self.offset[1]])
    }

    pub fn query(&self) -> LatticeBox {
        self.query
    }

    /// Whether the real box `[lo, hi]` lies inside the realized window.
    pub fn covers(&self, lo: [f64; 2], hi: [f64; 2]) -> bool {
        self.window().contains_box(&LatticeBox::covering(self.spec.dim, lo, hi))
    }

    /// Coefficient of lattice cell `k`.
    ///
    /// # Panics
    /// If `k` lies outside the realized window.
    pub fn cell_value(&self, k: [i64; 2]) -> f64 {
        let k = if self.spec.dim == 1 { [k[0], 0] } else { k };
        let base = [k[0] + self.offset[0], k[1] + self.offset[1]];
        assert!(
            self.base_window.contains(base),
            "cell {k:?} lies outside the realized window {:?}",
            self.window()
        );
        self.values[self.base_window.index(base)]
    }

    /// Cell values over the current window, row-major.
    pub fn cell_values(&self) -> Vec<f64> {
        self.window().cells().map(|k| self.cell_value(k)).collect()
    }

    /// Realization translated by the lattice vector `z`: the cell value at `k`
    /// becomes the original value at `k + z`.
    pub fn shift(&self, z: [i64; 2]) -> Result<Self> {
        let z = if self.spec.dim == 1 { [z[0], 0] } else { z };
        let moved = self.query.translate(z);
        if !self.window().contains_box(&moved) {
            return Err(Error::WindowExhausted { shift: z[..self.spec.dim].to_vec() });
        }
        let mut out = self.clone();
        out.offset = [self.offset[0] + z[0], self.offset[1] + z[1]];
        Ok(out)
    }

    fn encode(&self) -> Vec<u8> {
        encode_realization(&RealizationRecord {
            dim: self.spec.dim as u8,
            spec_digest: self.spec.digest(),
            seed: self.seed,
            window: self.base_window,
            values: (*self.values).clone(),
        })
    }
}

impl Density for RandomMedium {
    fn dim(&self) -> usize {
        self.spec.dim
    }
    fn p(&self) -> f64 {
        self.spec.p
    }
    fn mode(&self) -> GradientMode {
        self.spec.mode
    }
    fn bounds(&self) -> (f64, f64) {
        (self.spec.bounds[0], self.spec.bounds[1])
    }
    fn eval_with_stress(&self, x: [f64; 2], m: &Mat2) -> (f64, Mat2) {
        let k = [x[0].floor() as i64, if self.spec.dim == 2 { x[1].floor() as i64 } else { 0 }];
        power_law(self.cell_value(k), self.spec.p, self.spec.mode, self.spec.dim, m)
    }
    fn eval_samples(&self, x: [f64; 2], ms: &mut [Mat2], stress: bool) -> f64 {
        let k = [x[0].floor() as i64, if self.spec.dim == 2 { x[1].floor() as i64 } else { 0 }];
        power_law_samples(self.cell_value(k), self.spec.p, self.spec.mode, self.spec.dim, ms, stress)
    }
    fn period(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// Decoded contents of a realization cache file.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationRecord {
    pub dim: u8,
    pub spec_digest: u64,
    pub seed: u64,
    pub window: LatticeBox,
    pub values: Vec<f64>,
}

const REALIZATION_MAGIC: &[u8; 4] = b"GLRM";
const REALIZATION_VERSION: u16 = 1;
const MAX_CACHE_CELLS: u64 = 1 << 26;

/// Little-endian layout: magic, version u16, dim u8, pad u8, digest u64,
/// seed u64, window lo/hi as 4 x i64, count u64, then `count` f64 values.
pub fn encode_realization(r: &RealizationRecord) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * r.values.len());
    out.extend_from_slice(REALIZATION_MAGIC);
    out.extend_from_slice(&REALIZATION_VERSION.to_le_bytes());
    out.push(r.dim);
    out.push(0);
    out.extend_from_slice(&r.spec_digest.to_le_bytes());
    out.extend_from_slice(&r.seed.to_le_bytes());
    for v in [r.window.lo[0], r.window.lo[1], r.window.hi[0], r.window.hi[1]] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(r.values.len() as u64).to_le_bytes());
    for v in &r.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_realization(bytes: &[u8]) -> Result<RealizationRecord> {
    let mut cur = bytes;
    let mut take = |n: usize| -> Result<Vec<u8>> {
        // Length check first: a forged header must not drive the allocation.
        if cur.len() < n {
            return Err(Error::Decode("truncated realization record".into()));
        }
        let (head, rest) = cur.split_at(n);
        cur = rest;
        Ok(head.to_vec())
    };
    if take(4)? != REALIZATION_MAGIC {
        return Err(Error::Decode("bad realization magic".into()));
    }
    let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
    if version != REALIZATION_VERSION {
        return Err(Error::Decode(format!("unsupported realization version {version}")));
    }
    let head = take(2)?;
    let dim = head[0];
    if !(dim == 1 || dim == 2) || head[1] != 0 {
        return Err(Error::Decode("bad realization header".into()));
    }
    let u64_at = |b: Vec<u8>| u64::from_le_bytes(b.try_into().unwrap());
    let spec_digest = u64_at(take(8)?);
    let seed = u64_at(take(8)?);
    let mut w = [0i64; 4];
    for slot in &mut w {
        *slot = i64::from_le_bytes(take(8)?.try_into().unwrap());
    }
    let window = LatticeBox { lo: [w[0], w[1]], hi: [w[2], w[3]] };
    let spans = [window.hi[0].checked_sub(window.lo[0]), window.hi[1].checked_sub(window.lo[1])];
    let expected = match spans {
        [Some(a), Some(b)] if a > 0 && b > 0 => (a as u64).checked_mul(b as u64),
        _ => None,
    }
    .ok_or_else(|| Error::Decode("invalid window".into()))?;
    if dim == 1 && (window.lo[1] != 0 || window.hi[1] != 1) {
        return Err(Error::Decode("1D window must span a single row".into()));
    }
    let count = u64_at(take(8)?);
    if count != expected || count > MAX_CACHE_CELLS {
        return Err(Error::Decode(format!("value count {count} does not match window size {expected}")));
    }
    let raw = take(8 * count as usize)?;
    let values: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Decode("coefficients must be positive and finite".into()));
    }
    if !cur.is_empty() {
        return Err(Error::Decode("trailing bytes after realization record".into()));
    }
    Ok(RealizationRecord { dim, spec_digest, seed, window, values })
}

/// Which hypothesis a class-membership sample violated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    /// `W(x, 0) != 0`.
    NonzeroAtOrigin { x: [f64; 2], value: f64 },
    /// `W(x, M + S) != W(x, M)` for a skew `S`.
    SkewDependence { x: [f64; 2], m: Mat2, skew: f64, difference: f64 },
    /// Growth bound violated.
    Growth { x: [f64; 2], m: Mat2, value: f64, lower: f64, upper: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub samples: usize,
    pub passed: bool,
    pub counterexample: Option<Violation>,
}

/// Property-tests `W(x,0) = 0`, skew invariance (symmetrized mode) and the
/// growth bounds on `samples` pseudo-random `(x, M)` pairs drawn from `region`.
pub fn check_class_membership<D: Density + ?Sized>(
    medium: &D,
    samples: usize,
    region: ([f64; 2], [f64; 2]),
    seed: u64,
) -> ClassReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = medium.dim();
    let p = medium.p();
    let (c1, c2) = medium.bounds();
    let (lo, hi) = region;
    let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
    for _ in 0..samples {
        let mut x = [0.0; 2];
        for a in 0..dim {
            x[a] = rng.random_range(lo[a]..hi[a]);
        }
        let mut m = Mat2::ZERO;
        for r in 0..dim {
            for c in 0..dim {
                m.0[r][c] = rng.random_range(-2.0..2.0);
            }
        }
        let w0 = medium.eval(x, &Mat2::ZERO);
        if w0 != 0.0 {
            return ClassReport { samples, passed: false, counterexample: Some(Violation::NonzeroAtOrigin { x, value: w0 }) };
        }
        let w = medium.eval(x, &m);
        if dim == 2 && medium.mode() == GradientMode::Symmetrized {
            let s: f64 = rng.random_range(-2.0..2.0);
            let ws = medium.eval(x, &(m + Mat2::new(0.0, s, -s, 0.0)));
            if !rel(w, ws) {
                return ClassReport {
                    samples,
                    passed: false,
                    counterexample: Some(Violation::SkewDependence { x, m, skew: s, difference: ws - w }),
                };
            }
        }
        let g = medium.growth_norm(&m).powf(p);
        let (lower, upper) = (c1 * g, c2 * (g + 1.0));
        if w < lower * (1.0 - 1e-12) || w > upper * (1.0 + 1e-12) {
            return ClassReport {
                samples,
                passed: false,
                counterexample: Some(Violation::Growth { x, m, value: w, lower, upper }),
            };
        }
    }
    ClassReport { samples, passed: true, counterexample: None }
}
