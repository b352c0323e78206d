
use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::tensor::Mat2;

/// Vector-valued nodal field on a uniform grid, with optional Dirichlet data.
///
/// Values are stored node-major: component `k` of node `n` lives at
/// `values[n * dim + k]`. Where the mask is set the stored value is the
/// boundary datum.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    grid: Grid,
    values: Vec<f64>,
    mask: Option<Vec<bool>>,
}

impl DisplacementField {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.num_nodes() * grid.dim();
        DisplacementField { grid, values: vec![0.0; n], mask: None }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut u = Self::zeros(grid);
        u.fill_with(f, |_| true);
        u
    }

    /// Affine field `x -> M x + b`.
    pub fn affine(grid: Grid, m: &Mat2, b: [f64; 2]) -> Self {
        Self::from_fn(grid, |x| {
            let y = m.apply(x);
            [y[0] + b[0], y[1] + b[1]]
        })
    }

    pub fn from_values(grid: Grid, values: Vec<f64>, mask: Option<Vec<bool>>) -> Result<Self> {
        if values.len() != grid.num_nodes() * grid.dim() {
            return Err(invalid(format!(
                "expected {} values, got {}",
                grid.num_nodes() * grid.dim(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field values must be finite"));
        }
        if let Some(m) = &mask {
            if m.len() != grid.num_nodes() {
                return Err(invalid("mask length does not match node count"));
            }
        }
        Ok(DisplacementField { grid, values, mask })
    }

    /// Pins the masked nodes to `datum` and leaves the other values untouched.
    pub fn with_dirichlet(mut self, mask: Vec<bool>, datum: impl Fn([f64; 2]) -> [f64; 2]) -> Result<Self> {
        if mask.len() != self.grid.num_nodes() {
            return Err(invalid("mask length does not match node count"));
        }
        self.fill_with(&datum, |n| mask[n]);
        self.mask = Some(mask);
        Ok(self)
    }

    fn fill_with(&mut self, f: impl Fn([f64; 2]) -> [f64; 2], select: impl Fn(usize) -> bool) {
        let dim = self.grid.dim();
        let nodes = self.grid.nodes();
        for j in 0..nodes[1] {
            for i in 0..nodes[0] {
                let n = self.grid.node_index(i, j);
                if select(n) {
                    let v = f(self.grid.node_coords(i, j));
                    self.values[n * dim..(n + 1) * dim].copy_from_slice(&v[..dim]);
                }
            }
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn is_pinned(&self, node: usize) -> bool {
        self.mask.as_ref().is_some_and(|m| m[node])
    }

    pub fn value(&self, i: usize, j: usize) -> [f64; 2] {
        let dim = self.dim();
        let n = self.grid.node_index(i, j);
        let mut out = [0.0; 2];
        out[..dim].copy_from_slice(&self.values[n * dim..(n + 1) * dim]);
        out
    }

    /// Replaces the free values, keeping pinned entries at their datum.
    pub fn set_free_values(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.values.len());
        let dim = self.dim();
        for (n, chunk) in values.chunks(dim).enumerate() {
            if !self.is_pinned(n) {
                self.values[n * dim..(n + 1) * dim].copy_from_slice(chunk);
            }
        }
    }

    /// Adds the infinitesimal rigid motion `c + w (-x_2, x_1)`.
    pub fn add_rigid_motion(&mut self, c: [f64; 2], w: f64) {
        let dim = self.dim();
        let nodes = self.grid.nodes();
        for j in 0..nodes[1] {
            for i in 0..nodes[0] {
                let n = self.grid.node_index(i, j);
                let x = self.grid.node_coords(i, j);
                self.values[n * dim] += c[0] - w * x[1];
                if dim == 2 {
                    self.values[n * dim + 1] += c[1] + w * x[0];
                }
            }
        }
    }

    pub fn to_csv(&self) -> String {
        let dim = self.dim();
        let mut out = String::from(if dim == 1 { "x,u1,pinned\n" } else { "x,y,u1,u2,pinned\n" });
        let nodes = self.grid.nodes();
        for j in 0..nodes[1] {
            for i in 0..nodes[0] {
                let n = self.grid.node_index(i, j);
                let x = self.grid.node_coords(i, j);
                let v = self.value(i, j);
                let pinned = u8::from(self.is_pinned(n));
                if dim == 1 {
                    out.push_str(&format!("{},{},{}\n", x[0], v[0], pinned));
                } else {
                    out.push_str(&format!("{},{},{},{},{}\n", x[0], x[1], v[0], v[1], pinned));
                }
            }
        }
        out
    }

    /// Little-endian layout: magic `GLDF`, version u16, dim u8, has-mask u8,
    /// cells 2 x u64, spacing f64, origin 2 x f64, nodal values, then one byte
    /// per node if masked.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(48 + 8 * self.values.len());
        out.extend_from_slice(FIELD_MAGIC);
        out.extend_from_slice(&FIELD_VERSION.to_le_bytes());
        out.push(self.dim() as u8);
        out.push(u8::from(self.mask.is_some()));
        for c in self.grid.cells() {
            out.extend_from_slice(&(c as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.grid.h().to_le_bytes());
        for o in self.grid.origin() {
            out.extend_from_slice(&o.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(mask) = &self.mask {
            out.extend(mask.iter().map(|&b| u8::from(b)));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let mut take = |n: usize| -> Result<Vec<u8>> {
            // Length check first: a forged header must not drive the allocation.
            if cur.len() < n {
                return Err(Error::Decode("truncated field record".into()));
            }
            let (head, rest) = cur.split_at(n);
            cur = rest;
            Ok(head.to_vec())
        };
        if take(4)? != FIELD_MAGIC {
            return Err(Error::Decode("bad field magic".into()));
        }
        let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
        if version != FIELD_VERSION {
            return Err(Error::Decode(format!("unsupported field version {version}")));
        }
        let head = take(2)?;
        let (dim, has_mask) = (head[0] as usize, head[1]);
        if !(dim == 1 || dim == 2) || has_mask > 1 {
            return Err(Error::Decode("bad field header".into()));
        }
        let u64_of = |b: Vec<u8>| u64::from_le_bytes(b.try_into().unwrap());
        let f64_of = |b: Vec<u8>| f64::from_le_bytes(b.try_into().unwrap());
        let cells = [u64_of(take(8)?), u64_of(take(8)?)];
        let h = f64_of(take(8)?);
        let origin = [f64_of(take(8)?), f64_of(take(8)?)];
        if cells.iter().any(|&c| c == 0 || c >= MAX_CELLS_PER_AXIS) || (dim == 1 && cells[1] != 1) {
            return Err(Error::Decode("bad cell counts".into()));
        }
        if !(h > 0.0 && h.is_finite()) || origin.iter().any(|o| !o.is_finite()) || (dim == 1 && origin[1].to_bits() != 0) {
            return Err(Error::Decode("bad grid geometry".into()));
        }
        let nodes = (cells[0] + 1) * if dim == 2 { cells[1] + 1 } else { 1 };
        if nodes > MAX_NODES {
            return Err(Error::Decode("field too large".into()));
        }
        let grid = Grid::new(dim, origin, h, [cells[0] as usize, cells[1] as usize])
            .map_err(|e| Error::Decode(e.to_string()))?;
        let raw = take(8 * nodes as usize * dim)?;
        let values: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let mask = if has_mask == 1 {
            let raw = take(nodes as usize)?;
            if raw.iter().any(|&b| b > 1) {
                return Err(Error::Decode("mask bytes must be 0 or 1".into()));
            }
            Some(raw.into_iter().map(|b| b == 1).collect())
        } else {
            None
        };
        if !cur.is_empty() {
            return Err(Error::Decode("trailing bytes after field record".into()));
        }
        Self::from_values(grid, values, mask).map_err(|e| Error::Decode(e.to_string()))
    }
}

const FIELD_MAGIC: &[u8; 4] = b"GLDF";
const FIELD_VERSION: u16 = 1;
const MAX_CELLS_PER_AXIS: u64 = 1 << 20;
const MAX_NODES: u64 = 1 << 24;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dirichlet_values_are_pinned() {
        let g = Grid::for_box(2, [0.0, 0.0], [1.0, 1.0], 0.25).unwrap();
        let m = Mat2::new(1.0, 2.0, 0.0, -1.0);
        let u = DisplacementField::zeros(g).with_dirichlet(g.boundary_mask(), |x| m.apply(x)).unwrap();
        assert_eq!(u.value(4, 2), m.apply([1.0, 0.5]));
        assert_eq!(u.value(2, 2), [0.0, 0.0]);
        let mut v = u.clone();
        v.set_free_values(&vec![9.0; u.values().len()]);
        assert_eq!(v.value(4, 2), m.apply([1.0, 0.5]));
        assert_eq!(v.value(2, 2), [9.0, 9.0]);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = Grid::for_box(1, [0.0, 0.0], [1.0, 0.0], 0.5).unwrap();
        let csv = DisplacementField::from_fn(g, |x| [2.0 * x[0], 0.0]).to_csv();
        assert_eq!(csv, "x,u1,pinned\n0,0,0\n0.5,1,0\n1,2,0\n");
    }

    #[test]
    fn decoder_rejects_garbage() {
        assert!(DisplacementField::from_bytes(b"").is_err());
        assert!(DisplacementField::from_bytes(b"GLDF\x01\x00\x02\x00").is_err());
        let g = Grid::for_box(2, [0.0, 0.0], [1.0, 1.0], 0.5).unwrap();
        let mut bytes = DisplacementField::zeros(g).to_bytes();
        bytes.push(7);
        assert!(DisplacementField::from_bytes(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn binary_round_trip(nx in 1usize..6, ny in 1usize..6, dim in 1usize..=2, masked: bool, seed in 0u64..1000) {
            let g = Grid::new(dim, [0.25, -1.0], 0.125, [nx, ny]).unwrap();
            let u = DisplacementField::from_fn(g, |x| [(x[0] * seed as f64).sin(), x[1] - 0.5 * x[0]]);
            let u = if masked { u.with_dirichlet(g.boundary_mask(), |x| [x[0], x[1]]).unwrap() } else { u };
            let back = DisplacementField::from_bytes(&u.to_bytes()).unwrap();
            prop_assert_eq!(back, u);
        }
    }
}
