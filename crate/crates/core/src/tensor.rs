//! Small fixed-size matrices for strains and stresses.
//!
//! Everything is stored as a 2x2 array; one-dimensional problems only use the
//! `[0][0]` entry and keep the rest at zero, so norms and traces work unchanged.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0; 2]; 2]);

    pub fn new(a00: f64, a01: f64, a10: f64, a11: f64) -> Self {
        Mat2([[a00, a01], [a10, a11]])
    }

    /// Scalar embedded as a 1x1 matrix.
    pub fn scalar(a: f64) -> Self {
        Mat2([[a, 0.0], [0.0, 0.0]])
    }

    /// Zeroes entries outside the leading `dim x dim` block.
    pub fn truncate(self, dim: usize) -> Self {
        if dim >= 2 {
            self
        } else {
            Mat2::scalar(self.0[0][0])
        }
    }

    pub fn transpose(&self) -> Self {
        let a = self.0;
        Mat2([[a[0][0], a[1][0]], [a[0][1], a[1][1]]])
    }

    pub fn sym(&self) -> Self {
        (*self + self.transpose()) * 0.5
    }

    pub fn skew(&self) -> Self {
        (*self - self.transpose()) * 0.5
    }

    /// `M + M^T`.
    pub fn twice_sym(&self) -> Self {
        *self + self.transpose()
    }

    pub fn frob_sq(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum()
    }

    pub fn frob(&self) -> f64 {
        self.frob_sq().sqrt()
    }

    pub fn dot(&self, other: &Mat2) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        let a = self.0;
        [
            a[0][0] * x[0] + a[0][1] * x[1],
            a[1][0] * x[0] + a[1][1] * x[1],
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + o * -1.0
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        let a = self.0;
        Mat2([[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]])
    }
}
