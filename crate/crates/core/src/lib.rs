//! Numerical laboratory for non-local convolution energies of the form
//! `(1/eps) int f(eps W(x, e(u)) * rho_eps)`, their sharp-interface limit
//! `alpha int W + beta int_J phi(nu)`, and cell-formula homogenization.

pub mod cell;
pub mod config;
pub mod energy;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod media;
pub mod onedim;
pub mod solve;
pub mod stoch;
pub mod tensor;

pub use error::{Error, Result};
