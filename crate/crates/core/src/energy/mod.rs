//! Displacement fields, discrete gradients, the non-local convolution
//! functional
//!
//! ```text
//! F_eps(u) = (1/eps) int_U f( eps * (W(., e(u)) * rho_eps)(x) ) dx
//! ```
//!
//! and the sharp-interface limit on piecewise competitors.

mod field;
mod limit;
mod profile;
mod strain;

pub use field::DisplacementField;
pub use limit::{limit_energy, Facet, Piece, PieceField, PiecewiseCompetitor};
pub use profile::{f_eval, f_slope, truncation_family, FProfile};
pub use strain::{
    cell_density, grad, local_energy, local_energy_and_gradient, samples_per_cell, sym_grad, StrainField,
};

use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::kernel::{convolve, convolve_adjoint, make_stencil, BoundaryPolicy, KernelSpec, MollifierStencil};
use crate::media::{Density, GradientMode};

/// Largest admissible `h / eps`.
pub const MAX_H_OVER_EPS: f64 = 0.25;

/// Everything the non-local functional needs besides the field.
#[derive(Debug, Clone)]
pub struct FunctionalParams<D> {
    pub epsilon: f64,
    pub kernel: KernelSpec,
    pub f: FProfile,
    pub medium: D,
    pub policy: BoundaryPolicy,
}

impl<D: Density> FunctionalParams<D> {
    pub fn new(epsilon: f64, kernel: KernelSpec, f: FProfile, medium: D) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        f.validate()?;
        if kernel.dim() != medium.dim() {
            return Err(invalid("kernel and medium dimensions differ"));
        }
        Ok(FunctionalParams { epsilon, kernel, f, medium, policy: BoundaryPolicy::default() })
    }

    pub fn with_policy(mut self, policy: BoundaryPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Symmetrized or full gradient, as declared by the medium.
    pub fn gradient_mode(&self) -> GradientMode {
        self.medium.mode()
    }

    /// Rejects grids coarser than `eps / 4`.
    pub fn check_resolution(&self, h: f64) -> Result<()> {
        if h > MAX_H_OVER_EPS * self.epsilon * (1.0 + 1e-12) {
            return Err(Error::Resolution(format!(
                "grid spacing {h} exceeds eps/4 = {}",
                MAX_H_OVER_EPS * self.epsilon
            )));
        }
        Ok(())
    }

    /// Binds the functional to a grid: checks the resolution guard and builds
    /// the stencil once.
    pub fn on_grid(&self, grid: &Grid) -> Result<Nonlocal<'_, D>> {
        if grid.dim() != self.medium.dim() {
            return Err(invalid("grid and medium dimensions differ"));
        }
        self.check_resolution(grid.h())?;
        let stencil = make_stencil(&self.kernel, self.epsilon, grid.h())?;
        Ok(Nonlocal { params: self, grid: *grid, stencil })
    }
}

/// The functional bound to one grid.
#[derive(Debug, Clone)]
pub struct Nonlocal<'a, D> {
    params: &'a FunctionalParams<D>,
    grid: Grid,
    stencil: MollifierStencil,
}

impl<D: Density> Nonlocal<'_, D> {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn stencil(&self) -> &MollifierStencil {
        &self.stencil
    }

    fn check_field(&self, u: &DisplacementField) {
        assert_eq!(u.grid(), &self.grid, "field lives on a different grid");
    }

    /// `W(., e(u)) * rho_eps` at the cell centres.
    pub fn convolved_density(&self, u: &DisplacementField) -> Vec<f64> {
        self.check_field(u);
        let g = cell_density(u, &self.params.medium);
        convolve(&g, self.grid.cells(), &self.stencil, self.params.policy)
    }

    pub fn energy(&self, u: &DisplacementField) -> f64 {
        let c = self.convolved_density(u);
        self.sum(&c)
    }

    fn sum(&self, conv: &[f64]) -> f64 {
        let eps = self.params.epsilon;
        let f = &self.params.f;
        // Fixed-order summation keeps the value independent of thread count.
        conv.iter().map(|&c| f.value(eps * c)).sum::<f64>() * self.grid.cell_volume() / eps
    }

    /// Energy and its exact nodal gradient (zero on masked nodes).
    pub fn energy_and_gradient(&self, u: &DisplacementField) -> (f64, Vec<f64>) {
        self.check_field(u);
        let (g, stress) = strain::cell_density_and_stress(u, &self.params.medium, true);
        let dims = self.grid.cells();
        let conv = convolve(&g, dims, &self.stencil, self.params.policy);
        let eps = self.params.epsilon;
        let vol = self.grid.cell_volume();
        let energy = self.sum(&conv);
        let outer: Vec<f64> = conv.iter().map(|&c| vol * self.params.f.derivative(eps * c)).collect();
        let weight = convolve_adjoint(&outer, dims, &self.stencil, self.params.policy);
        (energy, strain::assemble_gradient(u, stress, &weight))
    }
}

/// `F_eps(u)` on the field's own grid.
pub fn nonlocal_energy<D: Density>(u: &DisplacementField, params: &FunctionalParams<D>) -> Result<f64> {
    Ok(params.on_grid(u.grid())?.energy(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::SupportBody;
    use crate::media::MediumSpec;
    use crate::tensor::Mat2;

    fn params(eps: f64, f: FProfile, mode: GradientMode) -> FunctionalParams<MediumSpec> {
        let kernel = KernelSpec::uniform(SupportBody::ball(1.0, 2).unwrap());
        FunctionalParams::new(eps, kernel, f, MediumSpec::constant(2, 2.0, 1.0).with_mode(mode)).unwrap()
    }

    fn unit_grid(h: f64) -> Grid {
        Grid::for_box(2, [0.0, 0.0], [1.0, 1.0], h).unwrap()
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let p = params(0.25, FProfile::truncated_affine(1.0, 1.0).unwrap(), GradientMode::Symmetrized);
        let u = DisplacementField::zeros(unit_grid(1.0 / 16.0));
        assert_eq!(nonlocal_energy(&u, &p).unwrap(), 0.0);
        let (_, g) = p.on_grid(u.grid()).unwrap().energy_and_gradient(&u);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn affine_elastic_regime_is_exact() {
        let (alpha, beta, eps) = (2.0, 5.0, 0.125);
        let p = params(eps, FProfile::truncated_affine(alpha, beta).unwrap(), GradientMode::Symmetrized);
        let m = Mat2::new(0.3, 0.1, -0.2, 0.4);
        let w = m.twice_sym().frob_sq();
        assert!(eps * w < beta / alpha);
        let u = DisplacementField::affine(unit_grid(eps / 8.0), &m, [0.0, 0.0]);
        let e = nonlocal_energy(&u, &p).unwrap();
        assert!((e - alpha * w).abs() < 1e-12 * alpha * w, "{e} vs {}", alpha * w);
    }

    #[test]
    fn resolution_guard_and_under_resolved_kernel() {
        let p = params(0.25, FProfile::truncated_affine(1.0, 1.0).unwrap(), GradientMode::Symmetrized);
        let u = DisplacementField::zeros(unit_grid(0.125));
        assert!(matches!(nonlocal_energy(&u, &p), Err(Error::Resolution(_))));
        // A small ball holds only the centre and four neighbours at this spacing.
        let flat = KernelSpec::uniform(SupportBody::ball(0.3, 2).unwrap());
        let q = FunctionalParams::new(0.25, flat, p.f.clone(), p.medium.clone()).unwrap();
        let u = DisplacementField::zeros(unit_grid(1.0 / 16.0));
        assert!(matches!(nonlocal_energy(&u, &q), Err(Error::KernelUnderResolved { .. })));
    }

    #[test]
    fn rigid_motions_are_invisible() {
        let p = params(0.25, FProfile::exponential(1.0, 1.0).unwrap(), GradientMode::Symmetrized);
        let u = DisplacementField::from_fn(unit_grid(1.0 / 16.0), |x| [x[0] * x[1], (2.0 * x[0]).sin()]);
        let e0 = nonlocal_energy(&u, &p).unwrap();
        let mut v = u.clone();
        v.add_rigid_motion([1.0, -3.0], 0.8);
        assert!((nonlocal_energy(&v, &p).unwrap() - e0).abs() < 1e-10);
        let mut r = DisplacementField::zeros(unit_grid(1.0 / 16.0));
        r.add_rigid_motion([0.5, 0.5], -1.3);
        let (e, g) = p.on_grid(r.grid()).unwrap().energy_and_gradient(&r);
        assert!(e < 1e-20);
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn saturation_ceiling_and_local_upper_bound() {
        let f = FProfile::truncated_affine(1.5, 0.5).unwrap();
        let p = params(0.25, f, GradientMode::Symmetrized);
        let g = unit_grid(1.0 / 16.0);
        let u = DisplacementField::from_fn(g, |x| [10.0 * (7.0 * x[0]).sin(), 4.0 * x[1] * x[0]]);
        let e = nonlocal_energy(&u, &p).unwrap();
        assert!((0.0..=0.5 / 0.25 + 1e-12).contains(&e));
        let conv = p.on_grid(&g).unwrap().convolved_density(&u);
        let local_conv: f64 = conv.iter().sum::<f64>() * g.cell_volume();
        assert!(e <= 1.01 * 1.5 * local_conv);
    }

    #[test]
    fn gradient_matches_central_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for f in [FProfile::truncated_affine(1.0, 1.0).unwrap(), FProfile::exponential(1.0, 1.0).unwrap()] {
            for mode in [GradientMode::Symmetrized, GradientMode::Full] {
                for policy in [BoundaryPolicy::RestrictRenormalize, BoundaryPolicy::ZeroExtend, BoundaryPolicy::Clamp] {
                    let p = params(0.25, f.clone(), mode).with_policy(policy);
                    let g = unit_grid(1.0 / 16.0);
                    let vals: Vec<f64> = (0..g.num_nodes() * 2).map(|_| rng.random_range(-0.05..0.05)).collect();
                    let u = DisplacementField::from_values(g, vals, None).unwrap();
                    let nl = p.on_grid(&g).unwrap();
                    let (_, grad) = nl.energy_and_gradient(&u);
                    for _ in 0..4 {
                        let dir: Vec<f64> = (0..grad.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                        let shifted = |s: f64| {
                            let v: Vec<f64> = u.values().iter().zip(&dir).map(|(a, d)| a + s * d).collect();
                            nl.energy(&DisplacementField::from_values(g, v, None).unwrap())
                        };
                        let step = 1e-6;
                        let fd = (shifted(step) - shifted(-step)) / (2.0 * step);
                        let an: f64 = grad.iter().zip(&dir).map(|(a, d)| a * d).sum();
                        assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-8), "{f:?} {mode:?} {policy:?}: {fd} vs {an}");
                    }
                }
            }
        }
    }

    #[test]
    fn monotone_in_the_profile() {
        let g = unit_grid(1.0 / 16.0);
        let u = DisplacementField::from_fn(g, |x| [(5.0 * x[1]).cos(), x[0] * x[0]]);
        let full = FProfile::exponential(2.0, 3.0).unwrap();
        let (a1, b1) = truncation_family(&full, 1).unwrap();
        let lower = FProfile::truncated_affine(a1, b1).unwrap();
        let e_full = nonlocal_energy(&u, &params(0.25, full, GradientMode::Symmetrized)).unwrap();
        let e_low = nonlocal_energy(&u, &params(0.25, lower, GradientMode::Symmetrized)).unwrap();
        assert!(e_low <= e_full);
    }
}
