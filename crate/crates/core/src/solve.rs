//! Descent engine for the discrete energies.
//!
//! Nonlinear conjugate gradients (Polak–Ribière+, steepest-descent restarts)
//! with a backtracking line search. Every accepted step satisfies the Armijo
//! condition, so the energy sequence never increases. The trial step comes
//! from the previous step (secant scaling) and is refined by one quadratic
//! fit, which makes the search exact on quadratic energies.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{local_energy, local_energy_and_gradient, DisplacementField, FunctionalParams, Nonlocal};
use crate::error::{invalid, Result};
use crate::media::Density;

/// Search direction rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    NonlinearCg,
    SteepestDescent,
}

/// Starting field for the first restart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// The datum field as given (boundary values extended inside).
    #[default]
    DatumExtension,
    /// Free values set to zero.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Relative energy decrease over `window` iterations that counts as
    /// converged.
    pub tolerance: f64,
    pub window: usize,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub method: Method,
    pub init: Init,
    /// Number of starts in [`minimize_nonlocal`]: datum extension, zero, then
    /// seeded perturbations of the datum extension.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iterations: 20_000,
            tolerance: 1e-8,
            window: 25,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            method: Method::NonlinearCg,
            init: Init::DatumExtension,
            restarts: 1,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.window == 0 || self.max_iterations == 0 {
            return Err(invalid("solver tolerance, window and iteration cap must be positive"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(invalid("backtracking shrink must lie in (0, 1)"));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 0.5) {
            return Err(invalid("sufficient-decrease constant must lie in (0, 1/2)"));
        }
        if self.restarts == 0 {
            return Err(invalid("at least one start is needed"));
        }
        Ok(())
    }

    /// Default options with `restarts = 4`, used in the fracture regime.
    pub fn multistart() -> Self {
        SolveOptions { restarts: 4, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub field: DisplacementField,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Index of the start that produced this result.
    pub start: usize,
}

/// Serializable part of a [`SolveResult`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub start: usize,
}

impl SolveResult {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            energy: self.energy,
            iterations: self.iterations,
            converged: self.converged,
            gradient_norm: self.gradient_norm,
            start: self.start,
        }
    }
}

/// A differentiable energy of a nodal field. Gradients vanish on pinned nodes.
pub trait Objective: Sync {
    fn value(&self, u: &DisplacementField) -> f64;
    fn value_and_gradient(&self, u: &DisplacementField) -> (f64, Vec<f64>);
}

impl<D: Density> Objective for Nonlocal<'_, D> {
    fn value(&self, u: &DisplacementField) -> f64 {
        self.energy(u)
    }
    fn value_and_gradient(&self, u: &DisplacementField) -> (f64, Vec<f64>) {
        self.energy_and_gradient(u)
    }
}

/// `sum_c h^n W(x_c, e(u))` without convolution.
pub struct LocalObjective<'a, D: ?Sized> {
    pub medium: &'a D,
}

impl<D: Density + ?Sized> Objective for LocalObjective<'_, D> {
    fn value(&self, u: &DisplacementField) -> f64 {
        local_energy(u, self.medium)
    }
    fn value_and_gradient(&self, u: &DisplacementField) -> (f64, Vec<f64>) {
        local_energy_and_gradient(u, self.medium)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn moved(u: &DisplacementField, d: &[f64], t: f64) -> DisplacementField {
    let values: Vec<f64> = u.values().iter().zip(d).map(|(x, y)| x + t * y).collect();
    let mut v = u.clone();
    v.set_free_values(&values);
    v
}

/// Backtracking search along `d` from `u`, returning `(t, value)` of an
/// accepted step or `None` when no decrease is found.
fn line_search<O: Objective + ?Sized>(
    obj: &O,
    u: &DisplacementField,
    d: &[f64],
    e0: f64,
    slope: f64,
    t0: f64,
    opts: &SolveOptions,
) -> Option<(f64, f64)> {
    let c = opts.sufficient_decrease;
    let armijo = |t: f64, e: f64| e <= e0 + c * t * slope;
    let mut t = t0;
    for _ in 0..80 {
        let e = obj.value(&moved(u, d, t));
        // Quadratic model through e0, slope and e(t).
        let curv = e - e0 - slope * t;
        let t_fit = if curv > 0.0 { -slope * t * t / (2.0 * curv) } else { f64::NAN };
        if e.is_finite() && armijo(t, e) {
            if t_fit.is_finite() && t_fit > 0.1 * t && t_fit < 10.0 * t && (t_fit - t).abs() > 1e-3 * t {
                let e_fit = obj.value(&moved(u, d, t_fit));
                if e_fit < e && armijo(t_fit, e_fit) {
                    return Some((t_fit, e_fit));
                }
            }
            return Some((t, e));
        }
        t = if t_fit.is_finite() && e.is_finite() {
            t_fit.clamp(0.1 * t, opts.shrink * t)
        } else {
            opts.shrink * t
        };
        if t == 0.0 {
            break;
        }
    }
    None
}

/// Runs one descent from `init`.
pub fn descend<O: Objective + ?Sized>(obj: &O, init: DisplacementField, opts: &SolveOptions) -> SolveResult {
    let mut u = init;
    let h = u.grid().h();
    let (mut e, mut g) = obj.value_and_gradient(&u);
    let mut gg = dot(&g, &g);
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut history = VecDeque::with_capacity(opts.window + 1);
    history.push_back(e);
    let mut prev: Option<(f64, f64)> = None; // (step, slope) of the last accepted step
    let mut iterations = 0;
    let mut converged = false;
    let mut steepest = true;

    while iterations < opts.max_iterations {
        if gg == 0.0 || e == 0.0 {
            converged = true;
            break;
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            d = g.iter().map(|v| -v).collect();
            slope = -gg;
            steepest = true;
        }
        let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let fresh = 0.01 * h / dmax;
        let t0 = match prev {
            Some((t, s)) => {
                let t = t * s / slope;
                if t.is_finite() && t > 0.0 {
                    t
                } else {
                    fresh
                }
            }
            _ => fresh,
        };
        let Some((t, _)) = line_search(obj, &u, &d, e, slope, t0, opts) else {
            if steepest {
                // No decrease along the negative gradient: stationary to
                // working precision.
                converged = true;
                break;
            }
            d = g.iter().map(|v| -v).collect();
            steepest = true;
            continue;
        };
        u = moved(&u, &d, t);
        let (e_new, g_new) = obj.value_and_gradient(&u);
        iterations += 1;
        prev = Some((t, slope));
        let gg_new = dot(&g_new, &g_new);
        let beta = match opts.method {
            Method::NonlinearCg => (dot(&g_new, &g_new) - dot(&g_new, &g)).max(0.0) / gg,
            Method::SteepestDescent => 0.0,
        };
        d = g_new.iter().zip(&d).map(|(gn, dk)| -gn + beta * dk).collect();
        steepest = beta == 0.0;
        g = g_new;
        gg = gg_new;
        e = e_new;
        history.push_back(e);
        if history.len() > opts.window {
            let old = history.pop_front().unwrap();
            if old - e <= opts.tolerance * e.abs() {
                converged = true;
                break;
            }
        }
    }
    SolveResult { field: u, energy: e, iterations, converged, gradient_norm: gg.sqrt(), start: 0 }
}

/// Best of several descents, lowest energy first, ties within 1e-12 broken
/// by start index.
pub fn minimize_from<O: Objective + ?Sized>(obj: &O, inits: Vec<DisplacementField>, opts: &SolveOptions) -> Result<SolveResult> {
    opts.validate()?;
    if inits.is_empty() {
        return Err(invalid("no initial fields"));
    }
    let runs: Vec<SolveResult> = inits
        .into_par_iter()
        .enumerate()
        .map(|(k, u)| SolveResult { start: k, ..descend(obj, u, opts) })
        .collect();
    let mut best = 0;
    for k in 1..runs.len() {
        let (a, b) = (runs[k].energy, runs[best].energy);
        if a < b - 1e-12 * b.abs().max(1.0) {
            best = k;
        }
    }
    Ok(runs.into_iter().nth(best).unwrap())
}

/// Initial fields for a multistart run on a Dirichlet datum.
pub fn starts(datum: &DisplacementField, opts: &SolveOptions) -> Vec<DisplacementField> {
    let mut out = Vec::with_capacity(opts.restarts);
    let zero = {
        let mut z = datum.clone();
        z.set_free_values(&vec![0.0; datum.values().len()]);
        z
    };
    let (first, second) = match opts.init {
        Init::DatumExtension => (datum.clone(), zero),
        Init::Zero => (zero, datum.clone()),
    };
    out.push(first);
    if opts.restarts > 1 {
        out.push(second);
    }
    let scale = datum.values().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(datum.grid().h());
    for k in 2..opts.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let values: Vec<f64> = datum.values().iter().map(|v| v + 0.1 * scale * rng.random_range(-1.0..1.0)).collect();
        let mut p = datum.clone();
        p.set_free_values(&values);
        out.push(p);
    }
    out
}

/// Exact gradient of the discrete non-local functional.
pub fn grad_nonlocal<D: Density>(u: &DisplacementField, params: &FunctionalParams<D>) -> Result<Vec<f64>> {
    Ok(params.on_grid(u.grid())?.energy_and_gradient(u).1)
}

/// Minimizes the non-local functional with the Dirichlet data carried by
/// `datum` (mask and boundary values; interior values are the datum
/// extension).
pub fn minimize_nonlocal<D: Density>(
    params: &FunctionalParams<D>,
    datum: &DisplacementField,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let nl = params.on_grid(datum.grid())?;
    minimize_from(&nl, starts(datum, opts), opts)
}
