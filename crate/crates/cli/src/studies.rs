//! One runner per study: each turns its config section into named tables, a
//! JSON summary and an optional plot.

use gammalab::cell::{estimate_w_prime_second, homogenize_det, one_dim_w_hom, rescaling_identity_check};
use gammalab::config::{CellStudy, Elastic2dStudy, Gamma1dStudy, HomDetStudy, PhiStudy, TubeStudy};
use gammalab::energy::{limit_energy, DisplacementField, FunctionalParams, PiecewiseCompetitor};
use gammalab::grid::Grid;
use gammalab::kernel::{mu_xi, phi_rho, phi_via_slicing, tube_volume};
use gammalab::onedim::{crossover, OneDProblem};
use gammalab::solve::{minimize_nonlocal, SolveOptions};
use gammalab::stoch::{ergodic_estimate, spearman, StochStudy};
use gammalab::{Error, Result};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::plot::{Plot, Series, SeriesKind};
use crate::row;
use crate::table::Table;

/// What a study hands back to the orchestrator.
#[derive(Debug, Clone)]
pub struct StudyOutput {
    /// `(file stem suffix, table)`; the first table is the study's main CSV.
    pub tables: Vec<(String, Table)>,
    pub summary: Value,
    pub converged: bool,
    pub plot: Option<Plot>,
}

fn main_table(t: Table) -> Vec<(String, Table)> {
    vec![(String::new(), t)]
}

fn plot(title: &str, x: &str, y: &str, series: Vec<Series>) -> Option<Plot> {
    Some(Plot { title: title.into(), x_label: x.into(), y_label: y.into(), series })
}

pub fn phi(s: &PhiStudy) -> Result<StudyOutput> {
    if s.directions == 0 {
        return Err(Error::InvalidArgument("phi.directions must be positive".into()));
    }
    let dirs: Vec<f64> = if s.support.dim() == 1 {
        vec![0.0]
    } else {
        (0..s.directions).map(|k| std::f64::consts::PI * k as f64 / s.directions as f64).collect()
    };
    let mut t = Table::new(&["theta", "nu_x", "nu_y", "phi", "phi_slicing", "mu_xi", "relative_gap"]);
    let mut max_gap = 0.0f64;
    let mut pts = (Vec::new(), Vec::new());
    for &th in &dirs {
        let nu = [th.cos(), th.sin()];
        let exact = phi_rho(nu, &s.support)?;
        let sliced = phi_via_slicing(nu, &s.support, s.slicing_directions)?;
        let gap = (exact - sliced) / exact;
        max_gap = max_gap.max(gap);
        t.push(row![th, nu[0], nu[1], exact, sliced, mu_xi(nu, &s.support)?, gap]);
        pts.0.push((th, exact));
        pts.1.push((th, sliced));
    }
    Ok(StudyOutput {
        tables: main_table(t),
        summary: json!({ "max_relative_slicing_gap": max_gap, "directions": dirs.len() }),
        converged: true,
        plot: plot(
            "anisotropic surface density",
            "normal angle",
            "phi",
            vec![Series::new("2 h_S(nu)", SeriesKind::Line, pts.0), Series::new("slicing", SeriesKind::Markers, pts.1)],
        ),
    })
}

pub fn tube(s: &TubeStudy) -> Result<StudyOutput> {
    let dim = s.support.dim();
    let target: f64 = s
        .interface
        .iter()
        .map(|f| Ok(phi_rho(f.normal, &s.support)? * f.measure(dim)))
        .sum::<Result<f64>>()?;
    let rows: Vec<(f64, f64)> = s
        .hs
        .par_iter()
        .map(|&h| Ok((h, tube_volume(&s.interface, h, &s.support, (s.lo, s.hi))?)))
        .collect::<Result<_>>()?;
    let mut t = Table::new(&["h", "volume", "volume_over_h", "target", "relative_error"]);
    let mut pts = Vec::new();
    for &(h, v) in &rows {
        t.push(row![h, v, v / h, target, (v / h - target) / target]);
        pts.push((h, v / h));
    }
    let finest = rows.iter().min_by(|a, b| a.0.total_cmp(&b.0)).map(|&(h, v)| (v / h - target) / target);
    let range = (rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min), rows.iter().map(|r| r.0).fold(0.0, f64::max));
    Ok(StudyOutput {
        tables: main_table(t),
        summary: json!({ "target": target, "relative_error_at_finest_h": finest }),
        converged: true,
        plot: plot(
            "tube volume",
            "h",
            "volume / h",
            vec![
                Series::new("tube / h", SeriesKind::Line, pts),
                Series::new("phi * length", SeriesKind::Reference, vec![(range.0, target), (range.1, target)]),
            ],
        ),
    })
}

pub fn gamma1d(s: &Gamma1dStudy, opts: &SolveOptions) -> Result<StudyOutput> {
    let first = s.lambdas.first().copied().unwrap_or(0.0);
    let mut pb = OneDProblem::new(first, s.p, s.f.clone(), s.epsilon)?;
    if let Some(cells) = s.cells {
        pb = pb.with_cells(cells)?;
    }
    let r = crossover(&pb, &s.lambdas, opts)?;
    let mut t = Table::new(&[
        "lambda",
        "energy",
        "branch",
        "elastic_energy",
        "fracture_energy",
        "limit",
        "iterations",
        "converged",
    ]);
    for w in &r.rows {
        t.push(row![w.lambda, w.energy, w.branch.as_str(), w.elastic_energy, w.fracture_energy, w.limit, w.iterations, w.converged]);
    }
    let energies = r.rows.iter().map(|w| (w.lambda, w.energy)).collect();
    // Dense envelope min(alpha l^p, 2 beta) over the sweep.
    let (l0, l1) = (s.lambdas[0], *s.lambdas.last().unwrap());
    let envelope = (0..=200)
        .map(|k| {
            let l = l0 + (l1 - l0) * k as f64 / 200.0;
            (l, (s.f.alpha() * l.powf(s.p)).min(2.0 * s.f.beta()))
        })
        .collect();
    Ok(StudyOutput {
        tables: main_table(t),
        summary: json!({
            "lambda_star": r.lambda_star,
            "predicted": r.predicted,
            "relative_error": (r.lambda_star - r.predicted) / r.predicted,
            "h": pb.h(),
        }),
        converged: r.rows.iter().all(|w| w.converged),
        plot: plot(
            "1D minimal energy vs datum",
            "lambda",
            "energy",
            vec![
                Series::new("min G_eps", SeriesKind::Markers, energies),
                Series::new("min(a l^p, 2b)", SeriesKind::Reference, envelope),
            ],
        ),
    })
}

pub fn elastic2d(s: &Elastic2dStudy, opts: &SolveOptions) -> Result<StudyOutput> {
    let dim = s.medium.dim;
    let target = limit_energy(
        &PiecewiseCompetitor::affine(dim, (s.lo, s.hi), s.m),
        &s.medium,
        s.f.alpha(),
        0.0,
        s.kernel.support(),
    )?;
    let mut t = Table::new(&["epsilon", "h", "energy", "target", "relative_error", "iterations", "converged"]);
    let mut pts = Vec::new();
    let mut converged = true;
    for &eps in &s.epsilons {
        let params = FunctionalParams::new(eps, s.kernel.clone(), s.f.clone(), s.medium.clone())?.with_policy(s.policy);
        let grid = Grid::for_box(dim, s.lo, s.hi, eps * s.h_over_eps)?;
        let m = s.m;
        let datum = DisplacementField::affine(grid, &m, [0.0, 0.0]).with_dirichlet(grid.boundary_mask(), |x| m.apply(x))?;
        let r = minimize_nonlocal(&params, &datum, opts)?;
        converged &= r.converged;
        t.push(row![eps, grid.h(), r.energy, target, (r.energy - target) / target, r.iterations, r.converged]);
        pts.push((eps, r.energy));
    }
    let e0 = s.epsilons.iter().copied().fold(f64::INFINITY, f64::min);
    let e1 = s.epsilons.iter().copied().fold(0.0, f64::max);
    Ok(StudyOutput {
        tables: main_table(t),
        summary: json!({ "target": target }),
        converged,
        plot: plot(
            "affine datum: minimized energy",
            "epsilon",
            "energy",
            vec![
                Series::new("min F_eps", SeriesKind::Markers, pts),
                Series::new("alpha int W", SeriesKind::Reference, vec![(e0, target), (e1, target)]),
            ],
        ),
    })
}

pub fn cell(s: &CellStudy, opts: &SolveOptions) -> Result<StudyOutput> {
    s.medium.validate()?;
    let est = estimate_w_prime_second(&s.medium, &s.m, s.x, &s.deltas, &s.rs, s.cells_per_period, opts)?;
    let mut t = Table::new(&["r", "delta", "value", "converged", "iterations"]);
    for e in &est.table {
        t.push(row![e.side, e.delta, e.value, e.converged, e.iterations]);
    }
    let mut b = Table::new(&["r", "min", "max", "flagged"]);
    for i in &est.inner {
        b.push(row![i.r, i.min, i.max, i.flagged]);
    }
    let series = vec![
        Series::new("liminf_k", SeriesKind::Line, est.inner.iter().map(|i| (i.r, i.min)).collect()),
        Series::new("limsup_k", SeriesKind::Line, est.inner.iter().map(|i| (i.r, i.max)).collect()),
    ];
    Ok(StudyOutput {
        tables: vec![(String::new(), t), ("_bounds".into(), b)],
        summary: json!({
            "w_prime": est.w_prime,
            "w_second": est.w_second,
            "flagged": est.flagged,
            "growth_bounds": [gammalab::cell::growth_lower(&s.medium, &s.m), gammalab::cell::growth_upper(&s.medium, &s.m)],
        }),
        converged: est.table.iter().all(|e| e.converged),
        plot: plot("cell formula bounds", "r", "m / r^n", series),
    })
}

pub fn homdet(s: &HomDetStudy, opts: &SolveOptions) -> Result<StudyOutput> {
    s.medium.validate()?;
    let r = homogenize_det(&s.medium, &s.m, s.x, &s.ts, s.cells_per_period, opts)?;
    let mut t = Table::new(&["t", "value", "converged", "iterations"]);
    for e in &r.table {
        t.push(row![e.side, e.value, e.converged, e.iterations]);
    }
    let oracle = one_dim_w_hom(&s.medium, &s.m);
    let rescaling = match &s.rescaling {
        Some(c) => Some(rescaling_identity_check(&s.medium, &s.m, c.r, c.delta, c.x, c.cells, opts)?),
        None => None,
    };
    let mut series = vec![Series::new("m / t^n", SeriesKind::Line, r.table.iter().map(|e| (e.side, e.value)).collect())];
    if let Some(o) = oracle {
        series.push(Series::new("closed form", SeriesKind::Reference, vec![(s.ts[0], o), (*s.ts.last().unwrap(), o)]));
    }
    Ok(StudyOutput {
        tables: main_table(t),
        summary: json!({
            "estimate": r.estimate,
            "error_bar": r.error_bar,
            "oracle": oracle,
            "rescaling": rescaling,
            "growth_upper": gammalab::cell::growth_upper(&s.medium, &s.m),
        }),
        converged: r.table.iter().all(|e| e.converged),
        plot: plot("deterministic homogenization", "t", "m / t^n", series),
    })
}

pub fn homstoch(s: &StochStudy, opts: &SolveOptions) -> Result<StudyOutput> {
    let r = ergodic_estimate(s, opts)?;
    let mut per = Table::new(&["t", "index", "seed", "value", "converged", "iterations"]);
    let mut sum = Table::new(&["t", "mean", "sd", "stderr", "samples"]);
    for row in &r.rows {
        for k in 0..row.values.len() {
            per.push(row![row.t, k, row.seeds[k], row.values[k], row.converged[k], row.iterations[k]]);
        }
        sum.push(row![row.t, row.mean, row.sd, row.stderr, row.values.len()]);
    }
    let ts: Vec<f64> = r.rows.iter().map(|w| w.t as f64).collect();
    let sds: Vec<f64> = r.rows.iter().map(|w| w.sd).collect();
    let rank = if ts.len() > 1 { spearman(&ts, &sds) } else { f64::NAN };
    let oracle = one_dim_w_hom(&s.medium, &s.m);
    let mut series = vec![Series::new(
        "mean +- stderr",
        SeriesKind::Markers,
        r.rows.iter().map(|w| (w.t as f64, w.mean)).collect(),
    )
    .with_errors(r.rows.iter().map(|w| w.stderr).collect())];
    if let Some(o) = oracle {
        let (a, b) = (ts.iter().copied().fold(f64::INFINITY, f64::min), ts.iter().copied().fold(0.0, f64::max));
        series.push(Series::new("closed form", SeriesKind::Reference, vec![(a, o), (b, o)]));
    }
    Ok(StudyOutput {
        tables: vec![(String::new(), sum), ("_samples".into(), per)],
        summary: json!({
            "estimate": r.estimate,
            "error_bar": r.error_bar,
            "oracle": oracle,
            "spearman_t_sd": if rank.is_finite() { json!(rank) } else { Value::Null },
            "sd_strictly_decreasing": sds.windows(2).all(|w| w[1] < w[0]),
        }),
        converged: r.rows.iter().all(|w| w.converged.iter().all(|&c| c)),
        plot: plot("stochastic homogenization", "t", "mean m / t^n", series),
    })
}
