//! Acceptance criteria 1-10 at their pinned tolerances. Prints one PASS/FAIL
//! line per criterion and exits non-zero if any fails.
//!
//! `ACCEPTANCE_ONLY=2,5` restricts the run to the listed criteria.

use std::f64::consts::SQRT_2;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use gammalab::cell::{
    growth_upper, homogenize_det, minimize_cell, random_partition, rescaling_identity_check,
    subadditive_properties_check, CellProblem,
};
use gammalab::energy::{DisplacementField, FProfile, Facet, FunctionalParams};
use gammalab::grid::Grid;
use gammalab::kernel::{phi_rho, phi_via_slicing, tube_volume, KernelSpec, SupportBody};
use gammalab::media::{CoefficientField, Density, GradientMode, LatticeBox, MediumSpec, RandomMedium};
use gammalab::onedim::{crossover, solve_branches, OneDProblem};
use gammalab::solve::{minimize_nonlocal, SolveOptions};
use gammalab::stoch::{ergodic_estimate, StochStudy};
use gammalab::tensor::Mat2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: gammalab::Error) -> String {
    format!("error: {e}")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn kernel_geometry() -> Outcome {
    let start = Instant::now();
    let ball = SupportBody::ball(1.0, 2).map_err(err)?;
    let square = SupportBody::cube(&[1.0, 1.0]).map_err(err)?;
    let poly = SupportBody::polytope(&[[1.0, 0.0], [0.0, 2.0]]).map_err(err)?;
    let mut worst_exact = 0.0f64;
    for k in 0..32 {
        let th = std::f64::consts::PI * k as f64 / 32.0;
        worst_exact = worst_exact.max((phi_rho([th.cos(), th.sin()], &ball).map_err(err)? - 2.0).abs());
    }
    let diag = [SQRT_2 / 2.0, SQRT_2 / 2.0];
    worst_exact = worst_exact.max((phi_rho(diag, &square).map_err(err)? - 2.0 * SQRT_2).abs());
    let mut worst_slice = 0.0f64;
    for s in [&ball, &square, &poly] {
        for k in 0..12 {
            let th = 0.1 + std::f64::consts::PI * k as f64 / 12.0;
            let nu = [th.cos(), th.sin()];
            let exact = phi_rho(nu, s).map_err(err)?;
            worst_slice = worst_slice.max(rel(phi_via_slicing(nu, s, 720).map_err(err)?, exact));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst_exact <= 1e-10 && worst_slice <= 1e-3 && secs < 1.0,
        format!("max |phi - exact| = {worst_exact:.1e}, max slicing gap = {worst_slice:.2e}, {secs:.3}s"),
    )
}

fn tube_limit() -> Outcome {
    let h = 1.0 / 256.0;
    let unit = ([0.0, 0.0], [1.0, 1.0]);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, s) in [("ball", SupportBody::ball(1.0, 2)), ("box", SupportBody::cube(&[1.0, 1.0]))] {
        let s = s.map_err(err)?;
        for (nu, len) in [([1.0, 0.0], 1.0), ([0.6, 0.8], 0.5)] {
            let facet = Facet::new([0.5, 0.5], nu, len);
            let v = tube_volume(&[facet], h, &s, unit).map_err(err)?;
            let e = rel(v / h, phi_rho(nu, &s).map_err(err)? * len);
            worst = worst.max(e);
            parts.push(format!("{name} nu=({},{}) {e:.2e}", nu[0], nu[1]));
        }
    }
    check(worst <= 0.02, format!("relative errors: {}", parts.join(", ")))
}

fn gradient_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let g = Grid::for_box(2, [0.0, 0.0], [1.0, 1.0], 1.0 / 16.0).map_err(err)?;
    let mut worst = 0.0f64;
    for f in [FProfile::truncated_affine(1.0, 1.0).unwrap(), FProfile::exponential(1.0, 1.0).unwrap()] {
        for mode in [GradientMode::Symmetrized, GradientMode::Full] {
            let kernel = KernelSpec::uniform(SupportBody::ball(1.0, 2).map_err(err)?);
            let medium = MediumSpec::constant(2, 2.0, 1.0).with_mode(mode);
            let p = FunctionalParams::new(0.25, kernel, f.clone(), medium).map_err(err)?;
            let nl = p.on_grid(&g).map_err(err)?;
            let vals: Vec<f64> = (0..g.num_nodes() * 2).map(|_| rng.random_range(-0.05..0.05)).collect();
            let u = DisplacementField::from_values(g, vals, None).map_err(err)?;
            let (_, grad) = nl.energy_and_gradient(&u);
            for _ in 0..20 {
                let dir: Vec<f64> = (0..grad.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let at = |s: f64| {
                    let v: Vec<f64> = u.values().iter().zip(&dir).map(|(a, d)| a + s * d).collect();
                    nl.energy(&DisplacementField::from_values(g, v, None).unwrap())
                };
                let step = 1e-6;
                let fd = (at(step) - at(-step)) / (2.0 * step);
                let an: f64 = grad.iter().zip(&dir).map(|(a, d)| a * d).sum();
                worst = worst.max((fd - an).abs() / an.abs().max(1e-8));
            }
        }
    }
    check(worst <= 1e-5, format!("max relative FD error over 80 directions = {worst:.2e}"))
}

fn elastic_decoupling() -> Outcome {
    let eps = 1.0 / 64.0;
    let m = Mat2::new(0.1, 0.05, 0.05, -0.08);
    let medium = MediumSpec::constant(2, 2.0, 1.0);
    let f = FProfile::truncated_affine(1.0, 1.0).unwrap();
    let kernel = KernelSpec::uniform(SupportBody::ball(1.0, 2).map_err(err)?);
    let params = FunctionalParams::new(eps, kernel, f, medium.clone()).map_err(err)?;
    let grid = Grid::for_box(2, [0.0, 0.0], [0.5, 0.5], eps / 8.0).map_err(err)?;
    let datum = DisplacementField::affine(grid, &m, [0.0, 0.0])
        .with_dirichlet(grid.boundary_mask(), |x| m.apply(x))
        .map_err(err)?;
    let r = minimize_nonlocal(&params, &datum, &SolveOptions::default()).map_err(err)?;
    let target = 1.0 * 0.25 * medium.eval([0.0, 0.0], &m);
    let e = rel(r.energy, target);
    check(
        e <= 0.03,
        format!("energy {:.6} vs alpha|U|W = {target:.6}, rel {e:.2e}, {} its, converged={}", r.energy, r.iterations, r.converged),
    )
}

fn one_d_gamma_limit() -> Outcome {
    let f = FProfile::truncated_affine(1.0, 1.0).unwrap();
    let pb = OneDProblem::new(1.0, 2.0, f, 1.0 / 200.0).map_err(err)?;
    let opts = SolveOptions::default();
    let star = pb.predicted_crossover();
    let mut parts = Vec::new();
    let mut ok = true;
    for factor in [0.5, 2.0] {
        let p = pb.with_lambda(factor * star).map_err(err)?;
        let (row, _) = solve_branches(&p, &opts).map_err(err)?;
        let e = rel(row.energy, p.limit_minimum());
        ok &= e <= 0.05;
        parts.push(format!("{factor}*lambda*: {:.4} vs {:.4} ({e:.2e})", row.energy, p.limit_minimum()));
    }
    let lambdas: Vec<f64> = (0..9).map(|k| 1.2 + 0.05 * k as f64).collect();
    let r = crossover(&pb, &lambdas, &opts).map_err(err)?;
    let e = rel(r.lambda_star, star);
    ok &= e <= 0.05;
    parts.push(format!("lambda* = {:.5} vs {star:.5} ({e:.2e})", r.lambda_star));
    check(ok, parts.join("; "))
}

fn convex_cell_formula() -> Outcome {
    let medium = MediumSpec::constant(2, 2.0, 1.0);
    let opts = SolveOptions { tolerance: 1e-10, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst, mut worst_skew) = (0.0f64, 0.0f64);
    for _ in 0..5 {
        let (a, b, c) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let m = Mat2::new(a, b, b, c);
        let v = minimize_cell(&CellProblem::new(m, [0.0, 0.0], 1.0, &medium, 16), &opts).map_err(err)?;
        worst = worst.max(rel(v.value, medium.eval([0.0, 0.0], &m)));
        let w = rng.random_range(-1.0..1.0);
        let skewed = m + Mat2::new(0.0, w, -w, 0.0);
        let s = minimize_cell(&CellProblem::new(skewed, [0.0, 0.0], 1.0, &medium, 16), &opts).map_err(err)?;
        worst_skew = worst_skew.max((s.value - v.value).abs() / v.value);
    }
    check(
        worst <= 0.01 && worst_skew <= 2.0 * opts.tolerance,
        format!("max rel error vs W(sym M) = {worst:.2e}, skew shift difference = {worst_skew:.2e}"),
    )
}

fn laminate(dim: usize, p: f64) -> MediumSpec {
    MediumSpec::new(dim, p, CoefficientField::Laminate { axis: 0, values: [1.0, 4.0], fraction: 0.5 }, [1.0, 4.0])
        .unwrap()
        .with_mode(GradientMode::Full)
}

fn deterministic_homogenization() -> Outcome {
    let m = Mat2::new(1.0, 0.0, 0.0, 0.0);
    let opts = SolveOptions { tolerance: 1e-12, ..Default::default() };
    let mut parts = Vec::new();
    let mut ok = true;
    for p in [2.0, 1.5, 3.0] {
        let oracle = (0.5 * 1f64.powf(-1.0 / (p - 1.0)) + 0.5 * 4f64.powf(-1.0 / (p - 1.0))).powf(-(p - 1.0));
        let r = homogenize_det(&laminate(1, p), &m, [0.0, 0.0], &[32.0], 16, &opts).map_err(err)?;
        let e = rel(r.estimate, oracle);
        ok &= e <= 0.02;
        parts.push(format!("p={p}: {:.5} vs {oracle:.5}", r.estimate));
    }
    let m2 = Mat2::new(0.7, 0.2, -0.1, 0.4);
    let rc = rescaling_identity_check(&laminate(2, 2.0), &m2, 1.0, 0.125, [0.0, 0.0], 64, &opts).map_err(err)?;
    ok &= rc.residual <= 1e-8;
    parts.push(format!("rescaling residual {:.1e}", rc.residual));
    check(ok, parts.join("; "))
}

fn subadditive_process() -> Outcome {
    let spec = MediumSpec::new(
        2,
        2.0,
        CoefficientField::RandomCheckerboard { values: [1.0, 4.0], probability: 0.5 },
        [1.0, 4.0],
    )
    .unwrap();
    let m = Mat2::new(1.0, 0.0, 0.0, 0.0);
    let a = LatticeBox::new(2, [0, 0], [4, 2]);
    let omega = RandomMedium::sample(&spec, 11, a).map_err(err)?;
    let parts: Vec<Vec<LatticeBox>> = (0..3).map(|k| random_partition(2, a, 2 + k, 100 + k as u64)).collect();
    let zs = [[1, 0], [0, -2], [3, 1]];
    let opts = SolveOptions::default();
    let mut slack = Vec::new();
    let mut ok = true;
    let mut detail = Vec::new();
    for cells in [32, 64] {
        let r = subadditive_properties_check(&omega, &m, a, &parts, &zs, cells, &opts).map_err(err)?;
        ok &= r.bounded && r.max_covariance_difference <= 1e-10;
        slack.push(r.max_relative_slack);
        let indep = r.partitions.iter().map(|p| p.independent_relative_slack).fold(0.0, f64::max);
        detail.push(format!(
            "h=1/{cells}: slack {:.2e} (affine-start slack {indep:.2e}), covariance {:.1e}, bounded={}",
            r.max_relative_slack, r.max_covariance_difference, r.bounded
        ));
    }
    ok &= slack[0] <= 0.03;
    // Halving: eta(1/64) / eta(1/32) in [0.25, 0.75]. A slack that already
    // vanishes at h = 1/32 has nothing left to halve.
    let halving = if slack[0] > 1e-12 {
        let q = slack[1] / slack[0];
        detail.push(format!("halving ratio {q:.3}"));
        (0.25..=0.75).contains(&q)
    } else {
        detail.push("halving vacuous: gluing slack is identically zero".into());
        slack[1] <= 1e-12
    };
    ok &= halving;
    let _ = growth_upper(&omega, &m);
    check(ok, detail.join("; "))
}

fn stochastic_homogenization() -> Outcome {
    let spec = MediumSpec::new(
        1,
        2.0,
        CoefficientField::RandomCheckerboard { values: [1.0, 4.0], probability: 0.5 },
        [1.0, 4.0],
    )
    .unwrap()
    .with_mode(GradientMode::Full);
    let study = StochStudy {
        medium: spec,
        m: Mat2::new(1.0, 0.0, 0.0, 0.0),
        ts: vec![8, 16, 32, 64],
        samples: 64,
        base_seed: 20240611,
        cells_per_unit: 8,
        cache_dir: None,
    };
    let r = ergodic_estimate(&study, &SolveOptions::default()).map_err(err)?;
    let sds: Vec<f64> = r.rows.iter().map(|w| w.sd).collect();
    let decreasing = sds.windows(2).all(|w| w[1] < w[0]);
    let e = rel(r.estimate, 1.6);
    check(
        e <= 0.03 && decreasing,
        format!(
            "mean(t=64) = {:.5} +- {:.1e} ({e:.2e} from 1.6); sd = [{}]",
            r.estimate,
            r.error_bar,
            sds.iter().map(|s| format!("{s:.4}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

const GAMMA1D: &str = r#"
[gamma1d]
f = { kind = "truncated-affine", alpha = 1.0, beta = 1.0 }
p = 2.0
epsilon = 0.025
lambdas = [1.0, 1.2, 1.4, 1.6, 1.8]
"#;

const HOMSTOCH: &str = r#"
[homstoch]
m = [[1.0, 0.0], [0.0, 0.0]]
ts = [4, 8]
samples = 8
base_seed = 3
cells_per_unit = 8
medium = { dim = 2, p = 2.0, bounds = [1.0, 4.0], field = { kind = "random-checkerboard", values = [1.0, 4.0], probability = 0.5 } }
"#;

const PHI: &str = r#"
[phi]
support = { shape = "box", half_widths = [1.0, 0.5] }
"#;

fn run_cli(study: &str, config: &Path, out: &Path, threads: &str) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_gammalab"))
        .args([study, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("RAYON_NUM_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!("{study} exited with {}: {}", status.status, String::from_utf8_lossy(&status.stderr)))
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for (study, text) in [("gamma1d", GAMMA1D), ("homstoch", HOMSTOCH), ("phi", PHI)] {
        let cfg = dir.path().join(format!("{study}.toml"));
        std::fs::write(&cfg, text).map_err(|e| e.to_string())?;
        let (a, b) = (dir.path().join(format!("{study}-a")), dir.path().join(format!("{study}-b")));
        run_cli(study, &cfg, &a, "1")?;
        run_cli(study, &cfg, &b, "4")?;
        let mut names: Vec<_> = std::fs::read_dir(&a)
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok().map(|e| e.file_name()))
            .filter(|n| n.to_string_lossy().ends_with(".csv"))
            .collect();
        names.sort();
        for n in names {
            let (x, y) = (std::fs::read(a.join(&n)), std::fs::read(b.join(&n)));
            match (x, y) {
                (Ok(x), Ok(y)) if x == y => compared += 1,
                _ => return Err(format!("{} differs between runs", n.to_string_lossy())),
            }
        }
    }
    check(compared >= 4, format!("{compared} CSV files bit-identical across reruns with 1 and 4 threads"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("kernel geometry", kernel_geometry),
        ("tube limit", tube_limit),
        ("gradient oracle", gradient_oracle),
        ("elastic decoupling", elastic_decoupling),
        ("1D gamma-limit", one_d_gamma_limit),
        ("convex cell formula", convex_cell_formula),
        ("deterministic homogenization", deterministic_homogenization),
        ("subadditive process", subadditive_process),
        ("stochastic homogenization", stochastic_homogenization),
        ("determinism", determinism),
    ];
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let id = k + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failed += outcome.is_err() as usize;
        println!("criterion {id:>2} {tag} {name} [{secs:.1}s]: {detail}");
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
