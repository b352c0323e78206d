//! Study orchestration for the `gammalab` binary: config in, deterministic
//! CSV tables, a JSON run record and optional SVG plots out.

pub mod plot;
pub mod studies;
pub mod table;

use std::path::{Path, PathBuf};
use std::time::Instant;

use gammalab::config::{config_hash, Config};
use gammalab::Error;
use serde::Serialize;

use studies::StudyOutput;

pub const TOOL_VERSION: &str = concat!("gammalab ", env!("CARGO_PKG_VERSION"));

/// Exit status for a run outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Config = 2,
    Numerical = 3,
}

/// Errors caused by the config itself (bad schema, values or resolution)
/// exit with 2; everything else is a numerical failure.
pub fn exit_for(err: &Error) -> Exit {
    match err {
        Error::Config { .. }
        | Error::InvalidArgument(_)
        | Error::Resolution(_)
        | Error::KernelUnderResolved { .. }
        | Error::GridMismatch(_)
        | Error::EmptyInterface => Exit::Config,
        Error::Io { .. } | Error::Decode(_) | Error::Study(_) | Error::WindowExhausted { .. } | Error::NegativeArgument(_) => {
            Exit::Numerical
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub study: String,
    pub config_hash: String,
    pub tool_version: String,
    /// CSV files written, relative to the output directory.
    pub tables: Vec<String>,
    pub plot: Option<String>,
    pub summary: serde_json::Value,
    pub converged: bool,
    pub wall_time_seconds: f64,
}

fn dispatch(study: &str, c: &Config) -> gammalab::Result<StudyOutput> {
    c.require(study)?;
    let o = &c.solver;
    o.validate()?;
    match study {
        "phi" => studies::phi(c.phi.as_ref().unwrap()),
        "tube" => studies::tube(c.tube.as_ref().unwrap()),
        "gamma1d" => studies::gamma1d(c.gamma1d.as_ref().unwrap(), o),
        "elastic2d" => studies::elastic2d(c.elastic2d.as_ref().unwrap(), o),
        "cell" => studies::cell(c.cell.as_ref().unwrap(), o),
        "homdet" => studies::homdet(c.homdet.as_ref().unwrap(), o),
        "homstoch" => studies::homstoch(c.homstoch.as_ref().unwrap(), o),
        _ => unreachable!("require() rejects unknown studies"),
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

/// Runs `study` from the config at `config`, writing `<study>*.csv`,
/// `<study>.json` and, with `plots`, `<study>.svg` into `out`.
pub fn run(study: &str, config: &Path, out: &Path, plots: bool) -> gammalab::Result<RunRecord> {
    let start = Instant::now();
    // An unreadable config file is the user's to fix, like a malformed one.
    let (cfg, text) = Config::load(config).map_err(|e| match e {
        Error::Io { path, source } => Error::Config { path: path.display().to_string(), message: source.to_string() },
        e => e,
    })?;
    let output = dispatch(study, &cfg)?;
    std::fs::create_dir_all(out).map_err(io(out))?;
    let mut tables = Vec::new();
    for (suffix, t) in &output.tables {
        let name = format!("{study}{suffix}.csv");
        t.write(&out.join(&name))?;
        tables.push(name);
    }
    let plot = match (&output.plot, plots) {
        (Some(p), true) => {
            let name = format!("{study}.svg");
            plot::emit_plot(p, &out.join(&name))?;
            Some(name)
        }
        _ => None,
    };
    let record = RunRecord {
        study: study.to_string(),
        config_hash: config_hash(&text),
        tool_version: TOOL_VERSION.to_string(),
        tables,
        plot,
        summary: output.summary,
        converged: output.converged,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    let path: PathBuf = out.join(format!("{study}.json"));
    let json = serde_json::to_string_pretty(&record).expect("run record serializes");
    std::fs::write(&path, json + "\n").map_err(io(&path))?;
    Ok(record)
}
