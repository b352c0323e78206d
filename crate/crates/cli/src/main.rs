use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use gammalab_cli::{exit_for, run};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Study {
    Phi,
    Tube,
    Gamma1d,
    Elastic2d,
    Cell,
    Homdet,
    Homstoch,
}

/// Run a gammalab study from a TOML config.
#[derive(Debug, Parser)]
#[command(name = "gammalab", version)]
struct Args {
    study: Study,
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV, JSON and SVG files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write an SVG plot.
    #[arg(long)]
    plots: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let name = args.study.to_possible_value().expect("no skipped variants").get_name().to_string();
    match run(&name, &args.config, &args.out, args.plots) {
        Ok(r) => {
            let mut files = r.tables.clone();
            files.extend(r.plot.clone());
            files.push(format!("{}.json", r.study));
            println!("{}: wrote {} to {}", r.study, files.join(", "), args.out.display());
            if !r.converged {
                eprintln!("warning: some solves hit the iteration cap; see {}.json", r.study);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e) as u8)
        }
    }
}
