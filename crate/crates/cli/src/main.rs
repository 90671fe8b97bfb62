//! Command-line runner for Rosenblatt experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;
mod output;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use config::ExperimentConfig;
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "rosenblatt-lab", version, about = "Run a Rosenblatt experiment from a TOML document")]
struct Args {
    /// experiment document
    #[arg(long)]
    config: PathBuf,
    /// output directory (created if missing)
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// overrides the seed in the document
    #[arg(long)]
    seed: Option<u64>,
    /// worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// also write an SVG plot of the results
    #[arg(long)]
    plot: bool,
}

#[derive(Serialize)]
struct RunInfo {
    version: &'static str,
    seed: u64,
    timestamp: String,
    git_revision: String,
    threads: usize,
    status: &'static str,
    exit_code: u8,
    stationary_tolerance: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    run: RunInfo,
    config: &'a ExperimentConfig,
    summary: std::collections::BTreeMap<String, String>,
}

fn git_revision() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path.display().to_string(), e))
}

fn execute(args: &Args) -> Result<u8, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::io(args.config.display().to_string(), e))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let cfg = cfg.resolve()?;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(args.out.display().to_string(), e))?;
    let report = run::run(&cfg)?;
    write(&args.out.join(&cfg.output.results), &report.table.to_csv())?;
    if let Some(samples) = &report.samples {
        write(&args.out.join(&cfg.output.samples), &samples.to_csv())?;
    }
    if args.plot {
        match &report.plot {
            Some((title, x, y, series)) => {
                write(&args.out.join(&cfg.output.plot), &output::line_plot_svg(title, x, y, series))?
            }
            None => eprintln!("no plot for this command"),
        }
    }
    let code = if report.pass { 0 } else { 2 };
    let timestamp = time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_default();
    let manifest = Manifest {
        run: RunInfo {
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            timestamp,
            git_revision: git_revision(),
            threads: rayon::current_num_threads(),
            status: if report.pass { "pass" } else { "fail" },
            exit_code: code,
            stationary_tolerance: rosenblatt_core::simulate::STATIONARY_TOLERANCE,
        },
        config: &cfg,
        summary: report.summary.iter().cloned().collect(),
    };
    let body = toml::to_string(&manifest).map_err(|e| CliError::Config(format!("manifest: {e}")))?;
    write(&args.out.join(&cfg.output.manifest), &body)?;
    for (k, v) in &report.summary {
        println!("{k} = {v}");
    }
    println!("{} rows written to {}", report.table.rows.len(), args.out.join(&cfg.output.results).display());
    if !report.pass {
        eprintln!("acceptance check failed");
    }
    Ok(code)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
