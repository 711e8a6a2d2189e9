//! Command-line front end.
//!
//! Exit codes: 0 success, 1 checks failed or not certified, 2 configuration
//! error, 3 runtime failure.

pub mod artifacts;
pub mod config;
pub mod plot;
pub mod run;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::diagnostics::{fit_rate, rates_csv, RateFit};
use crate::error::Error;
use crate::exec::{self, Execution};
use crate::operators::BUILTIN_PROBLEMS;
use artifacts::{output_dir, write_atomic, CsvTable};
use config::ExperimentConfig;
use plot::{render_svg, PlotSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tikhoflow", version, about = "Tikhonov-regularized second-order flows for monotone equations")]
pub struct Cli {
    /// Run sequentially even when the parallel feature is enabled.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one or more experiments and write their artifacts.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Check the Lyapunov coefficient conditions for a config's parameters.
    Certify {
        config: PathBuf,
        /// Override the selected K.
        #[arg(long)]
        k: Option<f64>,
        /// Override the selected s5.
        #[arg(long)]
        s5: Option<f64>,
    },
    /// Fit log-log slopes to columns of a CSV.
    Rates {
        csv: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        exponent: f64,
        /// Window as `lo:hi`.
        #[arg(long)]
        window: String,
        /// Columns to fit (default: every column except `t`).
        #[arg(long, value_delimiter = ',')]
        column: Vec<String>,
        #[arg(long, default_value = "t")]
        x: String,
    },
    /// Render columns of a CSV to SVG.
    Plot {
        csv: PathBuf,
        #[arg(long, default_value = "t")]
        x: String,
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        #[arg(long)]
        loglog: bool,
        /// Reference slopes drawn as dashed guides.
        #[arg(long = "ref", value_delimiter = ',', allow_hyphen_values = true)]
        reference: Vec<f64>,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Show the built-in problems.
    ListProblems,
}

/// Exit code for an error that aborted a command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotCertified(_) | Error::InfeasibleConstants(_) => EXIT_CHECKS_FAILED,
        Error::DimensionMismatch { .. }
        | Error::NotMonotone { .. }
        | Error::NonFiniteInput(_)
        | Error::AlphaTooSmall(_)
        | Error::ExponentRange { .. }
        | Error::TikhonovBound { .. }
        | Error::NonPositive { .. }
        | Error::InvalidArgument(_)
        | Error::EmptyWindow { .. }
        | Error::AllZero { .. }
        | Error::InsufficientSamples { .. }
        | Error::MissingColumn(_)
        | Error::EmptyData(_)
        | Error::ProblemFile(_) => EXIT_CONFIG,
        Error::NonFiniteOutput { .. }
        | Error::StepSizeUnderflow { .. }
        | Error::NonFiniteState { .. }
        | Error::StepLimit { .. }
        | Error::NoProgress { .. }
        | Error::MaxIterations { .. }
        | Error::ContinuationStalled { .. }
        | Error::NoSolutionSet(_)
        | Error::Infeasible { .. }
        | Error::Io(_) => EXIT_RUNTIME,
    }
}

fn fail(e: &Error) -> i32 {
    eprintln!("error: {e}");
    exit_code(e)
}

fn parse_window(text: &str) -> Result<(f64, f64), Error> {
    let bad = || Error::InvalidArgument(format!("window must be lo:hi, got {text:?}"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn run_one(path: &Path, exec: Execution) -> Result<(PathBuf, bool), Error> {
    let cfg = ExperimentConfig::load(path)?;
    let out = run::execute(&cfg, exec)?;
    let dir = output_dir(cfg.output.dir.as_deref());
    run::write_artifacts(&dir, &out)?;
    Ok((dir, out.report.pass()))
}

fn cmd_run(configs: &[PathBuf], exec: Execution) -> i32 {
    // independent runs go in parallel; each one then runs its own sweeps sequentially
    let inner = if configs.len() > 1 { Execution::Sequential } else { exec };
    let results = exec::map(exec, configs, |p| run_one(p, inner));
    let mut code = EXIT_OK;
    for (path, res) in configs.iter().zip(results) {
        let c = match res {
            Ok((dir, true)) => {
                println!("{}: all checks passed, artifacts in {}", path.display(), dir.display());
                EXIT_OK
            }
            Ok((dir, false)) => {
                println!("{}: checks FAILED, see {}", path.display(), dir.join("report.json").display());
                EXIT_CHECKS_FAILED
            }
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                exit_code(&e)
            }
        };
        code = code.max(c);
    }
    code
}

fn cmd_certify(path: &Path, k: Option<f64>, s5: Option<f64>, exec: Execution) -> Result<i32, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    let p = cfg.validated_params()?;
    if p.c <= 0.0 {
        return Err(Error::InvalidArgument("certification requires c > 0".into()));
    }
    if k.is_some() {
        cfg.diagnostics.k_override = k;
    }
    if s5.is_some() {
        cfg.diagnostics.s5_override = s5;
    }
    let cert = run::build_certificate(&cfg, &p, exec)?;
    let text = cert.report();
    print!("{text}");
    write_atomic(&output_dir(cfg.output.dir.as_deref()).join("certificate.txt"), text.as_bytes())?;
    Ok(if cert.certified { EXIT_OK } else { EXIT_CHECKS_FAILED })
}

fn cmd_rates(csv: &Path, exponent: f64, window: &str, columns: &[String], x: &str) -> Result<i32, Error> {
    let (lo, hi) = parse_window(window)?;
    let table = CsvTable::load(csv)?;
    let names: Vec<String> =
        if columns.is_empty() { table.headers.iter().filter(|h| *h != x).cloned().collect() } else { columns.to_vec() };
    let mut fits: Vec<RateFit> = Vec::new();
    for name in &names {
        match fit_rate(name, &table.series(x, name)?, (lo, hi), exponent) {
            Ok(f) => fits.push(f),
            Err(Error::AllZero { .. }) => eprintln!("{name}: identically zero on the window"),
            Err(e) => return Err(e),
        }
    }
    print!("{}", rates_csv(&fits));
    Ok(EXIT_OK)
}

fn cmd_plot(csv: &Path, spec: PlotSpec, out: Option<PathBuf>) -> Result<i32, Error> {
    let svg = render_svg(&CsvTable::load(csv)?, &spec)?;
    let out = out.unwrap_or_else(|| csv.with_extension("svg"));
    write_atomic(&out, svg.as_bytes())?;
    println!("{}", out.display());
    Ok(EXIT_OK)
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let exec = if cli.sequential { Execution::Sequential } else { Execution::default() };
    let res = match cli.command {
        Command::Run { configs } => return cmd_run(&configs, exec),
        Command::Certify { config, k, s5 } => cmd_certify(&config, k, s5, exec),
        Command::Rates { csv, exponent, window, column, x } => cmd_rates(&csv, exponent, &window, &column, &x),
        Command::Plot { csv, x, y, loglog, reference, title, out } => {
            cmd_plot(&csv, PlotSpec { x, y, loglog, reference_slopes: reference, title }, out)
        }
        Command::ListProblems => {
            for p in BUILTIN_PROBLEMS {
                println!("{:<12} {}", p.name, p.description);
            }
            Ok(EXIT_OK)
        }
    };
    res.unwrap_or_else(|e| fail(&e))
}

pub fn main() -> i32 {
    run_from(std::env::args_os())
}
