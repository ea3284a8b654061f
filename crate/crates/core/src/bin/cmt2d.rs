use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cmt2d::io::{self, ExpandConfig, SweepConfig, WaveguideConfig, ZerosConfig};
use cmt2d::{Error, Result};

#[derive(Parser)]
#[command(name = "cmt2d", version, about = "Coupled-mode scattering by 2-D acoustic media")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Zeros of J_n' and J_n as CSV.
    Zeros {
        #[command(flatten)]
        common: Common,
        /// Zeros per order.
        #[arg(long)]
        count: Option<usize>,
        /// Bessel orders (repeatable).
        #[arg(long = "order")]
        orders: Vec<u32>,
    },
    /// Truncated analytic coupling data as a mode-set JSON file.
    Modes {
        #[command(flatten)]
        common: Common,
    },
    /// L-infinity errors of mixed expansions of J_0(kr) as CSV.
    Expand {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kr: Option<f64>,
        #[arg(long)]
        nn: Option<usize>,
        #[arg(long)]
        nd: Option<usize>,
    },
    /// Coupled-mode scattering sweep as CSV plus a summary JSON.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Summary file; defaults to the output path with extension
        /// `.summary.json`, or standard error without an output path.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Closed-form scattering sweep as CSV.
    Exact {
        #[command(flatten)]
        common: Common,
    },
    /// Duct-stub reflection sweep as CSV.
    Waveguide {
        #[command(flatten)]
        common: Common,
    },
}

fn require_config(common: &Common) -> Result<&Path> {
    common
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("this subcommand needs --config <file>".into()))
}

fn load_sweep(common: &Common) -> Result<(SweepConfig, Option<PathBuf>)> {
    let config = SweepConfig::load(require_config(common)?)?;
    let out = common.out.clone().or_else(|| config.output.clone());
    Ok((config, out))
}

fn failure(message: String) -> Error {
    Error::Config(message)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Zeros { common, count, orders } => {
            let mut config = match &common.config {
                Some(p) => io::read_json::<ZerosConfig>(p)?,
                None => ZerosConfig::default(),
            };
            if let Some(c) = count {
                config.count = c;
            }
            if !orders.is_empty() {
                config.orders = orders;
            }
            io::emit(&io::run_zeros(&config)?, common.out.as_deref())
        }
        Command::Modes { common } => {
            let (config, out) = load_sweep(&common)?;
            io::write_mode_set(&io::run_modes(&config)?, out.as_deref())
        }
        Command::Expand { common, kr, nn, nd } => {
            let config = match (&common.config, kr, nn, nd) {
                (Some(p), None, None, None) => io::read_json::<ExpandConfig>(p)?,
                (None, Some(kr), Some(nn), Some(nd)) => ExpandConfig { kr, radius: 1.0, cases: vec![(nn, nd)] },
                _ => return Err(Error::Config("give either --config or all of --kr, --nn, --nd".into())),
            };
            io::emit(&io::run_expand(&config)?, common.out.as_deref())
        }
        Command::Spectrum { common, summary } => {
            let (config, out) = load_sweep(&common)?;
            let report = io::run_spectrum(&config)?;
            io::emit(&report.to_csv(), out.as_deref())?;
            let mut text = serde_json::to_string_pretty(&report.summary)?;
            text.push('\n');
            match summary.or_else(|| out.as_ref().map(|p| p.with_extension("summary.json"))) {
                Some(p) => std::fs::write(p, text)?,
                None => eprint!("{text}"),
            }
            if report.summary.passed() {
                Ok(())
            } else {
                let mut problems = report.summary.failures.clone();
                problems.extend(report.summary.tolerance_violations.iter().cloned());
                Err(failure(problems.join("; ")))
            }
        }
        Command::Exact { common } => {
            let (config, out) = load_sweep(&common)?;
            let (csv, failed) = io::run_exact(&config)?;
            io::emit(&csv, out.as_deref())?;
            if failed > 0 {
                return Err(failure(format!("{failed} frequencies failed")));
            }
            Ok(())
        }
        Command::Waveguide { common } => {
            let config: WaveguideConfig = io::read_json(require_config(&common)?)?;
            let (csv, problems) = io::run_waveguide(&config)?;
            io::emit(&csv, common.out.as_deref())?;
            if problems.is_empty() {
                Ok(())
            } else {
                Err(failure(problems.join("; ")))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
