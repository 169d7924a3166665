//! `ms-lab`: batch front end for the mslab pipelines.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;
mod selftest;

use clap::{Args, Parser, Subcommand};
use mslab::{MsError, Precision};
use output::{Format, RunManifest, Versions};
use serde::Serialize;
use std::collections::BTreeMap;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "ms-lab", version, about = "Truncated Maass-Selberg laboratory for SL(n)")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// output format
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// write the output here instead of stdout
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,
    /// fixed timestamp; output is byte-identical across runs and worker counts
    #[arg(long, global = true)]
    deterministic: bool,
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// double-double accumulation (overrides MS_LAB_PRECISION)
    #[arg(long, global = true)]
    dd: bool,
    /// master seed for random twists, Monte Carlo and selftest sampling
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// truncated volume over a T grid with the fitted decay slope
    Volume(commands::VolumeArgs),
    /// truncated L1 pipeline: main term plus shifted integral
    L1(commands::L1Args),
    /// truncated inner product pipeline
    Inner(commands::InnerArgs),
    /// main term and error budget of the normalized second moment
    SecondMoment(commands::SecondMomentArgs),
    /// count primitive rank-k sublattices of determinant <= p
    Count(commands::CountArgs),
    /// discrepancy table D(p) = count - main term over a p grid
    Discrepancy(commands::DiscrepancyArgs),
    /// fitted vanishing orders of the cancellation orbit sums
    CancelCheck(commands::CancelArgs),
    /// saddle-point quadrature against the asymptotic main term
    SaddleCheck(commands::SaddleArgs),
    /// quick invariant suite with a pass/fail matrix
    Selftest(selftest::SelftestArgs),
}

/// Everything a command needs besides its own flags.
pub struct Ctx {
    pub precision: Precision,
    pub seed: u64,
    deterministic: bool,
}

impl Ctx {
    pub fn manifest<A: Serialize>(&self, command: &str, args: &A) -> RunManifest {
        let mut parameters = BTreeMap::new();
        if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(args) {
            for (k, v) in map {
                let s = match v {
                    serde_json::Value::Null => continue,
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Array(a) => a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
                    other => other.to_string(),
                };
                parameters.insert(k, s);
            }
        }
        let timestamp = if self.deterministic {
            "1970-01-01T00:00:00Z".to_string()
        } else {
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        };
        RunManifest {
            command: command.to_string(),
            parameters,
            versions: Versions {
                tool: format!("ms-lab {}", env!("CARGO_PKG_VERSION")),
                precision: match self.precision {
                    Precision::Double => "double".into(),
                    Precision::Dd => "dd".into(),
                },
            },
            seed: self.seed,
            timestamp,
        }
    }
}

/// Failure of a run, mapped onto the exit-code contract.
pub enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<MsError> for Failure {
    fn from(e: MsError) -> Self {
        match e {
            MsError::InvalidDimension(_)
            | MsError::InvalidParabolic { .. }
            | MsError::InvalidArgument(_)
            | MsError::DimensionMismatch(..)
            | MsError::IndexOutOfRange { .. }
            | MsError::OutOfStrip(_)
            | MsError::WindowTooWide(_)
            | MsError::AsymptoticUnreliable(_) => Failure::Usage(e.to_string()),
            other => Failure::Numeric(other.to_string()),
        }
    }
}

fn precision(dd: bool) -> Result<Precision, Failure> {
    if dd {
        return Ok(Precision::Dd);
    }
    match std::env::var("MS_LAB_PRECISION") {
        Ok(v) if !v.trim().is_empty() => {
            Precision::parse(&v).ok_or_else(|| Failure::Usage(format!("MS_LAB_PRECISION={v}: expected double or dd")))
        }
        _ => Ok(Precision::Double),
    }
}

fn setup_pool(jobs: Option<usize>) -> Result<(), Failure> {
    let Some(j) = jobs else { return Ok(()) };
    if j == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    if j == 1 {
        mslab::exec::set_sequential(true);
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(j)
        .build_global()
        .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    Ok(())
}

fn emit(text: &str, out: Option<&std::path::Path>) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = cli.global;
    setup_pool(g.jobs)?;
    let ctx = Ctx { precision: precision(g.dd)?, seed: g.seed, deterministic: g.deterministic };
    let doc = match &cli.cmd {
        Command::Volume(a) => commands::volume(&ctx, a)?,
        Command::L1(a) => commands::l1(&ctx, a)?,
        Command::Inner(a) => commands::inner(&ctx, a)?,
        Command::SecondMoment(a) => commands::second_moment(&ctx, a)?,
        Command::Count(a) => commands::count(&ctx, a)?,
        Command::Discrepancy(a) => commands::discrepancy(&ctx, a)?,
        Command::CancelCheck(a) => commands::cancel_check(&ctx, a)?,
        Command::SaddleCheck(a) => commands::saddle_check(&ctx, a)?,
        Command::Selftest(a) => selftest::run(&ctx, a)?,
    };
    emit(&doc.render(g.format), g.out.as_deref())?;
    let failed = doc.failures();
    if failed.is_empty() {
        Ok(())
    } else {
        let names: Vec<&str> = failed.iter().map(|c| c.name.as_str()).collect();
        Err(Failure::Numeric(format!("failed checks: {}", names.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("ms-lab: usage error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("ms-lab: {m}");
            ExitCode::from(1)
        }
    }
}
