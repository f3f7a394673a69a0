//! `spinlab`: command-line front end of the spinlab library.
//!
//! Every subcommand reads a mixture file `{"gammas": [γ₁, γ₂, …]}`, runs one
//! pipeline and writes either JSON (structured results) or CSV (curves) to
//! `--out` or standard output.  Each output embeds the tool version and the
//! full configuration; identical configurations give byte-identical files.
//!
//! Exit codes: 0 success, 2 domain error (including singular or oversized
//! models), 3 budget exhaustion (partial output is still written), 64 usage
//! or input error.

mod commands;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use spinlab_core::{Error, Mixture, VERSION};

/// Numerical laboratory for mixed p-spin spherical spin glasses.
#[derive(Debug, Parser)]
#[command(name = "spinlab", version, about)]
struct Cli {
    /// Worker threads (the SPINLAB_THREADS environment variable takes
    /// precedence; default: all hardware threads).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimise both functionals, detect S and T, classify the model.
    Analyze(commands::AnalyzeArgs),
    /// Energy profiles E(q) at positive and zero temperature (CSV).
    Profile(commands::ProfileArgs),
    /// Ground-state rate function R₊(E), Θ₊(E) (CSV).
    Rate(commands::RateArgs),
    /// One-point complexity Θ(E, R) on a grid (CSV).
    Complexity(commands::ComplexityArgs),
    /// Ground-state energy of a sampled Hamiltonian by multi-start ascent.
    SampleGs(commands::SampleGsArgs),
    /// Band free energy and band ground state around a near-optimiser.
    Band(commands::BandArgs),
    /// Randomised Hessian ascent: energies and mutual overlaps of runs.
    Subag(commands::SubagArgs),
    /// Build, prune and verify an ultrametric tree of near-optimisers.
    Tree(commands::TreeArgs),
    /// Conditional tilted ground state GS(x) on an x grid (CSV).
    Tilt(commands::TiltArgs),
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Mixture file {"gammas": [g1, g2, ...]}.
    #[arg(long)]
    pub mixture: PathBuf,
    /// Master seed; per-task streams are derived from (subcommand, task).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> spinlab_core::Result<Mixture> {
        Mixture::from_path(&self.mixture)
    }
}

/// How a pipeline finished.
#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    /// All budgets were sufficient.
    Complete,
    /// A budget ran out; the message says which.  Output was written.
    Partial(String),
}

/// The JSON document written by every structured subcommand.
#[derive(Serialize)]
struct Document<'a, C: Serialize, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a C,
    mixture: &'a [f64],
    result: &'a R,
}

fn write_output(out: Option<&Path>, text: &str) -> spinlab_core::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut o = std::io::stdout().lock();
            o.write_all(text.as_bytes())?;
            o.flush()?;
            Ok(())
        }
    }
}

/// Writes a JSON document with the configuration and version embedded.
pub fn emit_json<C: Serialize, R: Serialize>(common: &Common, command: &str, config: &C, m: &Mixture, result: &R) -> spinlab_core::Result<()> {
    let doc = Document { tool: "spinlab", version: VERSION, command, config, mixture: m.gammas(), result };
    write_output(common.out.as_deref(), &spinlab_core::output::to_json(&doc)?)
}

/// Writes CSV rows preceded by `#` comment lines carrying the version and
/// the configuration as one-line JSON.
pub fn emit_csv<C: Serialize>(common: &Common, command: &str, config: &C, m: &Mixture, header: &[&str], rows: &[Vec<f64>]) -> spinlab_core::Result<()> {
    let mut text = format!("# spinlab {VERSION} {command}\n");
    let cfg = serde_json::json!({ "config": config, "mixture": m.gammas() });
    text.push_str(&format!("# {}\n", serde_json::to_string(&cfg)?));
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r.iter().map(|v| if v.is_finite() { format!("{v:.16e}") } else { String::new() })).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    text.push_str(&String::from_utf8(bytes).expect("csv output is UTF-8"));
    write_output(common.out.as_deref(), &text)
}

/// Exit code of a library error.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Degenerate(_) | Error::Numerical(_) | Error::MemoryCap { .. } => 2,
        Error::Budget(_) => 3,
        Error::Invalid(_) | Error::Io(_) => 64,
    }
}

/// Thread count: SPINLAB_THREADS overrides --threads.
fn thread_count(flag: Option<usize>) -> Result<Option<usize>, String> {
    match std::env::var("SPINLAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(format!("SPINLAB_THREADS must be a positive integer, got {v:?}")),
        },
        Err(_) => match flag {
            Some(0) => Err("--threads must be positive".into()),
            f => Ok(f),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match thread_count(cli.threads) {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("spinlab: cannot configure thread pool: {e}");
                return ExitCode::from(64);
            }
        }
        Ok(None) => {}
        Err(msg) => {
            eprintln!("spinlab: {msg}");
            return ExitCode::from(64);
        }
    }
    match commands::dispatch(&cli.command) {
        Ok(Status::Complete) => ExitCode::SUCCESS,
        Ok(Status::Partial(msg)) => {
            eprintln!("spinlab: budget exhausted: {msg}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("spinlab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
