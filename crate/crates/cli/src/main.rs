//! `hyperchaos`: generate bitstreams, analyze the dynamics, measure entropy,
//! run the statistical suite and benchmark the pipeline.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hyperchaos::bitgen::BitgenError;
use hyperchaos::chaos::ChaosError;
use hyperchaos::dynamics::DynamicsError;
use hyperchaos::randtest::RandTestError;
use thiserror::Error;

use crate::config::{Pairs, OUT_DIR_ENV};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("numeric trap: {0}")]
    Trap(ChaosError),
    #[error("{0}")]
    TestFailed(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Io { .. } => 3,
            Self::Trap(_) => 4,
            Self::TestFailed(_) => 5,
        }
    }
}

impl From<ChaosError> for CliError {
    fn from(e: ChaosError) -> Self {
        match e {
            ChaosError::Trap { .. } => Self::Trap(e),
            other => Self::Config(other.to_string()),
        }
    }
}

impl From<BitgenError> for CliError {
    fn from(e: BitgenError) -> Self {
        match e {
            BitgenError::Chaos(c) => c.into(),
            BitgenError::Io(io) => Self::Io { path: PathBuf::new(), source: io },
            other => Self::Config(other.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<RandTestError> for CliError {
    fn from(e: RandTestError) -> Self {
        Self::Config(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "hyperchaos", version, about = "5D hyperchaotic pseudo-random bit generator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Plain-text key=value file; flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory (also settable through HYPERCHAOS_OUT_DIR).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Initial x, the bifurcation parameter.
    #[arg(long, global = true, visible_alias = "x0", allow_hyphen_values = true)]
    c: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    y0: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    z0: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    u0: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    v0: Option<f64>,
    /// Integration step.
    #[arg(long, global = true)]
    h: Option<f64>,
    #[arg(long, global = true, value_enum)]
    backend: Option<Backend>,
    #[arg(long, global = true, value_enum)]
    overflow: Option<Overflow>,
    /// States integrated and dropped before output starts.
    #[arg(long, global = true)]
    discard: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Backend {
    Fixed,
    Double,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Overflow {
    Wrap,
    Saturate,
    Trap,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Binary,
    Ascii,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the B1..B5 output streams.
    Generate {
        #[arg(long)]
        bits: Option<usize>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Comma-separated subset of B1..B5.
        #[arg(long)]
        streams: Option<String>,
    },
    /// Dynamics analyses written as CSV.
    Analyze {
        #[command(subcommand)]
        kind: Analysis,
    },
    /// Entropy per bit of one channel truncated to several widths.
    Entropy {
        /// Comma-separated widths in bits.
        #[arg(long)]
        widths: Option<String>,
        #[arg(long)]
        states: Option<usize>,
        #[arg(long)]
        channel: Option<String>,
    },
    /// Statistical test suite over generated streams or bit files.
    Test {
        #[arg(long)]
        sequences: Option<usize>,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        block_m: Option<usize>,
        #[arg(long)]
        serial_m: Option<usize>,
        #[arg(long)]
        apen_m: Option<usize>,
        /// Comma-separated bit files read instead of running the generator.
        #[arg(long)]
        input: Option<String>,
        /// Format of the input files.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Exit with status 5 unless every proportion clears the binomial floor.
        #[arg(long)]
        acceptance: bool,
    },
    /// Software throughput of the full pipeline.
    Bench {
        #[arg(long)]
        seconds: Option<f64>,
    },
}

#[derive(Debug, Subcommand)]
enum Analysis {
    /// Lyapunov spectrum at the initial condition, or a sweep over c with --points.
    Lyapunov {
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        c_min: Option<f64>,
        #[arg(long)]
        c_max: Option<f64>,
    },
    /// Maxima of x against c.
    Bifurcation {
        #[arg(long)]
        c_min: Option<f64>,
        #[arg(long)]
        c_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        transient: Option<f64>,
        #[arg(long)]
        capture: Option<f64>,
    },
    /// Crossings of the plane x = plane.
    Poincare {
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        plane: Option<f64>,
    },
    /// Eigenvalues at the equilibrium (c, 0, 0, 0, 0).
    Stability,
    /// Raw trajectory.
    Trajectory {
        #[arg(long)]
        steps: Option<usize>,
    },
}

fn lower<T: std::fmt::Debug>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(|v| format!("{v:?}").to_lowercase())
}

impl Cli {
    fn flag_pairs(&self) -> Pairs {
        let mut p = Pairs::default();
        let c = &self.common;
        p.set_opt("out", &c.out.as_ref().map(|o| o.display().to_string()));
        p.set_opt("c", &c.c);
        p.set_opt("y0", &c.y0);
        p.set_opt("z0", &c.z0);
        p.set_opt("u0", &c.u0);
        p.set_opt("v0", &c.v0);
        p.set_opt("h", &c.h);
        p.set_opt("backend", &lower(&c.backend));
        p.set_opt("overflow", &lower(&c.overflow));
        p.set_opt("discard", &c.discard);
        match &self.command {
            Command::Generate { bits, format, streams } => {
                p.set_opt("bits", bits);
                p.set_opt("format", &lower(format));
                p.set_opt("streams", streams);
            }
            Command::Analyze { kind } => match kind {
                Analysis::Lyapunov { t, points, c_min, c_max } => {
                    p.set_opt("t", t);
                    p.set_opt("points", points);
                    p.set_opt("c_min", c_min);
                    p.set_opt("c_max", c_max);
                }
                Analysis::Bifurcation { c_min, c_max, points, transient, capture } => {
                    p.set_opt("c_min", c_min);
                    p.set_opt("c_max", c_max);
                    p.set_opt("points", points);
                    p.set_opt("transient", transient);
                    p.set_opt("capture", capture);
                }
                Analysis::Poincare { t, plane } => {
                    p.set_opt("t", t);
                    p.set_opt("plane", plane);
                }
                Analysis::Stability => {}
                Analysis::Trajectory { steps } => p.set_opt("steps", steps),
            },
            Command::Entropy { widths, states, channel } => {
                p.set_opt("widths", widths);
                p.set_opt("states", states);
                p.set_opt("channel", channel);
            }
            Command::Test { sequences, length, alpha, block_m, serial_m, apen_m, input, format, acceptance } => {
                p.set_opt("sequences", sequences);
                p.set_opt("length", length);
                p.set_opt("alpha", alpha);
                p.set_opt("block_m", block_m);
                p.set_opt("serial_m", serial_m);
                p.set_opt("apen_m", apen_m);
                p.set_opt("input", input);
                p.set_opt("format", &lower(format));
                if *acceptance {
                    p.set("acceptance", true);
                }
            }
            Command::Bench { seconds } => p.set_opt("seconds", seconds),
        }
        p
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let env_out = std::env::var(OUT_DIR_ENV).ok();
    let cfg = config::resolve(cli.common.config.as_deref(), env_out, cli.flag_pairs())?;
    match cli.command {
        Command::Generate { .. } => commands::generate(&cfg),
        Command::Analyze { kind } => match kind {
            Analysis::Lyapunov { .. } => commands::lyapunov(&cfg),
            Analysis::Bifurcation { .. } => commands::bifurcation(&cfg),
            Analysis::Poincare { .. } => commands::poincare(&cfg),
            Analysis::Stability => commands::stability(&cfg),
            Analysis::Trajectory { .. } => commands::trajectory(&cfg),
        },
        Command::Entropy { .. } => commands::entropy(&cfg),
        Command::Test { .. } => commands::test(&cfg),
        Command::Bench { .. } => commands::bench(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
