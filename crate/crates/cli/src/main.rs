//! `besovlab` — command-line driver for the spectral laboratory.
//!
//! Six subcommands: `norms`, `construct`, `picard-sweep`, `algebra-sweep`,
//! `simulate`, `decompose`. Each resolves an experiment plan from defaults,
//! flags, and an optional `--config` JSON file (whose fields override the
//! flags), writes its artifacts plus a `manifest.json` into `--output-dir`,
//! and exits 0. Failures print a one-line structured JSON error to stderr:
//! exit 2 for plan validation problems, 1 for runtime failures.
//!
//! `BESOVLAB_WORKERS` caps the worker pool used for sweeps and spectral
//! kernels; identical plans produce byte-identical tables regardless.

mod artifacts;
mod commands;
mod plan;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

use clap::{Args, Parser, Subcommand};

use plan::{build_plan, PlanInputs, ValidationError};

#[derive(Parser)]
#[command(
    name = "besovlab",
    version,
    about = "Spectral laboratory driver: construct frequency-cuboid data, \
             evaluate Besov norms, sweep interaction functionals, and run \
             the 2D ideal MHD solver"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// Size parameter N: an integer, or a sweep `a..b:geometric|linear[:count]`
    #[arg(long = "N", visible_alias = "n")]
    n: Option<String>,

    /// Spatial dimension (>= 2; simulation commands require 2)
    #[arg(long, default_value_t = 2)]
    d: usize,

    /// Amplitude decay exponent, in (1/q, 1)
    #[arg(long, default_value_t = 0.75)]
    alpha: f64,

    /// Lebesgue exponent p (>= 1, or `inf`)
    #[arg(long, default_value = "2")]
    p: String,

    /// Summation exponent q (> 1, or `inf`)
    #[arg(long, default_value = "2")]
    q: String,

    /// Directory for artifacts (created if missing)
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,

    /// Recorded in the manifest for reproducibility (the commands are
    /// deterministic and do not consume it)
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// JSON file whose present fields override these flags
    #[arg(long)]
    config: Option<PathBuf>,

    /// Table format
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
}

#[derive(Args)]
struct SimArgs {
    /// Grid points per side (the default resolves the N = 6 data under the
    /// 2/3 dealiasing rule; smaller sizes fit smaller grids)
    #[arg(long, default_value_t = 1024)]
    grid: usize,

    /// Final time (default: the construction horizon 2^{-2N} / ln N)
    #[arg(long)]
    t_end: Option<f64>,

    /// Number of time steps to t-end
    #[arg(long, default_value_t = 64)]
    steps: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Besov-norm table of the constructed data (u0, b0) over N
    Norms {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Emit the sparse construction, with optional dense field renders
    Construct {
        #[command(flatten)]
        common: CommonArgs,
        /// Dense render grid points per side (0 skips the render)
        #[arg(long, default_value_t = 0)]
        grid: usize,
    },
    /// Sweep the first-iterate interaction lower bound over N
    PicardSweep {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sweep the two-factor product lower bound and factor norms over N
    AlgebraSweep {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Integrate the 2D system from the constructed data at one N
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Norm checkpoints along the run
        #[arg(long, default_value_t = 8)]
        checkpoints: usize,
        /// Freeze the velocity and drop the feedback term (first-iterate mode)
        #[arg(long)]
        linearized: bool,
    },
    /// Split b(T) - b(0) into the first Duhamel iterate plus remainder
    Decompose {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
}

/// (command name, default --N, needs a single size, needs dims = 2)
fn command_traits(cmd: &Cmd) -> (&'static str, &'static str, bool, bool) {
    match cmd {
        Cmd::Norms { .. } => ("norms", "6", false, false),
        Cmd::Construct { .. } => ("construct", "6", true, false),
        Cmd::PicardSweep { .. } => ("picard-sweep", "256..65536:geometric", false, false),
        Cmd::AlgebraSweep { .. } => ("algebra-sweep", "256..65536:geometric", false, false),
        Cmd::Simulate { .. } => ("simulate", "6", true, true),
        Cmd::Decompose { .. } => ("decompose", "6", true, true),
    }
}

fn plan_inputs(cmd: &Cmd) -> PlanInputs {
    let (name, default_n, single_size, planar) = command_traits(cmd);
    let (common, grid, t_end, steps, checkpoints, linearized) = match cmd {
        Cmd::Norms { common } => (common, 0, None, 64, 8, false),
        Cmd::Construct { common, grid } => (common, *grid, None, 64, 8, false),
        Cmd::PicardSweep { common } => (common, 0, None, 64, 8, false),
        Cmd::AlgebraSweep { common } => (common, 0, None, 64, 8, false),
        Cmd::Simulate { common, sim, checkpoints, linearized } => {
            (common, sim.grid, sim.t_end, sim.steps, *checkpoints, *linearized)
        }
        Cmd::Decompose { common, sim } => (common, sim.grid, sim.t_end, sim.steps, 8, false),
    };
    PlanInputs {
        command: name,
        single_size,
        planar,
        n: common.n.clone().unwrap_or_else(|| default_n.to_string()),
        d: common.d,
        alpha: common.alpha,
        p: common.p.clone(),
        q: common.q.clone(),
        output_dir: common.output_dir.clone(),
        seed: common.seed,
        format: common.format.clone(),
        config: common.config.clone(),
        grid,
        t_end,
        steps,
        checkpoints,
        linearized,
    }
}

fn report_error(command: &str, kind: &str, message: &str) {
    eprintln!(
        "{}",
        serde_json::json!({
            "error": { "kind": kind, "message": message, "command": command }
        })
    );
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            report_error("parse", "validation", &e.to_string());
            return ExitCode::from(2);
        }
    };

    let (name, ..) = command_traits(&cli.cmd);
    if let Ok(v) = std::env::var("BESOVLAB_WORKERS") {
        match v.parse::<usize>() {
            Ok(nw) if nw >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(nw).build_global();
            }
            _ => {
                report_error(name, "validation", &format!("BESOVLAB_WORKERS=`{v}` is not a positive integer"));
                return ExitCode::from(2);
            }
        }
    }

    let started = SystemTime::now();
    let t0 = Instant::now();
    let plan = match build_plan(plan_inputs(&cli.cmd)) {
        Ok(plan) => plan,
        Err(e) => {
            report_error(name, "validation", &e.0);
            return ExitCode::from(2);
        }
    };
    match commands::run(&plan) {
        Ok(outputs) => {
            match artifacts::write_manifest(&plan, started, t0.elapsed().as_secs_f64(), &outputs) {
                Ok(_) => ExitCode::SUCCESS,
                Err(e) => {
                    report_error(name, "runtime", &format!("manifest: {e}"));
                    ExitCode::from(1)
                }
            }
        }
        Err(e) => {
            let validation = e.downcast_ref::<ValidationError>().is_some()
                || matches!(
                    e.downcast_ref::<besovlab::Error>(),
                    Some(besovlab::Error::InvalidParams(_))
                );
            let kind = if validation { "validation" } else { "runtime" };
            report_error(name, kind, &format!("{e:#}"));
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}
