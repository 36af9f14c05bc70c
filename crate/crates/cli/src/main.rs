//! Command-line front end: validate a configuration, dump kernel tables,
//! run one closed-loop simulation, or reproduce the four vessel cases.
//!
//! Configuration comes from a structured text file (see `RunConfig`);
//! every flag here overrides the corresponding file key. The output root
//! can also be set through the `HYPDELAY_OUT` environment variable.

use clap::{Args, Parser, Subcommand};
use hypdelay::config::RunConfig;
use hypdelay::scenario;
use hypdelay::simulator::ControlMode;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hypdelay", version, about = "Delay-adaptive boundary control toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Configuration file; defaults to the vessel study's adaptive case.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Spatial nodes on [0, 1].
    #[arg(long)]
    nx: Option<usize>,
    /// Time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Simulation horizon.
    #[arg(long)]
    t_end: Option<f64>,
    /// Control mode: open_loop | nominal | adaptive.
    #[arg(long)]
    mode: Option<String>,
    /// True input delay (known only to the simulator).
    #[arg(long)]
    dtrue: Option<f64>,
    /// Initial delay estimate.
    #[arg(long)]
    dhat0: Option<f64>,
    /// Feedback gain entries, comma separated.
    #[arg(long)]
    k: Option<String>,
    /// Log stride (steps per logged row).
    #[arg(long)]
    stride: Option<usize>,
    /// Abort when an assumption or feasibility check fails instead of
    /// warning.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check the standing assumptions and the Lyapunov weight chain,
    /// printing signed margins.
    Validate(Common),
    /// Solve all kernel stages at a given delay and dump every table,
    /// the gains and the norm constants as CSV.
    Kernels {
        #[command(flatten)]
        common: Common,
        /// Delay candidate to build the tables for.
        #[arg(long)]
        delay: f64,
    },
    /// Run one closed-loop simulation, writing trajectory and events CSV.
    Simulate(Common),
    /// Reproduce the four published vessel cases (open loop, frozen
    /// estimate, two adaptive runs) and a comparison summary.
    ReproduceDcv(Common),
}

fn load_config(common: &Common) -> Result<RunConfig, hypdelay::Error> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(nx) = common.nx {
        cfg.nx = nx;
    }
    if let Some(dt) = common.dt {
        cfg.dt = dt;
    }
    if let Some(t_end) = common.t_end {
        cfg.t_end = t_end;
    }
    if let Some(mode) = &common.mode {
        cfg.mode = match mode.as_str() {
            "open_loop" => ControlMode::OpenLoop,
            "nominal" => ControlMode::Nominal,
            "adaptive" => ControlMode::Adaptive,
            other => {
                return Err(hypdelay::Error::Config {
                    line: None,
                    msg: format!("--mode must be open_loop|nominal|adaptive, got `{other}`"),
                })
            }
        };
    }
    if let Some(d) = common.dtrue {
        cfg.d_true = d;
    }
    if let Some(d) = common.dhat0 {
        cfg.dhat0 = d;
    }
    if let Some(k) = &common.k {
        cfg.k = k
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| hypdelay::Error::Config {
                    line: None,
                    msg: format!("--k expects comma-separated numbers, got `{k}`"),
                })
            })
            .collect::<Result<_, _>>()?;
    }
    if let Some(s) = common.stride {
        cfg.log_stride = s;
    }
    Ok(cfg)
}

/// Resolve the output directory against `HYPDELAY_OUT` when set.
fn out_dir(cfg: &RunConfig) -> PathBuf {
    match std::env::var_os("HYPDELAY_OUT") {
        Some(root) if cfg.out_dir.is_relative() => Path::new(&root).join(&cfg.out_dir),
        _ => cfg.out_dir.clone(),
    }
}

fn check_gate(cfg: &RunConfig, strict: bool) -> Result<(), hypdelay::Error> {
    let summary = scenario::run_validate(cfg)?;
    if !summary.report.all_pass() || !summary.lyapunov.margins.all_pass() {
        eprintln!("warning: marginal configuration\n{}", summary.text);
        if strict {
            return Err(hypdelay::Error::Config {
                line: None,
                msg: "validation failed in --strict mode".into(),
            });
        }
    }
    Ok(())
}

fn run() -> Result<(), hypdelay::Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate(common) => {
            let cfg = load_config(&common)?;
            let summary = scenario::run_validate(&cfg)?;
            println!("{}", summary.text);
            if common.strict && (!summary.report.all_pass() || !summary.lyapunov.margins.all_pass())
            {
                return Err(hypdelay::Error::Config {
                    line: None,
                    msg: "validation failed in --strict mode".into(),
                });
            }
        }
        Command::Kernels { common, delay } => {
            let cfg = load_config(&common)?;
            check_gate(&cfg, common.strict)?;
            let dir = out_dir(&cfg);
            let files = scenario::run_kernels(&cfg, delay, &dir)?;
            println!("wrote {} files to {}", files.len(), dir.display());
        }
        Command::Simulate(common) => {
            let cfg = load_config(&common)?;
            check_gate(&cfg, common.strict)?;
            let dir = out_dir(&cfg);
            let out = scenario::run_simulate(&cfg, &dir)?;
            let last = out.log.rows.last().expect("at least one logged row");
            if out.boundary_residual.abs() > 1e-9 {
                eprintln!(
                    "note: initial data violates the left boundary relation by {:+.4} \
                     (published initial velocity; use `initial = compatible` to zero it)",
                    out.boundary_residual
                );
            }
            println!(
                "{} rows, {} events; omega(0) = {:.6e}, omega({}) = {:.6e}",
                out.log.rows.len(),
                out.log.events.len(),
                out.log.rows[0].omega,
                last.t,
                last.omega
            );
            println!("trajectory: {}", out.trajectory_path.display());
            println!("events:     {}", out.events_path.display());
        }
        Command::ReproduceDcv(common) => {
            let cfg = load_config(&common)?;
            check_gate(&cfg, common.strict)?;
            let dir = out_dir(&cfg);
            let cases = scenario::run_reproduce_dcv(&cfg, &dir)?;
            for case in &cases {
                let first_event = case.log.events.get(1);
                match first_event {
                    Some(e) => println!(
                        "{}: first event t = {:.3}, estimate {:.6}",
                        case.name, e.t, e.dhat
                    ),
                    None => println!("{}: no trigger events", case.name),
                }
            }
            println!("summary: {}", dir.join("summary.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
