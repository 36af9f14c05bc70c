//! Crate error type.

use thiserror::Error;

/// Everything that can go wrong across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix/vector dimensions of the ODE block do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A grid would violate the explicit-scheme stability bound.
    #[error(
        "CFL violation: {speed_name} = {speed:.6} gives {speed:.6}*dt/dx = {cfl:.6} > 1 \
         (dt = {dt}, dx = {dx}); reduce dt or refine in time"
    )]
    Cfl {
        speed_name: &'static str,
        speed: f64,
        cfl: f64,
        dt: f64,
        dx: f64,
    },

    /// Invalid grid request (too few nodes, non-positive steps).
    #[error("invalid grid: {0}")]
    Grid(String),

    /// A kernel solve did not converge within the sweep budget.
    #[error("kernel solve did not converge: {what} (residual {residual:.3e} after {sweeps} sweeps)")]
    KernelConvergence {
        what: &'static str,
        residual: f64,
        sweeps: usize,
    },

    /// The target ODE matrix is singular, so the actuator-transform ODE has no solution.
    #[error("singular closed-loop ODE matrix: {0}")]
    SingularMatrix(String),

    /// Kernel tables and state were built on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Gains handed to the adaptive law were built for a different estimate.
    #[error("stale gains: built for delay {built_for}, current estimate {current}")]
    StaleGains { built_for: f64, current: f64 },

    /// A simulated field went non-finite.
    #[error("state blow-up in field `{field}` at t = {t}")]
    BlowUp { field: &'static str, t: f64 },

    /// Event count exceeded the hard bound (one event per step).
    #[error("event storm: {count} events by t = {t}; trigger configuration is degenerate")]
    EventStorm { count: usize, t: f64 },

    /// Configuration file problems, with the offending line when known.
    #[error("config error{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    /// Unphysical scenario parameters (e.g. non-positive static tension).
    #[error("unphysical configuration: {0}")]
    Unphysical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(line: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            line: Some(line),
            msg: msg.into(),
        }
    }

    pub(crate) fn config_top(msg: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            msg: msg.into(),
        }
    }
}
