//! Boundary control of a 2x2 linear hyperbolic PDE coupled with an ODE,
//! under an unknown input delay.
//!
//! The plant is a pair of counter-propagating transport equations on the
//! unit interval, coupled in-domain and at the boundaries, driven through a
//! delayed scalar input. The delay is folded into a third transport
//! equation whose inflow is the control signal, so the whole system becomes
//! a PDE-PDE-ODE cascade on `[0, 1]`.
//!
//! The toolkit provides:
//!
//! - the three-stage backstepping kernel machinery ([`kernels`]): a coupled
//!   Goursat system on the triangle, a transport system on the unit square
//!   parameterized by a candidate delay, and a pair of Volterra resolvent
//!   kernels with closed-form / marching solutions;
//! - gain assembly and the nominal / certainty-equivalence control laws
//!   ([`controller`]), plus Lyapunov feasibility margins and the
//!   norm-equivalence constants that define the trigger's overshoot
//!   coefficient ([`lyapunov`]);
//! - an event-triggered batch least-squares identifier for the unknown
//!   delay ([`adaptation`]);
//! - an explicit upwind closed-loop simulator ([`simulator`]);
//! - the deep-sea construction vessel case study ([`dcv`]), configuration
//!   parsing ([`config`]) and scenario orchestration ([`scenario`]).
//!
//! All spatial integrals use the trapezoid rule on a uniform grid; the
//! time stepper is first-order explicit upwind. Everything is
//! deterministic: identical inputs produce bit-identical outputs.

pub mod adaptation;
pub mod config;
pub mod controller;
pub mod dcv;
pub mod error;
pub mod export;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod lyapunov;
pub mod plant;
pub mod scenario;
pub mod simulator;
pub mod table;

pub use error::Error;
pub use grid::Grid;
pub use plant::{validate_assumptions, AssumptionReport, PlantParams, SystemState};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
