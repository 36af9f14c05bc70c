//! Backstepping kernel solvers and the state transformations they define.
//!
//! Three stages:
//!
//! 1. [`Stage1Kernels`] — the coupled Goursat system on the triangle
//!    `0 <= y <= x <= 1` that decouples the plant PDE pair from the ODE.
//!    Delay-independent.
//! 2. [`Stage2Kernels`] — transport kernels on the unit square plus a
//!    terminal ODE profile, parameterized by a candidate inverse delay
//!    `d = 1/D`.
//! 3. [`Stage3Kernels`] — the Volterra resolvent pair for the actuator
//!    PDE's boundary nonlocal term; one kernel is closed-form, the other
//!    is a one-variable Volterra march.
//!
//! Diagonal traces and endpoint anchors are imposed exactly, not solved
//! for; everything else is checked a posteriori by the residual
//! evaluators in [`residual`].

mod cache;
mod stage1;
mod stage2;
mod stage3;
mod transform;

pub mod residual;

pub use cache::KernelCache;
pub use stage1::{solve_stage1, Stage1Kernels};
pub use stage2::{solve_stage2, Stage2Kernels};
pub use stage3::{solve_stage3, Stage3Kernels};
pub use transform::{forward_transform, inverse_transform, TargetState};
