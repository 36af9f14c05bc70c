//! Second-stage kernels: the actuator change of coordinates.
//!
//! The actuator transport state `v` is mapped to
//!
//! ```text
//! u(x) = v(x) + int_0^1 k1(x,y) alpha(y) dy + int_0^1 k2(x,y) beta(y) dy + eta(x) X
//! ```
//!
//! where `k1`, `k2` live on the unit square and satisfy constant-coefficient
//! transport PDEs whose speeds involve the candidate inverse delay
//! `d = 1/D`. Data sits on the `x = 1` edge (built from stage-1 inverse
//! kernels), on the `y = 1` edge for `k1` (proportional to `k2`'s top
//! trace), and on the `y = 0` edge for `k2` (coupled to `k1` and `eta`).
//! Characteristics are straight lines, so each solve is an exact
//! exponential along the ray to the data boundary; the `k1 <-> k2` boundary
//! coupling is resolved by successive substitution.

use crate::error::Error;
use crate::grid::{interp_linear, Grid};
use crate::plant::PlantParams;
use crate::table::Table2D;
use crate::Result;
use nalgebra::RowDVector;

use super::stage1::Stage1Kernels;

const MAX_SWEEPS: usize = 100;
const SWEEP_TOL: f64 = 1e-12;

/// Gridded stage-2 kernels at a fixed inverse delay `d`.
#[derive(Debug, Clone)]
pub struct Stage2Kernels {
    pub k1: Table2D,
    pub k2: Table2D,
    pub eta: Vec<RowDVector<f64>>,
    /// Inverse delay `1/D` these tables were generated for.
    pub d: f64,
    pub nx: usize,
    pub sweeps: usize,
}

impl Stage2Kernels {
    pub fn max_abs(&self) -> f64 {
        let mut m = self.k1.max_abs().max(self.k2.max_abs());
        for row in &self.eta {
            m = m.max(row.amax());
        }
        m
    }
}

/// Solve `k1`, `k2`, `eta` for the inverse delay `dhat_inv = 1/D_hat`.
pub fn solve_stage2(
    s1: &Stage1Kernels,
    dhat_inv: f64,
    params: &PlantParams,
    grid: &Grid,
) -> Result<Stage2Kernels> {
    if s1.nx != grid.nx {
        return Err(Error::GridMismatch(format!(
            "stage-1 kernels on {} nodes, grid has {}",
            s1.nx, grid.nx
        )));
    }
    let n = grid.nx;
    let d = dhat_inv;
    let pd = params;
    let a_m = pd.a_m();
    if a_m.clone().lu().try_inverse().is_none() {
        return Err(Error::SingularMatrix(
            "A + B K^T is singular; the actuator-transform ODE has no terminal solution".into(),
        ));
    }

    // eta solves eta'(x) = -(1/d) eta(x) A_m backward from
    // eta(1) = (-q zbar_x(1) + wbar_x(1)) / c0.
    let eta_end = (-&s1.z_x[n - 1] * pd.q + &s1.w_x[n - 1]) / pd.c0;
    let eta = integrate_eta_backward(eta_end, d, &a_m, grid);

    // x = 1 data built from the stage-1 inverse kernels.
    let right_k1: Vec<f64> = (0..n)
        .map(|j| (s1.w_alpha.get(n - 1, j) - pd.q * s1.z_alpha.get(n - 1, j)) / pd.c0)
        .collect();
    let right_k2: Vec<f64> = (0..n)
        .map(|j| (s1.w_beta.get(n - 1, j) - pd.q * s1.z_beta.get(n - 1, j)) / pd.c0)
        .collect();

    let eta_b: Vec<f64> = (0..n).map(|i| (&eta[i] * &pd.b)[0]).collect();

    let mut k1 = Table2D::zeros(n);
    let mut k2 = Table2D::zeros(n);
    let mut sweeps = 0;
    for sweep in 0..MAX_SWEEPS {
        // y = 0 data for k2 from the edge relation
        // q1 p k1(x,0) + q2 k2(x,0) = eta(x) B.
        let bottom_k2: Vec<f64> = (0..n)
            .map(|i| (eta_b[i] - pd.q1 * pd.p * k1.get(i, 0)) / pd.q2)
            .collect();
        let k2_new = solve_k2(&right_k2, &bottom_k2, d, pd, grid);
        let top_k1: Vec<f64> = (0..n)
            .map(|i| pd.q * pd.q2 / pd.q1 * k2_new.get(i, n - 1))
            .collect();
        let k1_new = solve_k1(&right_k1, &top_k1, d, pd, grid);

        let delta = k1.max_diff(&k1_new).max(k2.max_diff(&k2_new));
        k1 = k1_new;
        k2 = k2_new;
        sweeps = sweep + 1;
        let scale = 1.0 + k1.max_abs().max(k2.max_abs());
        if delta < SWEEP_TOL * scale {
            break;
        }
        if sweep + 1 == MAX_SWEEPS {
            return Err(Error::KernelConvergence {
                what: "stage-2 boundary coupling sweeps",
                residual: delta,
                sweeps: MAX_SWEEPS,
            });
        }
    }

    Ok(Stage2Kernels {
        k1,
        k2,
        eta,
        d,
        nx: n,
        sweeps,
    })
}

fn integrate_eta_backward(
    eta_end: RowDVector<f64>,
    d: f64,
    a_m: &nalgebra::DMatrix<f64>,
    grid: &Grid,
) -> Vec<RowDVector<f64>> {
    let n = grid.nx;
    let nsub = 4;
    let h = -grid.dx / nsub as f64; // marching toward x = 0
    let deriv = |e: &RowDVector<f64>| e * a_m * (-1.0 / d);
    let mut out = vec![RowDVector::zeros(eta_end.ncols()); n];
    let mut e = eta_end;
    out[n - 1] = e.clone();
    for i in (0..n - 1).rev() {
        for _ in 0..nsub {
            let k1 = deriv(&e);
            let k2 = deriv(&(&e + &k1 * (h / 2.0)));
            let k3 = deriv(&(&e + &k2 * (h / 2.0)));
            let k4 = deriv(&(&e + &k3 * h));
            e += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        out[i] = e.clone();
    }
    out
}

/// `d k1_x + q1 k1_y = -d1 k1`: characteristics run up-right with slope
/// `q1/d`. Each node takes the boundary value at its forward exit (through
/// `x = 1` or `y = 1`) scaled by the exact exponential of the in-line decay.
/// Nodes on `y = 1` take the top data,  which imposes the `k1/k2`
/// proportionality there exactly (the top edge wins at the corner).
fn solve_k1(right: &[f64], top: &[f64], d: f64, pd: &PlantParams, grid: &Grid) -> Table2D {
    let n = grid.nx;
    let dx = grid.dx;
    let slope = pd.q1 / d;
    let mut out = Table2D::zeros(n);
    for i in 0..n {
        let x = grid.x(i);
        for j in 0..n {
            let y = grid.x(j);
            let (x_exit, val) = if j == n - 1 {
                (x, top[i])
            } else {
                let y_at_right = y + slope * (1.0 - x);
                if y_at_right <= 1.0 {
                    (1.0, interp_linear(dx, right, y_at_right))
                } else {
                    let xe = x + d / pd.q1 * (1.0 - y);
                    (xe, interp_linear(dx, top, xe))
                }
            };
            out.set(i, j, val * ((pd.d1 / d) * (x_exit - x)).exp());
        }
    }
    out
}

/// `d k2_x - q2 k2_y = -d4 k2`: characteristics run down-right; exits are
/// through `x = 1` or `y = 0`.
fn solve_k2(right: &[f64], bottom: &[f64], d: f64, pd: &PlantParams, grid: &Grid) -> Table2D {
    let n = grid.nx;
    let dx = grid.dx;
    let slope = pd.q2 / d;
    let mut out = Table2D::zeros(n);
    for i in 0..n {
        let x = grid.x(i);
        for j in 0..n {
            let y = grid.x(j);
            let (x_exit, val) = if j == 0 && i < n - 1 {
                (x, bottom[i])
            } else {
                let y_at_right = y - slope * (1.0 - x);
                if y_at_right >= 0.0 {
                    (1.0, interp_linear(dx, right, y_at_right))
                } else {
                    let xe = x + d / pd.q2 * y;
                    (xe, interp_linear(dx, bottom, xe))
                }
            };
            out.set(i, j, val * ((pd.d4 / d) * (x_exit - x)).exp());
        }
    }
    out
}
