//! Controller gains and the two printed control-law conventions.
//!
//! The delay-compensated feedback is a weighted sum of the four state
//! blocks:
//!
//! ```text
//! U = s1*int m1 z + s2*int m2 w + int m3 v + m4 X
//! ```
//!
//! The gain profiles are assembled from the kernel tables by nested
//! trapezoid quadrature. Two sign conventions for `(s1, s2)` are in
//! circulation for the same gain definitions: the original nominal law is
//! printed with leading minus signs on the `z` and `w` terms, while the
//! certainty-equivalence law is printed with all four terms positive.
//! Expanding the target-state feedback through the transformation chain
//! reproduces the all-positive version, so that is what the closed-loop
//! simulator uses; [`nominal_control`] keeps the printed minus-sign
//! convention so both published forms stay evaluable, and the two differ
//! exactly by the sign of the `z`/`w` terms.

use crate::error::Error;
use crate::grid::{trapz, Grid};
use crate::kernels::{Stage1Kernels, Stage2Kernels, Stage3Kernels};
use crate::plant::SystemState;
use crate::Result;
use nalgebra::RowDVector;

/// Relative slack when checking that gains match the current estimate.
const STALE_TOL: f64 = 1e-9;

/// Delay-parameterized gain functions.
#[derive(Debug, Clone)]
pub struct ControlGains {
    /// Weight on the `z` profile.
    pub m1: Vec<f64>,
    /// Weight on the `w` profile.
    pub m2: Vec<f64>,
    /// Weight on the actuator profile `v`.
    pub m3: Vec<f64>,
    /// Row vector acting on the ODE state.
    pub m4: RowDVector<f64>,
    /// Delay the gains were assembled for.
    pub d_used: f64,
}

/// Assemble the gain profiles from solved kernel tables sharing one grid.
///
/// Internally this builds the two composite profiles obtained by pushing
/// the target-state feedback through the third-stage resolvent, then folds
/// them back through the stage-1 transformation.
pub fn build_gains(
    s1: &Stage1Kernels,
    s2: &Stage2Kernels,
    s3: &Stage3Kernels,
    grid: &Grid,
) -> Result<ControlGains> {
    if s1.nx != grid.nx || s2.nx != grid.nx || s3.nx != grid.nx {
        return Err(Error::GridMismatch(format!(
            "kernel stages on ({}, {}, {}) nodes, grid has {}",
            s1.nx, s2.nx, s3.nx, grid.nx
        )));
    }
    let n = grid.nx;
    let dx = grid.dx;

    let r0: Vec<f64> = (0..n).map(|j| s3.r.get(0, j)).collect();

    // w1(s) = int_0^1 r(0,s1) p(s1,s) ds1  over s1 <= s (upper-triangle p):
    // the combined weight that the resolvent pair puts on u(s).
    let mut rp = vec![0.0; n];
    for sidx in 0..n {
        let prod: Vec<f64> = (0..=sidx).map(|s1i| r0[s1i] * s3.p.get(s1i, sidx)).collect();
        rp[sidx] = crate::grid::trapz_range(dx, &prod, 0, sidx);
    }
    // Composite weight on u(s): r(0,s) + int_0^s r(0,t) p(t,s) dt.
    // This is also m3 once u is expanded back to v.
    let m3: Vec<f64> = (0..n).map(|j| r0[j] + rp[j]).collect();

    // t1(y) = int_0^1 m3(s) k1(s,y) ds - k1(0,y); same with k2 for t2.
    // (The double integral over r and p collapses into the composite m3.)
    let mut t1 = vec![0.0; n];
    let mut t2 = vec![0.0; n];
    for y in 0..n {
        let k1col: Vec<f64> = (0..n).map(|s| s2.k1.get(s, y)).collect();
        let k2col: Vec<f64> = (0..n).map(|s| s2.k2.get(s, y)).collect();
        let p1: Vec<f64> = (0..n).map(|s| m3[s] * k1col[s]).collect();
        let p2: Vec<f64> = (0..n).map(|s| m3[s] * k2col[s]).collect();
        t1[y] = trapz(dx, &p1) - s2.k1.get(0, y);
        t2[y] = trapz(dx, &p2) - s2.k2.get(0, y);
    }

    // Fold through the stage-1 direct kernels.
    let mut m1 = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    for y in 0..n {
        // int_y^1 t1(s) alpha_z(s,y) ds etc.; the kernel argument order is
        // (s, y) with s >= y, i.e. the kernel's own lower triangle.
        let az: Vec<f64> = (0..n).map(|s| if s >= y { t1[s] * s1.alpha_z.get(s, y) } else { 0.0 }).collect();
        let bz: Vec<f64> = (0..n).map(|s| if s >= y { t2[s] * s1.beta_z.get(s, y) } else { 0.0 }).collect();
        let aw: Vec<f64> = (0..n).map(|s| if s >= y { t1[s] * s1.alpha_w.get(s, y) } else { 0.0 }).collect();
        let bw: Vec<f64> = (0..n).map(|s| if s >= y { t2[s] * s1.beta_w.get(s, y) } else { 0.0 }).collect();
        m1[y] = t1[y]
            - crate::grid::trapz_range(dx, &az, y, n - 1)
            - crate::grid::trapz_range(dx, &bz, y, n - 1);
        m2[y] = t2[y]
            - crate::grid::trapz_range(dx, &aw, y, n - 1)
            - crate::grid::trapz_range(dx, &bw, y, n - 1);
    }

    // ODE gain: the eta terms pushed through the resolvent, minus eta(0),
    // minus the stage-1 profiles weighted by t1/t2.
    let m = s2.eta[0].ncols();
    let mut m4 = RowDVector::<f64>::zeros(m);
    for c in 0..m {
        let eta_c: Vec<f64> = (0..n).map(|i| s2.eta[i][c]).collect();
        let re: Vec<f64> = (0..n).map(|i| m3[i] * eta_c[i]).collect();
        let t2l: Vec<f64> = (0..n).map(|i| t2[i] * s1.beta_x[i][c]).collect();
        let t1g: Vec<f64> = (0..n).map(|i| t1[i] * s1.alpha_x[i][c]).collect();
        m4[c] = trapz(dx, &re) - s2.eta[0][c] - trapz(dx, &t2l) - trapz(dx, &t1g);
    }

    Ok(ControlGains {
        m1,
        m2,
        m3,
        m4,
        d_used: 1.0 / s2.d,
    })
}

fn check_state(gains: &ControlGains, state: &SystemState) -> Result<()> {
    if gains.m1.len() != state.nx() {
        return Err(Error::GridMismatch(format!(
            "gains on {} nodes, state on {}",
            gains.m1.len(),
            state.nx()
        )));
    }
    Ok(())
}

/// The nominal law in its printed sign convention:
/// `U = -int m1 z - int m2 w + int m3 v + m4 X`.
pub fn nominal_control(state: &SystemState, gains: &ControlGains, grid: &Grid) -> Result<f64> {
    check_state(gains, state)?;
    let dx = grid.dx;
    let iz: Vec<f64> = gains.m1.iter().zip(&state.z).map(|(a, b)| a * b).collect();
    let iw: Vec<f64> = gains.m2.iter().zip(&state.w).map(|(a, b)| a * b).collect();
    let iv: Vec<f64> = gains.m3.iter().zip(&state.v).map(|(a, b)| a * b).collect();
    Ok(-trapz(dx, &iz) - trapz(dx, &iw) + trapz(dx, &iv) + (&gains.m4 * &state.x)[0])
}

/// The certainty-equivalence law, all four terms positive:
/// `U_d = int m1 z + int m2 w + int m3 v + m4 X`, with gains held constant
/// between trigger events. This is the convention consistent with the
/// gain derivation and the one the closed loop integrates.
///
/// `dhat_now` is the estimate the caller believes the gains were built
/// for; a mismatch signals an orchestration bug.
pub fn adaptive_control(
    state: &SystemState,
    gains: &ControlGains,
    dhat_now: f64,
    grid: &Grid,
) -> Result<f64> {
    check_state(gains, state)?;
    if (gains.d_used - dhat_now).abs() > STALE_TOL * dhat_now.abs().max(1.0) {
        return Err(Error::StaleGains {
            built_for: gains.d_used,
            current: dhat_now,
        });
    }
    let dx = grid.dx;
    let iz: Vec<f64> = gains.m1.iter().zip(&state.z).map(|(a, b)| a * b).collect();
    let iw: Vec<f64> = gains.m2.iter().zip(&state.w).map(|(a, b)| a * b).collect();
    let iv: Vec<f64> = gains.m3.iter().zip(&state.v).map(|(a, b)| a * b).collect();
    Ok(trapz(dx, &iz) + trapz(dx, &iw) + trapz(dx, &iv) + (&gains.m4 * &state.x)[0])
}
