//! Third-stage kernels: the Volterra resolvent pair for the actuator PDE.
//!
//! The boundary nonlocal term in the transformed actuator equation is
//! removed by `u(x) = uhat(x) + int_x^1 r(x,y) uhat(y) dy`, whose kernel
//! has the closed form
//!
//! ```text
//! r(x,y) = -(q2 c0 / d) k2(x - y + 1, 1)
//! ```
//!
//! The inverse map `uhat(x) = u(x) + int_x^1 p(x,y) u(y) dy` has a kernel
//! that is constant along the characteristics `y - x = const` (both `r`
//! and `p` satisfy `k_x + k_y = 0`, which pairs with `r` being a
//! difference kernel under the Volterra resolvent identity). Writing
//! `p(x,y) = f(y - x)` reduces the `y = 1` boundary condition to a scalar
//! Volterra equation for `f` on `[0, 1]`, marched with trapezoid
//! quadrature and a fixed-point resolution of the implicit endpoint.

use crate::grid::Grid;
use crate::plant::PlantParams;
use crate::table::Table2D;

use super::stage2::Stage2Kernels;

/// Gridded stage-3 kernels on the upper triangle `0 <= x <= y <= 1`.
#[derive(Debug, Clone)]
pub struct Stage3Kernels {
    pub r: Table2D,
    pub p: Table2D,
    /// One-variable profile with `p(x,y) = f[(j - i)]` on grid nodes.
    pub f: Vec<f64>,
    /// Inverse delay the tables were generated for.
    pub d: f64,
    pub nx: usize,
    /// Set when the per-step fixed point stopped contracting; the last
    /// iterate is kept and the solve continues.
    pub fixed_point_warning: bool,
}

impl Stage3Kernels {
    pub fn max_abs(&self) -> f64 {
        self.r.max_abs().max(self.p.max_abs())
    }
}

/// Build `r` by direct evaluation and `p` by the one-variable Volterra
/// march. `x - y + 1` lands exactly on grid nodes, so no interpolation is
/// involved anywhere.
pub fn solve_stage3(s2: &Stage2Kernels, params: &PlantParams, grid: &Grid) -> Stage3Kernels {
    let n = grid.nx;
    let dx = grid.dx;
    let d = s2.d;
    let gain = params.q2 * params.c0 / d;

    // k2 top trace, k2(x, 1), indexed by the x node.
    let k2_top: Vec<f64> = (0..n).map(|i| s2.k2.get(i, n - 1)).collect();

    let mut r = Table2D::zeros(n);
    r.fill_upper(|i, j| -gain * k2_top[i + (n - 1) - j]);

    // f(sigma) = gain * [ k2(1 - sigma, 1)
    //                     + int_0^sigma f(tau) k2(tau + 1 - sigma, 1) dtau ]
    let mut f = vec![0.0; n];
    let mut warning = false;
    f[0] = gain * k2_top[n - 1];
    for k in 1..n {
        // Known part of the trapezoid sum (tau nodes 0..k-1).
        let mut known = 0.5 * f[0] * k2_top[n - 1 - k];
        for j in 1..k {
            known += f[j] * k2_top[j + (n - 1) - k];
        }
        let base = gain * (k2_top[n - 1 - k] + dx * known);
        let implicit = gain * 0.5 * dx * k2_top[n - 1];
        let mut fk = f[k - 1];
        let mut last_step = f64::INFINITY;
        let mut converged = false;
        for _ in 0..200 {
            let next = base + implicit * fk;
            let step = (next - fk).abs();
            fk = next;
            if step <= 1e-15 * (1.0 + fk.abs()) {
                converged = true;
                break;
            }
            if step > last_step {
                // Not contracting: keep the last iterate and flag it.
                warning = true;
                converged = true;
                break;
            }
            last_step = step;
        }
        if !converged {
            warning = true;
        }
        f[k] = fk;
    }

    let mut p = Table2D::zeros(n);
    p.fill_upper(|i, j| f[j - i]);

    Stage3Kernels {
        r,
        p,
        f,
        d,
        nx: n,
        fixed_point_warning: warning,
    }
}
