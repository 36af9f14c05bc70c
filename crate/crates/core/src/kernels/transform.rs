//! Forward and inverse state transformations built from the kernel tables.

use crate::error::Error;
use crate::grid::Grid;
use crate::plant::SystemState;
use crate::Result;
use nalgebra::DVector;

use super::{Stage1Kernels, Stage2Kernels, Stage3Kernels};

/// State of the transformed (target) system: `alpha`, `beta` replace the
/// plant pair, `uhat` replaces the actuator state, the ODE state is shared.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetState {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub uhat: Vec<f64>,
    pub x: DVector<f64>,
    pub t: f64,
}

impl TargetState {
    /// Squared target norm `||alpha||^2 + ||beta||^2 + ||uhat||^2 + |X|^2`.
    pub fn omega_bar(&self, grid: &Grid) -> f64 {
        crate::grid::l2_sq(grid.dx, &self.alpha)
            + crate::grid::l2_sq(grid.dx, &self.beta)
            + crate::grid::l2_sq(grid.dx, &self.uhat)
            + self.x.norm_squared()
    }
}

fn check_nx(nx: usize, s1: &Stage1Kernels, s2: &Stage2Kernels, s3: &Stage3Kernels, grid: &Grid) -> Result<()> {
    if s1.nx != grid.nx || s2.nx != grid.nx || s3.nx != grid.nx || nx != grid.nx {
        return Err(Error::GridMismatch(format!(
            "state has {} nodes; kernels have ({}, {}, {}); grid has {}",
            nx, s1.nx, s2.nx, s3.nx, grid.nx
        )));
    }
    Ok(())
}

/// Map `(z, w, v, X)` to `(alpha, beta, uhat, X)`. All integrals are
/// trapezoid on the shared grid.
pub fn forward_transform(
    state: &SystemState,
    s1: &Stage1Kernels,
    s2: &Stage2Kernels,
    s3: &Stage3Kernels,
    grid: &Grid,
) -> Result<TargetState> {
    check_nx(state.nx(), s1, s2, s3, grid)?;
    let n = grid.nx;
    let dx = grid.dx;

    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    for i in 0..n {
        alpha[i] = state.z[i]
            - s1.alpha_z.trapz_row_lower(dx, i, &state.z)
            - s1.alpha_w.trapz_row_lower(dx, i, &state.w)
            - (&s1.alpha_x[i] * &state.x)[0];
        beta[i] = state.w[i]
            - s1.beta_z.trapz_row_lower(dx, i, &state.z)
            - s1.beta_w.trapz_row_lower(dx, i, &state.w)
            - (&s1.beta_x[i] * &state.x)[0];
    }

    let mut u = vec![0.0; n];
    for i in 0..n {
        u[i] = state.v[i]
            + s2.k1.trapz_row_full(dx, i, &alpha)
            + s2.k2.trapz_row_full(dx, i, &beta)
            + (&s2.eta[i] * &state.x)[0];
    }

    let mut uhat = vec![0.0; n];
    for i in 0..n {
        uhat[i] = u[i] + s3.p.trapz_row_upper(dx, i, &u);
    }

    Ok(TargetState {
        alpha,
        beta,
        uhat,
        x: state.x.clone(),
        t: state.t,
    })
}

/// Map `(alpha, beta, uhat, X)` back to `(z, w, v, X)`.
pub fn inverse_transform(
    target: &TargetState,
    s1: &Stage1Kernels,
    s2: &Stage2Kernels,
    s3: &Stage3Kernels,
    grid: &Grid,
) -> Result<SystemState> {
    check_nx(target.alpha.len(), s1, s2, s3, grid)?;
    let n = grid.nx;
    let dx = grid.dx;

    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        z[i] = target.alpha[i]
            - s1.z_alpha.trapz_row_lower(dx, i, &target.alpha)
            - s1.z_beta.trapz_row_lower(dx, i, &target.beta)
            - (&s1.z_x[i] * &target.x)[0];
        w[i] = target.beta[i]
            - s1.w_alpha.trapz_row_lower(dx, i, &target.alpha)
            - s1.w_beta.trapz_row_lower(dx, i, &target.beta)
            - (&s1.w_x[i] * &target.x)[0];
    }

    let mut u = vec![0.0; n];
    for i in 0..n {
        u[i] = target.uhat[i] + s3.r.trapz_row_upper(dx, i, &target.uhat);
    }

    let mut v = vec![0.0; n];
    for i in 0..n {
        v[i] = u[i]
            - s2.k1.trapz_row_full(dx, i, &target.alpha)
            - s2.k2.trapz_row_full(dx, i, &target.beta)
            - (&s2.eta[i] * &target.x)[0];
    }

    Ok(SystemState {
        z,
        w,
        v,
        x: target.x.clone(),
        t: target.t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{solve_stage1, solve_stage2, solve_stage3};
    use crate::plant::test_params;
    use crate::table::Table2D;
    use approx::assert_relative_eq;
    use nalgebra::RowDVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_kernels(nx: usize, m: usize) -> (Stage1Kernels, Stage2Kernels, Stage3Kernels) {
        let s1 = Stage1Kernels {
            alpha_z: Table2D::zeros(nx),
            alpha_w: Table2D::zeros(nx),
            beta_z: Table2D::zeros(nx),
            beta_w: Table2D::zeros(nx),
            alpha_x: vec![RowDVector::zeros(m); nx],
            beta_x: vec![RowDVector::zeros(m); nx],
            z_alpha: Table2D::zeros(nx),
            z_beta: Table2D::zeros(nx),
            w_alpha: Table2D::zeros(nx),
            w_beta: Table2D::zeros(nx),
            z_x: vec![RowDVector::zeros(m); nx],
            w_x: vec![RowDVector::zeros(m); nx],
            nx,
            sweeps: (0, 0),
        };
        let s2 = Stage2Kernels {
            k1: Table2D::zeros(nx),
            k2: Table2D::zeros(nx),
            eta: vec![RowDVector::zeros(m); nx],
            d: 1.0,
            nx,
            sweeps: 0,
        };
        let s3 = Stage3Kernels {
            r: Table2D::zeros(nx),
            p: Table2D::zeros(nx),
            f: vec![0.0; nx],
            d: 1.0,
            nx,
            fixed_point_warning: false,
        };
        (s1, s2, s3)
    }

    fn random_state(nx: usize, m: usize, seed: u64) -> SystemState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SystemState {
            z: (0..nx).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            w: (0..nx).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            v: (0..nx).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            x: nalgebra::DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0)),
            t: 0.0,
        }
    }

    #[test]
    fn zero_state_maps_to_zero_target() {
        let p = test_params();
        let g = Grid::spatial_only(21);
        let s1 = solve_stage1(&p, &g).unwrap();
        let s2 = solve_stage2(&s1, 1.0 / p.d_true, &p, &g).unwrap();
        let s3 = solve_stage3(&s2, &p, &g);
        let t = forward_transform(&SystemState::zero(21, 1), &s1, &s2, &s3, &g).unwrap();
        assert_eq!(t.omega_bar(&g), 0.0);
        let back = inverse_transform(&t, &s1, &s2, &s3, &g).unwrap();
        assert_eq!(back.omega(&g), 0.0);
    }

    #[test]
    fn zero_kernels_reduce_to_identity() {
        let g = Grid::spatial_only(21);
        let (s1, s2, s3) = zero_kernels(21, 1);
        let s = random_state(21, 1, 7);
        let t = forward_transform(&s, &s1, &s2, &s3, &g).unwrap();
        assert_eq!(t.alpha, s.z);
        assert_eq!(t.beta, s.w);
        assert_eq!(t.uhat, s.v);
        let back = inverse_transform(&t, &s1, &s2, &s3, &g).unwrap();
        assert_eq!(back.z, s.z);
        assert_eq!(back.w, s.w);
        assert_eq!(back.v, s.v);
    }

    #[test]
    fn forward_transform_is_linear_to_machine_precision() {
        let p = test_params();
        let g = Grid::spatial_only(26);
        let s1 = solve_stage1(&p, &g).unwrap();
        let s2 = solve_stage2(&s1, 1.0 / p.d_true, &p, &g).unwrap();
        let s3 = solve_stage3(&s2, &p, &g);
        let s = random_state(26, 1, 3);
        let mut scaled = s.clone();
        let a = -2.5;
        for v in scaled.z.iter_mut().chain(&mut scaled.w).chain(&mut scaled.v) {
            *v *= a;
        }
        scaled.x *= a;
        let t = forward_transform(&s, &s1, &s2, &s3, &g).unwrap();
        let ts = forward_transform(&scaled, &s1, &s2, &s3, &g).unwrap();
        for i in 0..g.nx {
            assert_relative_eq!(ts.alpha[i], a * t.alpha[i], max_relative = 1e-12, epsilon = 1e-12);
            assert_relative_eq!(ts.beta[i], a * t.beta[i], max_relative = 1e-12, epsilon = 1e-12);
            assert_relative_eq!(ts.uhat[i], a * t.uhat[i], max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn round_trip_recovers_state_within_quadrature_error() {
        let p = test_params();
        let g = Grid::spatial_only(51);
        let s1 = solve_stage1(&p, &g).unwrap();
        let s2 = solve_stage2(&s1, 1.0 / p.d_true, &p, &g).unwrap();
        let s3 = solve_stage3(&s2, &p, &g);
        let tol = 20.0 * g.dx;
        for seed in 0..4 {
            let s = random_state(51, 1, seed);
            let t = forward_transform(&s, &s1, &s2, &s3, &g).unwrap();
            let back = inverse_transform(&t, &s1, &s2, &s3, &g).unwrap();
            let mut worst = (s.x.clone() - &back.x).amax();
            for i in 0..g.nx {
                worst = worst
                    .max((s.z[i] - back.z[i]).abs())
                    .max((s.w[i] - back.w[i]).abs())
                    .max((s.v[i] - back.v[i]).abs());
            }
            assert!(worst <= tol, "seed {seed}: round-trip error {worst} > {tol}");
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let g = Grid::spatial_only(21);
        let (s1, s2, s3) = zero_kernels(21, 1);
        let s = SystemState::zero(31, 1);
        assert!(matches!(
            forward_transform(&s, &s1, &s2, &s3, &g),
            Err(crate::Error::GridMismatch(_))
        ));
    }
}
