//! Uniform space/time grid and trapezoid quadrature.

use crate::error::Error;
use crate::plant::PlantParams;
use crate::Result;

/// Uniform discretization of the unit interval and the time axis.
///
/// `dx = 1/(nx - 1)`; node `i` sits at `x_i = i*dx`. The same `dx` is used
/// for every kernel domain (triangles and the unit square).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub dx: f64,
    pub dt: f64,
    pub t_end: f64,
}

impl Grid {
    /// Build a grid and check the explicit upwind stability bound against
    /// the worst *admissible* actuator speed `1/Dmin`, so one grid can
    /// serve any candidate delay. This is the conservative constructor;
    /// it rejects the published vessel setup (whose `Dmin` is far below
    /// the true delay) even though the time stepper never advects at
    /// `1/Dmin` — see [`Grid::build_for_simulation`].
    pub fn build(nx: usize, dt: f64, t_end: f64, params: &PlantParams) -> Result<Grid> {
        Self::build_checked(nx, dt, t_end, params, 1.0 / params.d_min, "actuator speed 1/Dmin")
    }

    /// Build a grid checked against the speeds the stepper actually
    /// advects: the kernel solves are steady-state characteristic
    /// integrations with no CFL constraint, so the only delay-dependent
    /// transport is the actuator state at `1/Dtrue`.
    pub fn build_for_simulation(
        nx: usize,
        dt: f64,
        t_end: f64,
        params: &PlantParams,
    ) -> Result<Grid> {
        Self::build_checked(
            nx,
            dt,
            t_end,
            params,
            1.0 / params.d_true,
            "actuator speed 1/Dtrue",
        )
    }

    fn build_checked(
        nx: usize,
        dt: f64,
        t_end: f64,
        params: &PlantParams,
        actuator_speed: f64,
        actuator_name: &'static str,
    ) -> Result<Grid> {
        if nx < 3 {
            return Err(Error::Grid(format!("nx = {nx}, need at least 3 nodes")));
        }
        if dt <= 0.0 || t_end <= 0.0 {
            return Err(Error::Grid(format!(
                "non-positive steps: dt = {dt}, t_end = {t_end}"
            )));
        }
        let dx = 1.0 / (nx - 1) as f64;
        let speeds: [(&'static str, f64); 3] = [
            ("plant speed q1", params.q1),
            ("plant speed q2", params.q2),
            (actuator_name, actuator_speed),
        ];
        for (name, s) in speeds {
            let cfl = s * dt / dx;
            if cfl > 1.0 + 1e-12 {
                return Err(Error::Cfl {
                    speed_name: name,
                    speed: s,
                    cfl,
                    dt,
                    dx,
                });
            }
        }
        Ok(Grid { nx, dx, dt, t_end })
    }

    /// Grid built without the CFL check, for kernel-only work where no
    /// time stepping happens.
    pub fn spatial_only(nx: usize) -> Grid {
        Grid {
            nx,
            dx: 1.0 / (nx - 1) as f64,
            dt: 1.0,
            t_end: 1.0,
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    /// Node coordinates 0, dx, ..., 1.
    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Trapezoid rule over a full profile with spacing `dx`.
pub fn trapz(dx: f64, f: &[f64]) -> f64 {
    match f.len() {
        0 | 1 => 0.0,
        n => {
            let mut s = 0.5 * (f[0] + f[n - 1]);
            for v in &f[1..n - 1] {
                s += v;
            }
            s * dx
        }
    }
}

/// Trapezoid rule over the node range `[i0, i1]` (inclusive).
pub fn trapz_range(dx: f64, f: &[f64], i0: usize, i1: usize) -> f64 {
    if i1 <= i0 {
        return 0.0;
    }
    let mut s = 0.5 * (f[i0] + f[i1]);
    for v in &f[i0 + 1..i1] {
        s += v;
    }
    s * dx
}

/// Trapezoid rule of the product `f.g` over `[i0, i1]` (inclusive).
pub fn trapz_prod_range(dx: f64, f: &[f64], g: &[f64], i0: usize, i1: usize) -> f64 {
    if i1 <= i0 {
        return 0.0;
    }
    let mut s = 0.5 * (f[i0] * g[i0] + f[i1] * g[i1]);
    for i in i0 + 1..i1 {
        s += f[i] * g[i];
    }
    s * dx
}

/// L2 norm squared of a profile, by trapezoid.
pub fn l2_sq(dx: f64, f: &[f64]) -> f64 {
    match f.len() {
        0 | 1 => 0.0,
        n => {
            let mut s = 0.5 * (f[0] * f[0] + f[n - 1] * f[n - 1]);
            for v in &f[1..n - 1] {
                s += v * v;
            }
            s * dx
        }
    }
}

/// Linear interpolation of a gridded profile at `x` (clamped to [0, 1]).
pub fn interp_linear(dx: f64, f: &[f64], x: f64) -> f64 {
    let n = f.len();
    debug_assert!(n >= 2);
    let xc = x.clamp(0.0, (n - 1) as f64 * dx);
    let mut i = (xc / dx).floor() as usize;
    if i >= n - 1 {
        i = n - 2;
    }
    let t = (xc - i as f64 * dx) / dx;
    f[i] * (1.0 - t) + f[i + 1] * t
}
