//! Plant description, state container, and standing-assumption checks.

use crate::error::Error;
use crate::grid::{l2_sq, Grid};
use crate::linalg;
use crate::Result;
use nalgebra::{DMatrix, DVector, RowDVector};

/// Relative singular-value cutoff for the controllability rank test.
pub const CTRB_RANK_TOL: f64 = 1e-10;

/// All coefficients of the plant, the single source of physical truth.
///
/// The PDE pair transports `z` rightward at speed `q1` and `w` leftward at
/// speed `q2`, with in-domain couplings `d1..d4`, boundary couplings `p`
/// (left) and `q` (right), and input coefficient `c0`. The ODE block is
/// `(A, B, C)` with feedback gain `K`; `A + B K^T` must be Hurwitz.
/// `d_true` is the actual input delay, known only to the simulator; the
/// controller and identifier see only the bounds `[d_min, d_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantParams {
    pub q1: f64,
    pub q2: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub p: f64,
    pub q: f64,
    pub c0: f64,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub k: DVector<f64>,
    pub d_min: f64,
    pub d_max: f64,
    pub d_true: f64,
}

impl PlantParams {
    /// ODE state dimension.
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// Closed-loop ODE matrix `A + B K^T`.
    pub fn a_m(&self) -> DMatrix<f64> {
        &self.a + &self.b * self.k.transpose()
    }

    /// Check that A, B, C, K dimensions agree.
    pub fn check_dims(&self) -> Result<()> {
        let m = self.a.nrows();
        if self.a.ncols() != m {
            return Err(Error::Dimension(format!(
                "A must be square, got {}x{}",
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        if self.b.nrows() != m || self.c.ncols() != m || self.k.nrows() != m {
            return Err(Error::Dimension(format!(
                "A is {m}x{m} but B has {} rows, C has {} cols, K has {} rows",
                self.b.nrows(),
                self.c.ncols(),
                self.k.nrows()
            )));
        }
        if m == 0 {
            return Err(Error::Dimension("ODE dimension m must be >= 1".into()));
        }
        Ok(())
    }

    /// Left-hand side of the boundary-coupling smallness condition:
    /// `|pq| * exp(max{2 d4 / q2, 2 d1 / q1})`.
    pub fn coupling_bound_lhs(&self) -> f64 {
        (self.p * self.q).abs() * self.coupling_exponent().exp()
    }

    pub fn coupling_exponent(&self) -> f64 {
        (2.0 * self.d4 / self.q2).max(2.0 * self.d1 / self.q1)
    }
}

/// Discretized system state: plant profiles `z`, `w`, actuator transport
/// state `v` (all length `nx`), ODE state `x`, and current time.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub x: DVector<f64>,
    pub t: f64,
}

impl SystemState {
    /// Zero state on an `nx`-node grid with ODE dimension `m`. The actuator
    /// profile starts identically zero by definition of the transport
    /// representation of the delay.
    pub fn zero(nx: usize, m: usize) -> Self {
        SystemState {
            z: vec![0.0; nx],
            w: vec![0.0; nx],
            v: vec![0.0; nx],
            x: DVector::zeros(m),
            t: 0.0,
        }
    }

    pub fn nx(&self) -> usize {
        self.z.len()
    }

    /// Squared state norm `||z||^2 + ||w||^2 + ||v||^2 + |X|^2`.
    pub fn omega(&self, grid: &Grid) -> f64 {
        l2_sq(grid.dx, &self.z) + l2_sq(grid.dx, &self.w) + l2_sq(grid.dx, &self.v)
            + self.x.norm_squared()
    }
}

/// Outcome of one assumption check: the signed margin is positive when the
/// assumption holds, negative when it is violated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub pass: bool,
    pub margin: f64,
}

impl Check {
    fn from_margin(margin: f64) -> Self {
        Check {
            pass: margin >= 0.0,
            margin,
        }
    }
}

/// Per-assumption report. Checks never abort: marginal violations are
/// reported with signed margins so borderline instances stay visible.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    /// Rank of the controllability matrix of (A, B).
    pub controllability_rank: usize,
    pub controllable: bool,
    /// Numeric LHS of the boundary-coupling condition and its margin to
    /// the threshold `1/sqrt(2)` (positive = satisfied).
    pub coupling_lhs: f64,
    pub coupling: Check,
    /// Delay-bound ordering `0 < Dmin <= Dtrue <= Dmax`.
    pub delay_bounds: Check,
    /// Spectral abscissa of `A + B K^T`; margin is its negation.
    pub max_re_closed_loop: f64,
    pub hurwitz: Check,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.controllable && self.coupling.pass && self.delay_bounds.pass && self.hurwitz.pass
    }
}

impl std::fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let pf = |b: bool| if b { "pass" } else { "FAIL" };
        writeln!(
            f,
            "controllability: {} (rank {})",
            pf(self.controllable),
            self.controllability_rank
        )?;
        writeln!(
            f,
            "boundary coupling: {} (lhs {:.6} vs 1/sqrt(2) = {:.6}, margin {:+.6})",
            pf(self.coupling.pass),
            self.coupling_lhs,
            std::f64::consts::FRAC_1_SQRT_2,
            self.coupling.margin
        )?;
        writeln!(
            f,
            "delay bounds: {} (margin {:+.6})",
            pf(self.delay_bounds.pass),
            self.delay_bounds.margin
        )?;
        write!(
            f,
            "closed-loop ODE Hurwitz: {} (max Re eigenvalue {:+.6})",
            pf(self.hurwitz.pass),
            self.max_re_closed_loop
        )
    }
}

/// Evaluate every standing assumption with signed margins.
///
/// Errors only on malformed configurations (dimension mismatch); all
/// numeric checks are reported, never enforced.
pub fn validate_assumptions(params: &PlantParams) -> Result<AssumptionReport> {
    params.check_dims()?;
    let m = params.m();

    let rank = linalg::controllability_rank(&params.a, &params.b, CTRB_RANK_TOL);
    let lhs = params.coupling_bound_lhs();
    let coupling = Check::from_margin(std::f64::consts::FRAC_1_SQRT_2 - lhs);

    let delay_margin = (params.d_min)
        .min(params.d_true - params.d_min)
        .min(params.d_max - params.d_true);
    let delay_bounds = Check::from_margin(delay_margin);

    let max_re = linalg::max_re_eigenvalue(&params.a_m());
    let hurwitz = Check::from_margin(-max_re);

    Ok(AssumptionReport {
        controllability_rank: rank,
        controllable: rank == m,
        coupling_lhs: lhs,
        coupling,
        delay_bounds,
        max_re_closed_loop: max_re,
        hurwitz,
    })
}

/// A tame scalar parameter set used by tests and examples: O(1)
/// coefficients, comfortably inside every assumption.
pub fn test_params() -> PlantParams {
    PlantParams {
        q1: 1.0,
        q2: 0.8,
        d1: -0.1,
        d2: 0.15,
        d3: -0.12,
        d4: -0.08,
        p: 0.6,
        q: 0.5,
        c0: 1.0,
        a: DMatrix::from_element(1, 1, -0.4),
        b: DVector::from_element(1, 0.7),
        c: RowDVector::from_element(1, 1.0),
        k: DVector::from_element(1, -0.3),
        d_min: 0.5,
        d_max: 1.5,
        d_true: 0.9,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn small_couplings_pass_with_zero_exponent() {
        let mut p = test_params();
        p.p = 0.1;
        p.q = 0.1;
        p.d1 = 0.0;
        p.d4 = 0.0;
        let rep = validate_assumptions(&p).unwrap();
        assert_relative_eq!(rep.coupling_lhs, 0.01, epsilon = 1e-15);
        assert!(rep.coupling.pass);
    }

    #[test]
    fn zero_input_map_is_uncontrollable() {
        let mut p = test_params();
        p.b = DVector::from_element(1, 0.0);
        let rep = validate_assumptions(&p).unwrap();
        assert!(!rep.controllable);
        assert_eq!(rep.controllability_rank, 0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut p = test_params();
        p.k = DVector::from_column_slice(&[1.0, 2.0]);
        assert!(validate_assumptions(&p).is_err());
    }

    #[test]
    fn hurwitz_flips_when_gain_crosses_zero() {
        // Scalar plant: A_m = a + b*k. With a = 0.2, b = 1, the closed
        // loop is Hurwitz iff k < -0.2.
        let mut p = test_params();
        p.a = DMatrix::from_element(1, 1, 0.2);
        p.b = DVector::from_element(1, 1.0);
        p.k = DVector::from_element(1, -0.5);
        assert!(validate_assumptions(&p).unwrap().hurwitz.pass);
        p.k = DVector::from_element(1, -0.1);
        assert!(!validate_assumptions(&p).unwrap().hurwitz.pass);
    }

    #[test]
    fn omega_examples() {
        let g = Grid::spatial_only(51);
        let mut s = SystemState::zero(51, 1);
        assert_eq!(s.omega(&g), 0.0);
        s.z = vec![1.0; 51];
        assert_relative_eq!(s.omega(&g), 1.0, epsilon = 1e-13);
        // Scaling the full state by 2 quadruples the norm.
        let mut s2 = s.clone();
        for v in s2.z.iter_mut().chain(&mut s2.w).chain(&mut s2.v) {
            *v *= 2.0;
        }
        s2.x *= 2.0;
        assert_relative_eq!(s2.omega(&g), 4.0 * s.omega(&g), epsilon = 1e-12);
    }

    proptest! {
        // Doubling |pq| doubles the coupling LHS exactly.
        #[test]
        fn coupling_lhs_linear_in_pq(pv in 0.05f64..2.0, qv in 0.05f64..2.0) {
            let mut p = test_params();
            p.p = pv;
            p.q = qv;
            let base = p.coupling_bound_lhs();
            p.p = 2.0 * pv;
            let doubled = p.coupling_bound_lhs();
            prop_assert!((doubled - 2.0 * base).abs() <= 1e-12 * base.max(1.0));
        }
    }
}
