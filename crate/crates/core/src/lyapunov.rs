//! Lyapunov feasibility margins, norm-equivalence constants, and the
//! overshoot coefficient used by the event trigger.
//!
//! The closed-loop certificate is a weighted quadratic form
//!
//! ```text
//! V = (rd/2) X'P1X + (ra/2) int e^{delta x} beta^2
//!   + (1/2) int e^{-delta x} alpha^2 + (rc/2) int e^{-x} uhat^2
//! ```
//!
//! whose weights must satisfy a chain of inequalities in the plant
//! coefficients. Feasibility is *data, not failure*: every condition is
//! reported with a signed margin, because published parameter sets sit
//! right on (or slightly past) the boundary and the toolkit must expose
//! that rather than hide it.

use crate::error::Error;
use crate::grid::Grid;
use crate::kernels::{Stage1Kernels, Stage2Kernels, Stage3Kernels};
use crate::linalg;
use crate::plant::PlantParams;
use crate::Result;
use nalgebra::DMatrix;

/// Signed feasibility margins of the weight chain (positive = satisfied).
#[derive(Debug, Clone, Copy)]
pub struct FeasibilityMargins {
    /// `e^{-2 max{2d4/q2, 2d1/q1}} - e^{-2 delta}` (left window bound).
    pub delta_left: f64,
    /// `e^{-2 delta} - 2 p^2 q^2` (right window bound).
    pub delta_right: f64,
    /// `(q1 / (2 q2 q^2)) e^{-2 delta} - ra`.
    pub ra_left: f64,
    /// `ra - p^2 q1 / q2`.
    pub ra_right: f64,
    /// `rc - 2 Dmax q2 ra e^{delta} c0^2`.
    pub rc: f64,
    /// `(lambda_min(Q1) / (2 |P1 B|^2)) (q2 ra - p^2 q1) - rd`.
    pub rd: f64,
}

impl FeasibilityMargins {
    pub fn all_pass(&self) -> bool {
        self.delta_left > 0.0
            && self.delta_right > 0.0
            && self.ra_left >= 0.0
            && self.ra_right > 0.0
            && self.rc >= 0.0
            && self.rd >= 0.0
    }
}

/// Certificate weights plus everything derived from them.
#[derive(Debug, Clone)]
pub struct LyapunovParams {
    pub delta: f64,
    pub ra: f64,
    pub rc: f64,
    pub rd: f64,
    pub q1_mat: DMatrix<f64>,
    pub p1: DMatrix<f64>,
    pub p1_min_eig: f64,
    pub p1_max_eig: f64,
    /// Decay rate `min{lmin(Q1)/(2 lmax(P1)), delta q2 - 2 d4,
    /// delta q1 - 2 d1, 1/Dmax}`; reported signed, may be non-positive on
    /// borderline parameter sets.
    pub lambda1: f64,
    pub margins: FeasibilityMargins,
}

/// Evaluate the weight chain for candidate `(delta, ra, rc, rd)` and a
/// chosen `Q1 > 0`. Infeasibility shows up in the margins; the only hard
/// errors are structural (dimensions, non-Hurwitz leading to a singular
/// or indefinite Lyapunov solve).
pub fn lyapunov_feasibility(
    params: &PlantParams,
    delta: f64,
    ra: f64,
    rc: f64,
    rd: f64,
    q1_mat: DMatrix<f64>,
) -> Result<LyapunovParams> {
    params.check_dims()?;
    let m = params.m();
    if q1_mat.nrows() != m || q1_mat.ncols() != m {
        return Err(Error::Dimension(format!(
            "Q1 must be {m}x{m}, got {}x{}",
            q1_mat.nrows(),
            q1_mat.ncols()
        )));
    }
    let a_m = params.a_m();
    let p1 = linalg::solve_lyapunov(&a_m, &q1_mat)?;
    let (p1_min, p1_max) = linalg::symmetric_eig_bounds(&p1);
    let (q1_min, _) = linalg::symmetric_eig_bounds(&q1_mat);

    let e2d = (-2.0 * delta).exp();
    let maxdq = params.coupling_exponent();
    let p1b = (&p1 * &params.b).norm();

    let margins = FeasibilityMargins {
        delta_left: (-2.0 * maxdq).exp() - e2d,
        delta_right: e2d - 2.0 * params.p.powi(2) * params.q.powi(2),
        ra_left: params.q1 / (2.0 * params.q2 * params.q.powi(2)) * e2d - ra,
        ra_right: ra - params.p.powi(2) * params.q1 / params.q2,
        rc: rc - 2.0 * params.d_max * params.q2 * ra * delta.exp() * params.c0.powi(2),
        rd: q1_min / (2.0 * p1b * p1b) * (params.q2 * ra - params.p.powi(2) * params.q1) - rd,
    };

    // The decay rate uses the worst admissible delay: the true one is
    // unknown to the designer.
    let lambda1 = (q1_min / (2.0 * p1_max))
        .min(delta * params.q2 - 2.0 * params.d4)
        .min(delta * params.q1 - 2.0 * params.d1)
        .min(1.0 / params.d_max);

    Ok(LyapunovParams {
        delta,
        ra,
        rc,
        rd,
        q1_mat,
        p1,
        p1_min_eig: p1_min,
        p1_max_eig: p1_max,
        lambda1,
        margins,
    })
}

/// Midpoint-heuristic weight selection: `delta` at the centre of its
/// log-feasible window, `ra` at the centre of its interval, `rc` at twice
/// its lower bound, `rd` at half its upper bound. When a window is empty
/// (borderline parameter sets) the midpoint of the empty interval is still
/// returned so the margins report the violation honestly.
pub fn auto_select_weights(params: &PlantParams, q1_mat: &DMatrix<f64>) -> Result<(f64, f64, f64, f64)> {
    let maxdq = params.coupling_exponent();
    let lo = 2.0 * params.p.powi(2) * params.q.powi(2); // e^{-2 delta} lower bound
    let hi = (-2.0 * maxdq).exp(); // e^{-2 delta} upper bound
    // Geometric midpoint in e^{-2 delta} is the arithmetic midpoint in delta.
    let e2d = (lo.max(1e-300) * hi).sqrt();
    let delta = -0.5 * e2d.ln();

    let ra_lo = params.p.powi(2) * params.q1 / params.q2;
    let ra_hi = params.q1 / (2.0 * params.q2 * params.q.powi(2)) * e2d;
    let ra = 0.5 * (ra_lo + ra_hi);

    let rc = 2.0 * (2.0 * params.d_max * params.q2 * ra * delta.exp() * params.c0.powi(2));

    let a_m = params.a_m();
    let p1 = linalg::solve_lyapunov(&a_m, q1_mat)?;
    let (q1_min, _) = linalg::symmetric_eig_bounds(q1_mat);
    let p1b = (&p1 * &params.b).norm();
    let rd_hi = q1_min / (2.0 * p1b * p1b) * (params.q2 * ra - params.p.powi(2) * params.q1);
    let rd = 0.5 * rd_hi;

    Ok((delta, ra, rc, rd))
}

/// Transformation norm bounds and the state-equivalence constants.
///
/// `eta1..eta4` bound the stage-1 map and its inverse, `eta5/eta6` the
/// resolvent pair, `xi1/xi2` sandwich the target norm by the plant norm,
/// `xi3/xi4` sandwich the certificate by the target norm, and
/// `upsilon = xi2 xi4 / (xi1 xi3)` is the overshoot coefficient.
#[derive(Debug, Clone, Copy)]
pub struct NormConstants {
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub eta4: f64,
    pub eta5: f64,
    pub eta6: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub xi3: f64,
    pub xi4: f64,
    pub upsilon: f64,
}

/// Quadrature of squared kernels per the printed formulas.
pub fn norm_constants(
    s1: &Stage1Kernels,
    s2: &Stage2Kernels,
    s3: &Stage3Kernels,
    lyap: &LyapunovParams,
    grid: &Grid,
) -> Result<NormConstants> {
    if s1.nx != grid.nx || s2.nx != grid.nx || s3.nx != grid.nx {
        return Err(Error::GridMismatch(
            "norm constants need all kernel stages on the shared grid".into(),
        ));
    }
    let dx = grid.dx;
    let prof_sq = |p: &Vec<nalgebra::RowDVector<f64>>| -> f64 {
        let sq: Vec<f64> = p.iter().map(|r| r.norm_squared()).collect();
        crate::grid::trapz(dx, &sq)
    };

    let eta1 = 4.0
        * (1.0 + s1.alpha_z.l2_sq_lower(dx) + s1.alpha_w.l2_sq_lower(dx) + prof_sq(&s1.alpha_x));
    let eta2 =
        4.0 * (1.0 + s1.beta_z.l2_sq_lower(dx) + s1.beta_w.l2_sq_lower(dx) + prof_sq(&s1.beta_x));
    let eta3 =
        4.0 * (1.0 + s1.z_alpha.l2_sq_lower(dx) + s1.z_beta.l2_sq_lower(dx) + prof_sq(&s1.z_x));
    let eta4 =
        4.0 * (1.0 + s1.w_alpha.l2_sq_lower(dx) + s1.w_beta.l2_sq_lower(dx) + prof_sq(&s1.w_x));
    let eta5 = 2.0 * (1.0 + s3.r.l2_sq_upper(dx));
    let eta6 = 2.0 * (1.0 + s3.p.l2_sq_upper(dx));

    let k1_sq = s2.k1.l2_sq_full(dx);
    let k2_sq = s2.k2.l2_sq_full(dx);
    let eta_sq = prof_sq(&s2.eta);

    let xi1 = 1.0 / (1.0 + eta3 + eta4 + 4.0 * eta5 + 4.0 * k1_sq + 4.0 * k2_sq + 4.0 * eta_sq);
    let xi2 = 1.0
        + eta1
        + eta2
        + 4.0 * eta6 * (eta1 + eta2 + 1.0) * (1.0 + k1_sq + k2_sq + eta_sq);

    let xi3 = 0.5
        * (lyap.rd * lyap.p1_min_eig)
            .min(lyap.ra)
            .min((-lyap.delta).exp())
            .min(lyap.rc * (-1.0_f64).exp());
    let xi4 = 0.5
        * (lyap.rd * lyap.p1_max_eig)
            .max(lyap.ra * lyap.delta.exp())
            .max(1.0)
            .max(lyap.rc);

    if xi1 <= 0.0 {
        return Err(Error::Unphysical(
            "xi1 must be positive by construction; quadrature bug".into(),
        ));
    }

    Ok(NormConstants {
        eta1,
        eta2,
        eta3,
        eta4,
        eta5,
        eta6,
        xi1,
        xi2,
        xi3,
        xi4,
        upsilon: xi2 * xi4 / (xi1 * xi3),
    })
}

/// Certificate value on a transformed state.
pub fn lyapunov_value(
    target: &crate::kernels::TargetState,
    lyap: &LyapunovParams,
    grid: &Grid,
) -> f64 {
    let dx = grid.dx;
    let n = target.alpha.len();
    let mut ia = 0.0;
    let mut ib = 0.0;
    let mut iu = 0.0;
    for i in 0..n {
        let x = i as f64 * dx;
        let wgt = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        ia += wgt * (-lyap.delta * x).exp() * target.alpha[i] * target.alpha[i];
        ib += wgt * (lyap.delta * x).exp() * target.beta[i] * target.beta[i];
        iu += wgt * (-x).exp() * target.uhat[i] * target.uhat[i];
    }
    ia *= dx;
    ib *= dx;
    iu *= dx;
    let xpx = (target.x.transpose() * &lyap.p1 * &target.x)[0];
    0.5 * lyap.rd * xpx + 0.5 * lyap.ra * ib + 0.5 * ia + 0.5 * lyap.rc * iu
}
