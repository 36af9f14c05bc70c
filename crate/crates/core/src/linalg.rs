//! Small dense linear-algebra helpers for the ODE block.

use crate::error::Error;
use crate::Result;
use nalgebra::{DMatrix, DVector};

/// Largest real part among the eigenvalues of `a`.
pub fn max_re_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .complex_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |m, l| m.max(l.re))
}

/// Rank of the controllability matrix `[B, AB, ..., A^(m-1) B]`, by SVD
/// with a relative singular-value cutoff.
pub fn controllability_rank(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> usize {
    let m = a.nrows();
    let mut ctrb = DMatrix::<f64>::zeros(m, m);
    let mut col = b.clone();
    for j in 0..m {
        ctrb.set_column(j, &col);
        col = a * &col;
    }
    let svals = ctrb.svd(false, false).singular_values;
    let smax = svals.iter().fold(0.0_f64, |m, s| m.max(*s));
    if smax == 0.0 {
        return 0;
    }
    svals.iter().filter(|s| **s > rel_tol * smax).count()
}

/// Solve the Lyapunov equation `A^T P + P A = -Q` by Kronecker
/// vectorization. `Q` must be symmetric; the result is symmetrized.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = a.nrows();
    if q.nrows() != m || q.ncols() != m || a.ncols() != m {
        return Err(Error::Dimension(format!(
            "Lyapunov solve needs square matrices of equal size, got A {}x{}, Q {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    // vec(A^T P) = (I (x) A^T) vec(P); vec(P A) = (A^T (x) I) vec(P).
    let at = a.transpose();
    let mut big = DMatrix::<f64>::zeros(m * m, m * m);
    for r in 0..m {
        for c in 0..m {
            // Column index of vec(P): c*m + r addresses P[r, c] (column-major).
            for k in 0..m {
                // (I (x) A^T): block diag of A^T.
                big[(c * m + r, c * m + k)] += at[(r, k)];
                // (A^T (x) I): scalar at[(c,k)] times identity block.
                big[(c * m + r, k * m + r)] += at[(c, k)];
            }
        }
    }
    let mut rhs = DVector::<f64>::zeros(m * m);
    for c in 0..m {
        for r in 0..m {
            rhs[c * m + r] = -q[(r, c)];
        }
    }
    let sol = big
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularMatrix("Lyapunov operator is singular".into()))?;
    let mut p = DMatrix::<f64>::zeros(m, m);
    for c in 0..m {
        for r in 0..m {
            p[(r, c)] = sol[c * m + r];
        }
    }
    // Symmetrize against roundoff.
    let p = (&p + p.transpose()) * 0.5;
    Ok(p)
}

/// Extreme eigenvalues of a symmetric matrix.
pub fn symmetric_eig_bounds(p: &DMatrix<f64>) -> (f64, f64) {
    let eig = p.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for l in eig.eigenvalues.iter() {
        lo = lo.min(*l);
        hi = hi.max(*l);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lyapunov_scalar() {
        // 2 a p = -q  =>  p = -q / (2a)
        let a = DMatrix::from_element(1, 1, -0.1351);
        let q = DMatrix::identity(1, 1);
        let p = solve_lyapunov(&a, &q).unwrap();
        assert_relative_eq!(p[(0, 0)], 1.0 / (2.0 * 0.1351), epsilon = 1e-12);
    }

    #[test]
    fn lyapunov_2x2_residual() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.2, -2.0]);
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let p = solve_lyapunov(&a, &q).unwrap();
        let res = a.transpose() * &p + &p * &a + &q;
        assert!(res.amax() < 1e-12);
        let (lo, _) = symmetric_eig_bounds(&p);
        assert!(lo > 0.0);
    }

    #[test]
    fn controllability_detects_rank_deficiency() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let b_good = DVector::from_column_slice(&[1.0, 1.0]);
        let b_bad = DVector::from_column_slice(&[1.0, 0.0]);
        assert_eq!(controllability_rank(&a, &b_good, 1e-10), 2);
        assert_eq!(controllability_rank(&a, &b_bad, 1e-10), 1);
    }

    #[test]
    fn max_re_eigenvalue_of_rotation_plus_decay() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.5, 1.0, -1.0, -0.5]);
        assert_relative_eq!(max_re_eigenvalue(&a), -0.5, epsilon = 1e-10);
    }
}
