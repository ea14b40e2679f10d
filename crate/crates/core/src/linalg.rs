//! Small dense helpers on top of faer shared by the decomposition modules.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{c64, Mat, Side};

pub(crate) fn to_complex(m: &Mat<f64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0))
}

pub(crate) fn real_part(m: &Mat<c64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re)
}

pub(crate) fn imag_part(m: &Mat<c64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].im)
}

/// `real * complex` without promoting the (usually tall) real factor.
pub(crate) fn real_times_complex(a: &Mat<f64>, b: &Mat<c64>) -> Mat<c64> {
    let re = a * real_part(b);
    let im = a * imag_part(b);
    Mat::from_fn(re.nrows(), re.ncols(), |i, j| c64::new(re[(i, j)], im[(i, j)]))
}

pub(crate) fn frob_sq(m: &Mat<c64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc
}

pub(crate) fn frob_sq_real(m: &Mat<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)] * m[(i, j)];
        }
    }
    acc
}

pub(crate) fn column(v: &[c64]) -> Mat<c64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub(crate) fn col_to_vec(m: &Mat<c64>) -> Vec<c64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

pub(crate) fn all_finite(m: &Mat<c64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()))
}

/// Solves `h x = b` for Hermitian positive semidefinite `h`.
///
/// Returns the solution and whether the minimum-norm pseudo-inverse fallback
/// was used (matrix numerically singular or Cholesky failure).
pub(crate) fn solve_hermitian_psd(h: &Mat<c64>, b: &[c64]) -> (Vec<c64>, bool) {
    let n = h.nrows();
    let rhs = column(b);
    let cutoff = spectral_cutoff(h);
    if let Some(cutoff) = cutoff {
        if let Ok(llt) = h.llt(Side::Lower) {
            let x = llt.solve(&rhs);
            if all_finite(&x) {
                return (col_to_vec(&x), false);
            }
        }
        return (pinv_solve(h, &rhs, cutoff), true);
    }
    let lambda_max = max_eigenvalue(h).unwrap_or(0.0);
    let cut = lambda_max * n as f64 * f64::EPSILON;
    (pinv_solve(h, &rhs, cut), true)
}

/// `Some(cutoff)` when the Hermitian matrix is numerically nonsingular.
fn spectral_cutoff(h: &Mat<c64>) -> Option<f64> {
    let n = h.nrows();
    let eig = h.self_adjoint_eigenvalues(Side::Lower).ok()?;
    let lmin = eig.first().copied()?;
    let lmax = eig.last().copied()?;
    let cut = lmax * n as f64 * f64::EPSILON;
    (lmax > 0.0 && lmin > cut).then_some(cut)
}

fn max_eigenvalue(h: &Mat<c64>) -> Option<f64> {
    h.self_adjoint_eigenvalues(Side::Lower)
        .ok()
        .and_then(|e| e.last().copied())
}

fn pinv_solve(h: &Mat<c64>, rhs: &Mat<c64>, cutoff: f64) -> Vec<c64> {
    let n = h.nrows();
    let Ok(eig) = h.self_adjoint_eigen(Side::Lower) else {
        return vec![c64::new(0.0, 0.0); n];
    };
    let u = eig.U();
    let s = eig.S().column_vector();
    let proj = u.adjoint() * rhs;
    let scaled = Mat::from_fn(n, 1, |i, _| {
        let l = s[i].re;
        if l > cutoff {
            proj[(i, 0)] / l
        } else {
            c64::new(0.0, 0.0)
        }
    });
    col_to_vec(&(u * scaled))
}

/// General square solve through partial-pivot LU. `None` if the result is
/// not finite or its residual is not small relative to the right-hand side.
pub(crate) fn solve_general(a: &Mat<c64>, b: &[c64], rel_tol: f64) -> Option<Vec<c64>> {
    let rhs = column(b);
    let x = a.partial_piv_lu().solve(&rhs);
    if !all_finite(&x) {
        return None;
    }
    let r = a * &x - &rhs;
    let scale = frob_sq(&rhs).sqrt().max(frob_sq(a).sqrt() * frob_sq(&x).sqrt());
    (frob_sq(&r).sqrt() <= rel_tol * scale.max(f64::MIN_POSITIVE)).then(|| col_to_vec(&x))
}

pub(crate) fn inverse(a: &Mat<c64>) -> Option<Mat<c64>> {
    let inv = a.partial_piv_lu().inverse();
    all_finite(&inv).then_some(inv)
}
