use nalgebra::{DMatrix, DVector};

use super::basis::symmetrize;

/// Solve `A x = b` for symmetric `A` that should be positive definite. When the
/// Cholesky factorization fails, eigenvalues are floored at `floor_rel * max|λ|`
/// before solving. Returns the solution and whether repair was needed.
pub fn solve_repaired(a: &DMatrix<f64>, b: &DVector<f64>, floor_rel: f64) -> (DVector<f64>, bool) {
    let a = symmetrize(a);
    if let Some(ch) = a.clone().cholesky() {
        return (ch.solve(b), false);
    }
    let eig = a.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let floor = floor_rel * scale;
    let q = &eig.eigenvectors;
    let mut y = q.transpose() * b;
    for (yi, &l) in y.iter_mut().zip(eig.eigenvalues.iter()) {
        *yi /= l.max(floor);
    }
    (q * y, true)
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix, dropping eigenvalues
/// below `rel_tol` of the largest.
pub fn pinv_symmetric(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let eig = symmetrize(a).symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > rel_tol * max {
            let v = eig.eigenvectors.column(i);
            out += (v * v.transpose()) / l;
        }
    }
    out
}

/// Ratio of extreme absolute eigenvalues of a symmetric matrix.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let eig = symmetrize(a).symmetric_eigen();
    let abs: Vec<f64> = eig.eigenvalues.iter().map(|v| v.abs()).collect();
    let max = abs.iter().cloned().fold(0.0, f64::max);
    let min = abs.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.transpose().iter()).map(|(x, y)| x * y).sum()
}
