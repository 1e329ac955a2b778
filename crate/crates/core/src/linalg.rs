//! Small dense real/complex helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num::complex::Complex64;

/// Orthonormal basis (as columns) of the orthogonal complement of `w`.
///
/// Uses the Householder reflection `Q = I - 2 v v^T / |v|^2` that sends
/// `w / |w|` to `e_1`; columns `2..n` of `Q` span `w^perp`. Returns `None`
/// for the zero vector.
pub fn orthocomplement(w: &[f64]) -> Option<DMatrix<f64>> {
    let n = w.len();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    let u = DVector::from_iterator(n, w.iter().map(|x| x / norm));
    // v = u - s e_1 with s = -sign(u_1) avoids cancellation; Q u = s e_1
    let s = if u[0] >= 0.0 { -1.0 } else { 1.0 };
    let mut v = u.clone();
    v[0] -= s;
    let vv = v.dot(&v);
    let q = if vv == 0.0 {
        DMatrix::identity(n, n)
    } else {
        DMatrix::identity(n, n) - (&v * v.transpose()) * (2.0 / vv)
    };
    Some(q.columns(1, n - 1).into_owned())
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues ascending and
/// eigenvectors as the matching columns.
pub fn hermitian_eigen(a: DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), a);
    }
    let eig = nalgebra::SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vecs)
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}
