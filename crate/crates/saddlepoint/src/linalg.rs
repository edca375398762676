//! Small dense kernels on slices.
//!
//! The solvers run millions of tiny matrix-vector products; these loops
//! avoid the allocation and dispatch overhead of going through `DVector`.

use nalgebra::DMatrix;
use num_traits::Float;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    Float::sqrt(norm_sq(a))
}

/// Euclidean norm of the stacked vector `[a; b]`.
#[inline]
pub fn norm2(a: &[f64], b: &[f64]) -> f64 {
    Float::sqrt(norm_sq(a) + norm_sq(b))
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    Float::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

#[inline]
pub fn negate(x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi = -*xi;
    }
}

/// `out = a * x` for a column-major dense matrix.
#[inline]
pub fn gemv(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    gemv_acc(a, x, out);
}

/// `out += a * x`
#[inline]
pub fn gemv_acc(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let rows = a.nrows();
    debug_assert_eq!(a.ncols(), x.len());
    debug_assert_eq!(rows, out.len());
    for (col, &xj) in a.as_slice().chunks_exact(rows).zip(x) {
        for (o, aij) in out.iter_mut().zip(col) {
            *o += aij * xj;
        }
    }
}

/// `out -= a * x`
#[inline]
pub fn gemv_sub(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let rows = a.nrows();
    debug_assert_eq!(a.ncols(), x.len());
    debug_assert_eq!(rows, out.len());
    for (col, &xj) in a.as_slice().chunks_exact(rows).zip(x) {
        for (o, aij) in out.iter_mut().zip(col) {
            *o -= aij * xj;
        }
    }
}

/// `out = a^T * x`
#[inline]
pub fn gemv_t(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let rows = a.nrows();
    debug_assert_eq!(rows, x.len());
    debug_assert_eq!(a.ncols(), out.len());
    for (col, o) in a.as_slice().chunks_exact(rows).zip(out.iter_mut()) {
        *o = dot(col, x);
    }
}

/// `out += a^T * x`
#[inline]
pub fn gemv_t_acc(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let rows = a.nrows();
    for (col, o) in a.as_slice().chunks_exact(rows).zip(out.iter_mut()) {
        *o += dot(col, x);
    }
}

/// Largest singular value via a dense SVD.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |acc: f64, &s| acc.max(s))
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().fold(0.0, |acc: f64, z| acc.max(Float::hypot(z.re, z.im)))
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn sym_eig_range(a: &DMatrix<f64>) -> (f64, f64) {
    let e = nalgebra::SymmetricEigen::new(a.clone());
    e.eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemv_matches_nalgebra() {
        let a = DMatrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64 + 0.5);
        let x = [1.5, -2.0];
        let mut out = [0.0; 3];
        gemv(&a, &x, &mut out);
        let expect = &a * nalgebra::DVector::from_column_slice(&x);
        for (o, e) in out.iter().zip(expect.iter()) {
            approx::assert_relative_eq!(*o, *e, epsilon = 1e-14);
        }
        let xt = [1.0, 0.25, -3.0];
        let mut out_t = [0.0; 2];
        gemv_t(&a, &xt, &mut out_t);
        let expect_t = a.transpose() * nalgebra::DVector::from_column_slice(&xt);
        for (o, e) in out_t.iter().zip(expect_t.iter()) {
            approx::assert_relative_eq!(*o, *e, epsilon = 1e-14);
        }
    }

    #[test]
    fn norms() {
        assert_eq!(norm(&[3.0, 4.0]), 5.0);
        assert_eq!(norm2(&[3.0], &[4.0]), 5.0);
        assert_eq!(dist(&[1.0, 1.0], &[4.0, 5.0]), 5.0);
    }
}
