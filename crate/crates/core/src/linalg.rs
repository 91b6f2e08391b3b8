//! Thin helpers over `faer` for the dense complex kernels used throughout.

use faer::linalg::matmul::matmul;
use faer::{c64, get_global_parallelism, Accum, Mat, MatRef, Side};

use crate::error::{Error, Result};

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

pub fn identity(n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

/// Largest absolute matrix element.
pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

/// `max |M - M^dagger|` over all elements.
pub fn hermiticity_deviation(m: MatRef<'_, c64>) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn is_real(m: MatRef<'_, c64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].im == 0.0))
}

pub fn mul(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    let mut out = Mat::zeros(a.nrows(), b.ncols());
    matmul(&mut out, Accum::Replace, a, b, ONE, get_global_parallelism());
    out
}

pub fn mat_vec(a: MatRef<'_, c64>, v: &[c64]) -> Vec<c64> {
    debug_assert_eq!(a.ncols(), v.len());
    let mut out = vec![ZERO; a.nrows()];
    for (j, &x) in v.iter().enumerate() {
        if x == ZERO {
            continue;
        }
        let col = a.col(j);
        for (o, &aij) in out.iter_mut().zip(col.iter()) {
            *o += aij * x;
        }
    }
    out
}

/// `<a|b>`, antilinear in `a`.
pub fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

pub fn norm(v: &[c64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn col_to_vec(m: MatRef<'_, c64>, j: usize) -> Vec<c64> {
    m.col(j).iter().copied().collect()
}

pub fn from_columns(rows: usize, cols: &[Vec<c64>]) -> Mat<c64> {
    Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// Dense Hermitian eigendecomposition, eigenvalues ascending.
///
/// Real symmetric input takes the real solver, which is several times faster.
pub fn hermitian_eigen(m: MatRef<'_, c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let n = m.nrows();
    let fail = || Error::Convergence { dimension: n, max_element: max_abs(m) };
    if is_real(m) {
        let re = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        let evd = re.self_adjoint_eigen(Side::Lower).map_err(|_| fail())?;
        let values: Vec<f64> = (0..n).map(|k| evd.S()[k]).collect();
        let u = evd.U();
        let vectors = Mat::from_fn(n, n, |i, j| c64::new(u[(i, j)], 0.0));
        Ok((values, vectors))
    } else {
        let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| fail())?;
        let values: Vec<f64> = (0..n).map(|k| evd.S()[k].re).collect();
        Ok((values, evd.U().to_owned()))
    }
}

pub fn hermitian_eigenvalues(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    let fail = || Error::Convergence { dimension: n, max_element: max_abs(m) };
    if is_real(m) {
        let re = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        re.self_adjoint_eigenvalues(Side::Lower).map_err(|_| fail())
    } else {
        m.self_adjoint_eigenvalues(Side::Lower).map_err(|_| fail())
    }
}

/// Hermitian part `(M + M^dagger) / 2`.
pub fn hermitize(m: MatRef<'_, c64>) -> Mat<c64> {
    let n = m.nrows();
    Mat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}
