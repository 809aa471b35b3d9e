//! Dense complex linear algebra used by the oracle paths.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 10_000;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// (M + M†)/2
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * cr(0.5)
}

/// (M − M†)/2
pub fn antihermitian_part(m: &CMat) -> CMat {
    (m - m.adjoint()) * cr(0.5)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Max-abs distance from Hermitian symmetry.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// Eigen-decomposition of a Hermitian matrix. Only the Hermitian part of
/// `m` is used. Eigenvalues are returned ascending with matching columns.
pub fn hermitian_eigen(m: &CMat) -> Option<(Vec<f64>, CMat)> {
    let n = m.nrows();
    if n == 0 {
        return Some((Vec::new(), CMat::zeros(0, 0)));
    }
    let h = hermitian_part(m);
    let eig = SymmetricEigen::try_new(h, EIG_EPS, EIG_MAX_ITER)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    Some((values, vectors))
}

/// Ascending eigenvalues of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &CMat) -> Option<Vec<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Some(Vec::new());
    }
    let eig = SymmetricEigen::try_new(hermitian_part(m), EIG_EPS, EIG_MAX_ITER)?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Some(v)
}

pub fn lambda_min(m: &CMat) -> Option<f64> {
    hermitian_eigenvalues(m).map(|v| v.first().copied().unwrap_or(f64::INFINITY))
}

pub fn lambda_max(m: &CMat) -> Option<f64> {
    hermitian_eigenvalues(m).map(|v| v.last().copied().unwrap_or(f64::NEG_INFINITY))
}

/// Eigenvalues of a general complex matrix via the complex Schur form,
/// sorted by real part then imaginary part.
pub fn general_eigenvalues(m: &CMat) -> Option<Vec<C64>> {
    if m.nrows() == 0 {
        return Some(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), EIG_EPS, EIG_MAX_ITER)?;
    let (_, t) = schur.unpack();
    let mut v: Vec<C64> = t.diagonal().iter().copied().collect();
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Some(v)
}

pub fn singular_values(m: &CMat) -> Option<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Some(Vec::new());
    }
    let svd = SVD::try_new(m.clone(), false, false, EIG_EPS, EIG_MAX_ITER)?;
    let mut v: Vec<f64> = svd.singular_values.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    Some(v)
}

/// 2-norm condition number; infinite when singular or when the SVD fails.
pub fn condition_number(m: &CMat) -> f64 {
    match singular_values(m) {
        Some(s) if !s.is_empty() => {
            let smin = *s.last().unwrap();
            if smin == 0.0 {
                f64::INFINITY
            } else {
                s[0] / smin
            }
        }
        Some(_) => 1.0,
        None => f64::INFINITY,
    }
}

/// Spectral norm.
pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).and_then(|s| s.first().copied()).unwrap_or(0.0)
}

/// Numerical rank: singular values above `rel_tol · σ_max`.
pub fn numerical_rank(m: &CMat, rel_tol: f64) -> usize {
    match singular_values(m) {
        Some(s) if !s.is_empty() && s[0] > 0.0 => s.iter().filter(|&&x| x > rel_tol * s[0]).count(),
        _ => 0,
    }
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    if m.nrows() == 0 {
        return Some(CMat::zeros(0, 0));
    }
    m.clone().lu().try_inverse()
}

pub fn solve(m: &CMat, rhs: &CMat) -> Option<CMat> {
    m.clone().lu().solve(rhs)
}

/// Orthonormal basis (as columns) of the range of a Hermitian projector.
/// Eigenvectors with eigenvalue above one half span the range.
pub fn projector_range_basis(p: &CMat) -> Option<CMat> {
    let (vals, vecs) = hermitian_eigen(p)?;
    let cols: Vec<usize> = vals.iter().enumerate().filter(|(_, &v)| v > 0.5).map(|(i, _)| i).collect();
    Some(CMat::from_fn(p.nrows(), cols.len(), |r, col| vecs[(r, cols[col])]))
}

/// Principal square root of a Hermitian positive semidefinite matrix.
pub fn psd_sqrt(m: &CMat) -> Option<CMat> {
    let (vals, vecs) = hermitian_eigen(m)?;
    let d = CMat::from_diagonal(&CVec::from_iterator(vals.len(), vals.iter().map(|&v| cr(v.max(0.0).sqrt()))));
    Some(&vecs * d * vecs.adjoint())
}

/// Applies a scalar function to a Hermitian matrix through its eigenbasis.
pub fn hermitian_function(m: &CMat, f: impl Fn(f64) -> C64) -> Option<CMat> {
    let (vals, vecs) = hermitian_eigen(m)?;
    let d = CMat::from_diagonal(&CVec::from_iterator(vals.len(), vals.iter().map(|&v| f(v))));
    Some(&vecs * d * vecs.adjoint())
}

/// Block-diagonal matrix with the given blocks along the diagonal.
pub fn block_diag(blocks: &[&CMat]) -> CMat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let m: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(n, m);
    let (mut r, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r, c0), b.shape()).copy_from(b);
        r += b.nrows();
        c0 += b.ncols();
    }
    out
}

/// Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Real-valued matrix with a complex element type.
pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(rows, cols, data.iter().map(|&x| cr(x)))
}
