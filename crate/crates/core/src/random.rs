//! Seeded generators for random test problems.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, cr, CMat, CVec, C64};

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Complex Gaussian matrix with entries of variance 1/n.
pub fn general<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let s = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |_, _| complex_gaussian(rng) * s)
}

pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    linalg::hermitian_part(&general(rng, n))
}

pub fn real_symmetric<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let g = general(rng, n).map(|z| cr(z.re));
    linalg::hermitian_part(&g)
}

pub fn unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| complex_gaussian(rng));
    g.qr().q()
}

/// Hermitian matrix with the given eigenvalues in a random eigenbasis.
pub fn hermitian_with_spectrum<R: Rng + ?Sized>(rng: &mut R, eigenvalues: &[f64]) -> CMat {
    let n = eigenvalues.len();
    let u = unitary(rng, n);
    let d = CMat::from_diagonal(&CVec::from_iterator(n, eigenvalues.iter().map(|&v| cr(v))));
    let m = &u * d * u.adjoint();
    linalg::hermitian_part(&m)
}

/// Hermitian positive definite matrix with eigenvalues uniform in `[lo, hi]`.
pub fn pd_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> CMat {
    let eig: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    hermitian_with_spectrum(rng, &eig)
}

/// A matrix whose Hermitian part has λ_min ≥ `margin`, plus a random
/// anti-Hermitian part.
pub fn with_pd_hermitian_part<R: Rng + ?Sized>(rng: &mut R, n: usize, margin: f64) -> CMat {
    let h = pd_hermitian(rng, n, margin, margin + 2.0);
    let k = hermitian(rng, n) * C64::new(0.0, 1.0);
    h + k
}

/// Orthogonal projector of the given rank onto a random subspace.
pub fn projector<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> CMat {
    let u = unitary(rng, n);
    let q = u.columns(0, rank).into_owned();
    linalg::hermitian_part(&(&q * q.adjoint()))
}

/// 0/1 raster with each point in phase 1 with probability `fraction`.
pub fn indicator<R: Rng + ?Sized>(rng: &mut R, points: usize, fraction: f64) -> Vec<u8> {
    (0..points).map(|_| u8::from(rng.random_bool(fraction))).collect()
}

pub fn complex_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n).map(|_| complex_gaussian(rng)).collect()
}
