//! Dense complex linear algebra on top of `nalgebra`.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>` (column-major). Hermitian
//! functions go through an eigendecomposition; the general exponential
//! uses scaling and squaring of a Taylor series and is only meant for the
//! small vectorized generators used in verification.

use alloc::vec::Vec;
#[allow(unused_imports)] // std, when linked, shadows these methods
use num_traits::Float;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Eigenvalues and eigenvectors (columns) of a Hermitian matrix.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = m.clone().symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// `V f(Λ) V†` for a Hermitian matrix with eigendecomposition `(Λ, V)`.
pub fn spectral_map(values: &[f64], vectors: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let mut scaled = vectors.clone();
    for (k, &lambda) in values.iter().enumerate() {
        let w = f(lambda);
        scaled.column_mut(k).iter_mut().for_each(|z| *z *= w);
    }
    scaled * vectors.adjoint()
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn hermitian_exp(h: &CMat, t: f64) -> CMat {
    let (values, vectors) = eigh(h);
    spectral_map(&values, &vectors, |l| C64::from_polar(1.0, -t * l))
}

/// Principal square root of a positive semidefinite matrix.
///
/// Eigenvalues down to `-clip` are treated as zero; anything more negative
/// is reported as a positivity violation.
pub fn psd_sqrt(m: &CMat, clip: f64) -> Result<CMat> {
    let (values, vectors) = eigh(m);
    check_nonnegative(&values, clip)?;
    Ok(spectral_map(&values, &vectors, |l| {
        C64::new(l.max(0.0).sqrt(), 0.0)
    }))
}

/// Factor `A = V_r √Λ_r` with `A A† ≈ m`, keeping eigenvalues above
/// `rel_tol · λ_max`.
pub fn psd_factor(m: &CMat, clip: f64, rel_tol: f64) -> Result<CMat> {
    let (values, vectors) = eigh(m);
    check_nonnegative(&values, clip)?;
    let top = values.iter().copied().fold(0.0f64, f64::max);
    let kept: Vec<usize> = (0..values.len())
        .filter(|&k| values[k] > rel_tol * top)
        .collect();
    Ok(CMat::from_fn(m.nrows(), kept.len(), |i, c| {
        let k = kept[c];
        vectors[(i, k)] * values[k].sqrt()
    }))
}

/// Sum of singular values.
pub fn nuclear_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().sum()
}

pub(crate) fn check_nonnegative(values: &[f64], clip: f64) -> Result<()> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -clip {
        return Err(Error::NotPositive(min));
    }
    Ok(())
}

/// General matrix exponential by scaling and squaring.
pub fn expm(m: &CMat) -> CMat {
    let n = m.nrows();
    let norm = one_norm(m);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = m * C64::new(scale, 0.0);
    let mut sum = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..=40 {
        term = &term * &a * C64::new(1.0 / k as f64, 0.0);
        sum += &term;
        if one_norm(&term) <= 1e-18 * one_norm(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn hermiticity_defect(m: &CMat) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// `max |U†U - I|`.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let n = u.ncols();
    max_abs_diff(&(u.adjoint() * u), &CMat::identity(n, n))
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// `|ψ⟩⟨φ|`.
pub fn outer(psi: &[C64], phi: &[C64]) -> CMat {
    CMat::from_fn(psi.len(), phi.len(), |i, j| psi[i] * phi[j].conj())
}

/// Applies a slice-level linear map to every column of `m`.
pub(crate) fn map_columns(m: &mut CMat, f: impl Fn(&mut [C64])) {
    let n = m.nrows();
    for col in m.as_mut_slice().chunks_mut(n) {
        f(col);
    }
}

/// `U ρ U†` where `U` is given as an in-place action on vectors.
pub(crate) fn conjugate_with(rho: &CMat, apply: impl Fn(&mut [C64])) -> CMat {
    let mut x = rho.clone();
    map_columns(&mut x, &apply);
    let mut y = x.adjoint();
    map_columns(&mut y, &apply);
    y.adjoint()
}

pub fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}
