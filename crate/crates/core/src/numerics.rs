//! Dense complex linear algebra shared by the physics and optimizer modules.
//!
//! Matrices are `nalgebra` dense matrices of `Complex64`; indexing follows
//! `[X]_{n,m}` = row `n`, column `m`. Eigen and Cholesky factorizations are
//! delegated to `nalgebra`, with the input validation and post-conditions
//! (ordering, clamping, residual checks) enforced here.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Tolerance on relative Hermitian asymmetry accepted by [`eigh`].
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues between this threshold and zero are treated as roundoff.
pub const PSD_CLAMP: f64 = -1e-10;

/// Spectral decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: CMatrix,
}

impl HermitianEigen {
    /// `V diag(λ) V^H`.
    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(lam);
        }
        &scaled * self.eigenvectors.adjoint()
    }
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖a − b‖_F / ‖b‖_F`, or the absolute error when `b` is zero.
pub fn rel_frobenius_error(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = frobenius(&(a - b));
    let scale = frobenius(b);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Relative Frobenius asymmetry `‖A − A^H‖ / ‖A‖`.
pub fn hermitian_asymmetry(a: &CMatrix) -> f64 {
    let scale = frobenius(a);
    if scale == 0.0 {
        return 0.0;
    }
    frobenius(&(a - a.adjoint())) / scale
}

pub fn matmul(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.ncols() != b.nrows() {
        return Err(Error::Dimension(format!(
            "cannot multiply {}x{} by {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(a * b)
}

/// Diagonal matrix from complex entries.
pub fn diag(entries: &[Complex64]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(entries))
}

fn check_square(a: &CMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

pub fn eigh(a: &CMatrix) -> Result<HermitianEigen> {
    check_square(a)?;
    if !is_finite(a) {
        return Err(Error::InvalidArgument("non-finite matrix entry".into()));
    }
    let asym = hermitian_asymmetry(a);
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian(asym));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(HermitianEigen {
            eigenvalues: Vec::new(),
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }
    // Symmetrize exactly so the solver sees a Hermitian input.
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000).ok_or(Error::NoConvergence)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    if !is_finite(&eigenvectors) || eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence);
    }
    Ok(HermitianEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Principal square root of a Hermitian PSD matrix.
///
/// Eigenvalues in `[PSD_CLAMP, 0)` are clamped to zero; anything more
/// negative means the input is not a valid covariance. The clamp is
/// relative to the largest eigenvalue magnitude.
pub fn psd_sqrt(r: &CMatrix) -> Result<CMatrix> {
    let eig = eigh(r)?;
    let scale = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    let mut roots = Vec::with_capacity(eig.eigenvalues.len());
    for &lam in &eig.eigenvalues {
        if lam < PSD_CLAMP * scale {
            return Err(Error::NegativeEigenvalue(lam));
        }
        roots.push(lam.max(0.0).sqrt());
    }
    let root = HermitianEigen {
        eigenvalues: roots,
        eigenvectors: eig.eigenvectors,
    }
    .reconstruct();
    // Remove the O(eps) anti-Hermitian part left by the reconstruction.
    Ok((&root + root.adjoint()).scale(0.5))
}

/// Solves `a X = b` for Hermitian positive definite `a` via Cholesky.
pub fn solve_hermitian(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_square(a)?;
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "system is {}x{} but right-hand side has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let asym = hermitian_asymmetry(a);
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian(asym));
    }
    let sym = (a + a.adjoint()).scale(0.5);
    let chol = Cholesky::new(sym).ok_or(Error::NotPositiveDefinite)?;
    // Reject numerically singular factors: pivot ratio below ~eps.
    let l = chol.l_dirty();
    let diag: Vec<f64> = (0..a.nrows()).map(|i| l[(i, i)].re).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || (min / max).powi(2) < 1e-15 {
        return Err(Error::NotPositiveDefinite);
    }
    let x = chol.solve(b);
    if !is_finite(&x) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(x)
}
