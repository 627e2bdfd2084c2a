//! Dense Laplacian eigendecomposition and the graph Fourier transform.
//!
//! Everything here is `O(N³)` and exists for small graphs: theory checks,
//! exact bandlimited recovery and inspection. The production solver never
//! needs eigenvectors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::Laplacian;

/// Largest graph handed to the dense eigensolver by default.
pub const DEFAULT_DENSE_LIMIT: usize = 5000;

/// Eigenpairs of a Laplacian, eigenvalues nondecreasing, eigenvectors as
/// orthonormal columns with their first nonzero entry positive.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralBasis {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// The first `rho` eigenvectors, `U_ρ`.
    pub fn leading(&self, rho: usize) -> DMatrix<f64> {
        self.eigenvectors.columns(0, rho).into_owned()
    }

    /// Bandwidth descriptor for the first `rho` eigenvectors.
    pub fn band(&self, rho: usize) -> Result<BandlimitedSpec> {
        check_rho(rho, self.n())?;
        Ok(BandlimitedSpec { rho, omega: self.eigenvalues[rho - 1] })
    }
}

/// Paley–Wiener space spanned by the first `rho` eigenvectors;
/// `omega` is the `rho`-th eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandlimitedSpec {
    pub rho: usize,
    pub omega: f64,
}

/// Dense symmetric eigendecomposition with the default size limit.
pub fn eigendecompose(l: &Laplacian) -> Result<SpectralBasis> {
    eigendecompose_with_limit(l, DEFAULT_DENSE_LIMIT)
}

pub fn eigendecompose_with_limit(l: &Laplacian, limit: usize) -> Result<SpectralBasis> {
    if l.n() > limit {
        return Err(Error::Capability(format!(
            "graph has {} nodes, above the dense eigensolver limit of {limit}; \
             use the eigendecomposition-free solver paths",
            l.n()
        )));
    }
    Ok(symmetric_basis(l.to_dense()))
}

/// Sorted, sign-normalized eigenpairs of a symmetric matrix.
pub(crate) fn symmetric_basis(m: DMatrix<f64>) -> SpectralBasis {
    let n = m.nrows();
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let scale = col.amax();
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-12 * scale) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
        eigenvectors.set_column(dst, &col);
    }
    SpectralBasis { eigenvalues, eigenvectors }
}

/// Sorted eigenvalues of a symmetric matrix.
pub(crate) fn symmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn check_len(len: usize, n: usize) -> Result<()> {
    if len != n {
        return Err(Error::Structural(format!("signal of length {len} on a graph with {n} nodes")));
    }
    Ok(())
}

fn check_rho(rho: usize, n: usize) -> Result<()> {
    if rho == 0 || rho > n {
        return Err(Error::Parameter(format!("bandwidth must satisfy 1 <= rho <= N (rho={rho}, N={n})")));
    }
    Ok(())
}

/// `ŷ = Uᵀ y`.
pub fn gft(basis: &SpectralBasis, y: &[f64]) -> Result<DVector<f64>> {
    check_len(y.len(), basis.n())?;
    Ok(basis.eigenvectors.tr_mul(&DVector::from_column_slice(y)))
}

/// `y = U ŷ`.
pub fn igft(basis: &SpectralBasis, yhat: &[f64]) -> Result<DVector<f64>> {
    check_len(yhat.len(), basis.n())?;
    Ok(&basis.eigenvectors * DVector::from_column_slice(yhat))
}

/// Orthogonal projection onto `span(U_ρ)`.
pub fn project_bandlimited(basis: &SpectralBasis, y: &[f64], rho: usize) -> Result<DVector<f64>> {
    check_len(y.len(), basis.n())?;
    check_rho(rho, basis.n())?;
    let u = basis.eigenvectors.columns(0, rho);
    let coeffs = u.tr_mul(&DVector::from_column_slice(y));
    Ok(u * coeffs)
}

/// True iff every GFT coefficient past `rho` is within `tol` of zero.
pub fn is_bandlimited(basis: &SpectralBasis, y: &[f64], rho: usize, tol: f64) -> Result<bool> {
    if !(tol >= 0.0) {
        return Err(Error::Parameter(format!("tolerance must be nonnegative, got {tol}")));
    }
    check_rho(rho, basis.n())?;
    let yhat = gft(basis, y)?;
    Ok(yhat.iter().skip(rho).all(|c| c.abs() <= tol))
}
