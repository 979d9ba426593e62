//! Dense complex linear algebra shared across the crate.
//!
//! Everything here works on `DMatrix<Complex64>`. Hermitian matrices are
//! exponentiated through their spectral decomposition — exact up to the
//! eigensolver for the self-adjoint inputs this crate produces.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub fn identity(nu: usize) -> CMatrix {
    CMatrix::identity(nu, nu)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise deviation from the conjugate transpose.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Largest entrywise deviation of `m* m` from the identity.
pub fn unitary_defect(m: &CMatrix) -> f64 {
    let dim = m.ncols();
    max_abs(&(m.adjoint() * m - identity(dim)))
}

pub fn require_hermitian(m: &CMatrix, tol: f64, context: &str) -> Result<()> {
    let defect = hermitian_defect(m);
    if defect > tol {
        return Err(Error::NotHermitian {
            context: context.to_string(),
            defect,
        });
    }
    Ok(())
}

pub fn require_unitary(m: &CMatrix, tol: f64, context: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument(format!(
            "{context}: matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    let defect = unitary_defect(m);
    if defect > tol {
        return Err(Error::NotUnitary {
            context: context.to_string(),
            defect,
        });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues ascending,
/// matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(m: &CMatrix) -> Result<HermitianEigen> {
    let dim = m.nrows();
    if dim == 1 {
        return Ok(HermitianEigen {
            values: vec![m[(0, 0)].re],
            vectors: identity(1),
        });
    }
    let eig = m
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("Hermitian eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).clone_owned())
            .collect::<Vec<_>>(),
    );
    Ok(HermitianEigen { values, vectors })
}

/// `exp(scale · m)` for Hermitian `m`, via spectral decomposition.
pub fn exp_hermitian(m: &CMatrix, scale: f64) -> Result<CMatrix> {
    if m.nrows() == 1 {
        return Ok(CMatrix::from_element(
            1,
            1,
            Complex64::new((scale * m[(0, 0)].re).exp(), 0.0),
        ));
    }
    let eig = hermitian_eigen(m)?;
    let mut scaled = eig.vectors.clone();
    for (j, &lambda) in eig.values.iter().enumerate() {
        let factor = Complex64::new((scale * lambda).exp(), 0.0);
        for z in scaled.column_mut(j).iter_mut() {
            *z *= factor;
        }
    }
    Ok(scaled * eig.vectors.adjoint())
}

/// Operator (spectral) norm, computed as `sqrt(λ_max(m* m))`.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    let gram = m.adjoint() * m;
    match hermitian_eigen(&gram) {
        Ok(eig) => eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt(),
        Err(_) => max_abs(m) * (m.nrows() as f64).sqrt(), // crude upper bound fallback
    }
}
