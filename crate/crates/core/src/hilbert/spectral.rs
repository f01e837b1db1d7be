//! Hermitian eigendecomposition and the propagators built from it.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::matrix::{matmul, ComplexMatrix};
use crate::error::{Error, Result};
use crate::tol;

/// Eigenpairs of a hermitian matrix, eigenvalues ascending, eigenvectors as
/// orthonormal columns in matching order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        let n = self.vectors.rows();
        (0..n).map(|i| self.vectors[(i, k)]).collect()
    }

    /// `Σ f(λ_k) v_k v_k†`
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let n = self.values.len();
        let weights: Vec<Complex64> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        let mut scaled = v.clone();
        for i in 0..n {
            for (k, w) in weights.iter().enumerate() {
                scaled[(i, k)] *= w;
            }
        }
        matmul(&scaled, &v.dagger()).expect("square factors")
    }
}

pub fn eig_hermitian(a: &ComplexMatrix) -> Result<HermitianEigen> {
    if !a.is_square() {
        return Err(Error::Shape(format!("eigendecomposition of non-square {}x{}", a.rows(), a.cols())));
    }
    let defect = a.hermiticity_defect();
    if defect > tol::HERMITIAN {
        return Err(Error::Domain(format!("matrix is not hermitian (defect {defect:.3e})")));
    }
    let n = a.rows();
    if a.is_diagonal() {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
        let values = order.iter().map(|&i| a[(i, i)].re).collect();
        let mut vectors = ComplexMatrix::zeros(n, n);
        for (col, &i) in order.iter().enumerate() {
            vectors[(i, col)] = Complex64::new(1.0, 0.0);
        }
        return Ok(HermitianEigen { values, vectors });
    }

    let m = DMatrix::from_row_slice(n, n, a.hermitian_part().data());
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, col)] = eig.eigenvectors[(i, k)];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// `e^{-i h_kk t}` for a diagonal `h`, whose entries must be real.
fn diagonal_phases(h: &ComplexMatrix, t: f64) -> Result<Vec<Complex64>> {
    let diag = h.diagonal();
    if diag.iter().any(|e| 2.0 * e.im.abs() > tol::HERMITIAN) {
        return Err(Error::Domain("diagonal Hamiltonian has complex entries".into()));
    }
    Ok(diag.iter().map(|e| Complex64::from_polar(1.0, -e.re * t)).collect())
}

/// `exp(-i h t)` for hermitian `h` (ħ = 1).
pub fn expm_hermitian_prop(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    if h.is_diagonal() {
        return Ok(ComplexMatrix::from_diagonal(&diagonal_phases(h, t)?));
    }
    let eig = eig_hermitian(h)?;
    Ok(eig.reconstruct_with(|l| Complex64::from_polar(1.0, -l * t)))
}

/// `U ρ U†` with `U = exp(-i h t)`. Diagonal `h` is applied as an entrywise
/// phase, which keeps large pure-dephasing models cheap.
pub fn propagate_density(rho: &ComplexMatrix, h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    if !h.is_square() || rho.rows() != h.rows() || !rho.is_square() {
        return Err(Error::Shape(format!(
            "state {}x{} vs Hamiltonian {}x{}",
            rho.rows(),
            rho.cols(),
            h.rows(),
            h.cols()
        )));
    }
    if h.is_diagonal() {
        let phases = diagonal_phases(h, t)?;
        let conj: Vec<Complex64> = phases.iter().map(|p| p.conj()).collect();
        let n = rho.rows();
        let mut data = rho.data().to_vec();
        for (row, &pi) in data.chunks_exact_mut(n).zip(&phases) {
            for (z, &pj) in row.iter_mut().zip(&conj) {
                if *z != Complex64::new(0.0, 0.0) {
                    *z *= pi * pj;
                }
            }
        }
        return ComplexMatrix::new(n, n, data);
    }
    let u = expm_hermitian_prop(h, t)?;
    conjugate(&u, rho)
}

/// `U ρ U†`
pub fn conjugate(u: &ComplexMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    matmul(&matmul(u, rho)?, &u.dagger())
}
