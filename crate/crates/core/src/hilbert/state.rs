//! Pure and mixed quantum states.

use std::borrow::Cow;

use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use super::spectral::eig_hermitian;
use crate::error::{Error, Result};
use crate::tol;

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Pure(Vec<Complex64>),
    Mixed(ComplexMatrix),
}

/// A validated state: normalized amplitudes, or a hermitian unit-trace
/// density matrix whose smallest eigenvalue is at least `-1e-8`.
///
/// States that fail validation are rejected, never clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    repr: Repr,
}

impl QuantumState {
    pub fn pure(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidState("empty amplitude vector".into()));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        let norm_sqr = norm_sqr(&amplitudes);
        if (norm_sqr - 1.0).abs() > tol::NORM {
            return Err(Error::InvalidState(format!("amplitudes have squared norm {norm_sqr}")));
        }
        Ok(Self { repr: Repr::Pure(amplitudes) })
    }

    /// Normalizes the given vector first.
    pub fn pure_normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = norm_sqr(&amplitudes).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        amplitudes.iter_mut().for_each(|z| *z /= norm);
        Self::pure(amplitudes)
    }

    pub fn mixed(rho: ComplexMatrix) -> Result<Self> {
        validate_density(&rho, tol::TRACE)?;
        Ok(Self { repr: Repr::Mixed(rho) })
    }

    /// Like [`QuantumState::mixed`] but with a caller-chosen trace tolerance,
    /// for long integrations whose contract is looser than construction.
    pub fn mixed_with_trace_tol(rho: ComplexMatrix, trace_tol: f64) -> Result<Self> {
        validate_density(&rho, trace_tol)?;
        Ok(Self { repr: Repr::Mixed(rho) })
    }

    /// Trusted constructor for matrices produced by trace- and
    /// positivity-preserving maps of validated states. Checks hermiticity and
    /// trace but skips the eigenvalue test.
    pub(crate) fn mixed_unchecked_positivity(rho: ComplexMatrix) -> Result<Self> {
        check_square_hermitian_trace(&rho, tol::TRACE)?;
        Ok(Self { repr: Repr::Mixed(rho) })
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::Shape(format!("basis index {index} out of range for dim {dim}")));
        }
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        v[index] = Complex64::new(1.0, 0.0);
        Self::pure(v)
    }

    /// `I/N`
    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("dimension must be positive".into()));
        }
        Self::mixed(ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64))
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::Pure(v) => v.len(),
            Repr::Mixed(m) => m.rows(),
        }
    }

    pub fn is_pure_repr(&self) -> bool {
        matches!(self.repr, Repr::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&[Complex64]> {
        match &self.repr {
            Repr::Pure(v) => Some(v),
            Repr::Mixed(_) => None,
        }
    }

    /// The density matrix; built on demand for pure states.
    pub fn density_matrix(&self) -> Cow<'_, ComplexMatrix> {
        match &self.repr {
            Repr::Pure(v) => Cow::Owned(ComplexMatrix::outer(v, v)),
            Repr::Mixed(m) => Cow::Borrowed(m),
        }
    }

    /// Converts to the mixed representation.
    pub fn to_mixed(&self) -> Self {
        Self { repr: Repr::Mixed(self.density_matrix().into_owned()) }
    }

    pub fn into_density_matrix(self) -> ComplexMatrix {
        match self.repr {
            Repr::Pure(v) => ComplexMatrix::outer(&v, &v),
            Repr::Mixed(m) => m,
        }
    }

    /// Population `<i|ρ|i>` in the computational basis.
    pub fn population(&self, i: usize) -> f64 {
        match &self.repr {
            Repr::Pure(v) => v[i].norm_sqr(),
            Repr::Mixed(m) => m[(i, i)].re,
        }
    }

    pub fn element(&self, i: usize, j: usize) -> Complex64 {
        match &self.repr {
            Repr::Pure(v) => v[i] * v[j].conj(),
            Repr::Mixed(m) => m[(i, j)],
        }
    }
}

pub(crate) fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn check_square_hermitian_trace(rho: &ComplexMatrix, trace_tol: f64) -> Result<()> {
    if !rho.is_square() {
        return Err(Error::InvalidState(format!("density matrix must be square, got {}x{}", rho.rows(), rho.cols())));
    }
    let defect = rho.hermiticity_defect();
    if defect > tol::HERMITIAN {
        return Err(Error::InvalidState(format!("density matrix not hermitian (defect {defect:.3e})")));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
        return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
    }
    Ok(())
}

/// Checks the density-matrix invariants: square, hermitian within 1e-10,
/// trace within `trace_tol` of 1, smallest eigenvalue at least -1e-8.
pub fn validate_density(rho: &ComplexMatrix, trace_tol: f64) -> Result<()> {
    check_square_hermitian_trace(rho, trace_tol)?;
    let min = eig_hermitian(rho)?.values[0];
    if min < tol::POSITIVITY {
        return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
    }
    Ok(())
}
