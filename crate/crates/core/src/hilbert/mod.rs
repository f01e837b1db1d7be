//! Finite-dimensional Hilbert-space linear algebra.

mod matrix;
mod spectral;
pub mod spin;
mod state;
mod tensor;

pub use matrix::{dagger, kron, kron_all, matmul, ComplexMatrix};
pub use spectral::{conjugate, eig_hermitian, expm_hermitian_prop, propagate_density, HermitianEigen};
pub use state::{validate_density, QuantumState};
pub use tensor::{partial_trace, TensorFactorization};

pub(crate) use state::norm_sqr;
