//! Validity tolerances shared across the crate.

/// Hermiticity of density matrices and Hamiltonians.
pub const HERMITIAN: f64 = 1e-10;
/// Unit trace at construction.
pub const TRACE: f64 = 1e-10;
/// Squared norm of pure-state amplitudes.
pub const NORM: f64 = 1e-10;
/// Smallest admissible eigenvalue of a density matrix.
pub const POSITIVITY: f64 = -1e-8;
/// Unitarity of basis changes.
pub const UNITARY: f64 = 1e-10;
/// Kraus completeness `Σ E†E = I`.
pub const KRAUS_COMPLETENESS: f64 = 1e-8;
/// Trace drift allowed at integration sample points.
pub const INTEGRATION_TRACE: f64 = 1e-8;
