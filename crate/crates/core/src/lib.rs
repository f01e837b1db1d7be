//! Numerical toolkit for open quantum system dynamics.
//!
//! * [`hilbert`]: dense complex matrices, states, tensor products, partial
//!   trace and hermitian spectral decomposition.
//! * [`coherence`]: populations, coherences, purity, mixtures.
//! * [`evolution`]: unitary propagation, Kraus maps, Lindblad integration.
//! * [`trajectory`]: quantum-jump (Monte Carlo wave-function) unraveling.
//! * [`models`]: central-spin dephasing and spin echo, disorder-averaged
//!   dephasing, three-level fluorescence, damped oscillator interference.

pub mod coherence;
pub mod error;
pub mod evolution;
pub mod hilbert;
pub mod models;
pub mod quadrature;
pub mod stats;
pub mod tol;
pub mod trajectory;

pub use error::{Error, Result};
pub use num_complex::Complex64;
