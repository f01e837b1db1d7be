//! Populations, coherences, purity and statistical mixtures.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{conjugate, matmul, ComplexMatrix, QuantumState};
use crate::tol;

/// An orthonormal basis given by the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct BasisSpec {
    label: String,
    vectors: ComplexMatrix,
}

impl BasisSpec {
    pub fn new(label: impl Into<String>, vectors: ComplexMatrix) -> Result<Self> {
        if !vectors.is_square() {
            return Err(Error::Shape(format!(
                "basis matrix must be square, got {}x{}",
                vectors.rows(),
                vectors.cols()
            )));
        }
        let gram = matmul(&vectors.dagger(), &vectors)?;
        let defect = gram.max_abs_diff(&ComplexMatrix::identity(vectors.cols()));
        if defect > tol::UNITARY {
            return Err(Error::Domain(format!("basis columns not orthonormal (defect {defect:.3e})")));
        }
        Ok(Self { label: label.into(), vectors })
    }

    pub fn computational(dim: usize) -> Self {
        Self { label: "computational".into(), vectors: ComplexMatrix::identity(dim) }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn vectors(&self) -> &ComplexMatrix {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }
}

/// Weighted ensemble of pure states.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    components: Vec<(f64, QuantumState)>,
}

impl MixtureSpec {
    pub fn new(components: Vec<(f64, QuantumState)>) -> Result<Self> {
        let Some((_, first)) = components.first() else {
            return Err(Error::Model("mixture needs at least one component".into()));
        };
        let dim = first.dim();
        for (k, (w, s)) in components.iter().enumerate() {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::Model(format!("component {k} has invalid weight {w}")));
            }
            if !s.is_pure_repr() {
                return Err(Error::Model(format!("component {k} is not a pure state")));
            }
            if s.dim() != dim {
                return Err(Error::Shape(format!("component {k} has dim {} != {dim}", s.dim())));
            }
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Model(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[(f64, QuantumState)] {
        &self.components
    }
}

#[derive(Debug, Clone)]
pub struct PopulationsCoherences {
    pub populations: Vec<f64>,
    /// Full transformed matrix with the diagonal set to zero.
    pub coherences: ComplexMatrix,
}

/// `tr ρ²`
pub fn purity(rho: &QuantumState) -> f64 {
    match rho.amplitudes() {
        Some(v) => {
            let n: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            n * n
        }
        // tr ρ² = Σ_ij |ρ_ij|² for hermitian ρ.
        None => rho.density_matrix().data().iter().map(|z| z.norm_sqr()).sum(),
    }
}

/// Populations `<χ_i|ρ|χ_i>` and coherences `<χ_i|ρ|χ_j>` (i ≠ j) in `basis`.
pub fn populations_coherences(rho: &QuantumState, basis: &BasisSpec) -> Result<PopulationsCoherences> {
    if basis.dim() != rho.dim() {
        return Err(Error::Shape(format!("basis dim {} does not match state dim {}", basis.dim(), rho.dim())));
    }
    let v = basis.vectors();
    let mut transformed = matmul(&matmul(&v.dagger(), &rho.density_matrix())?, v)?;
    let n = rho.dim();
    let mut populations = Vec::with_capacity(n);
    for i in 0..n {
        populations.push(transformed[(i, i)].re);
        transformed[(i, i)] = Complex64::new(0.0, 0.0);
    }
    Ok(PopulationsCoherences { populations, coherences: transformed })
}

/// `ρ' = U ρ U†`; pure states stay pure.
pub fn basis_change(rho: &QuantumState, u: &ComplexMatrix) -> Result<QuantumState> {
    if !u.is_square() || u.rows() != rho.dim() {
        return Err(Error::Shape(format!("{}x{} transformation on dim-{} state", u.rows(), u.cols(), rho.dim())));
    }
    let defect = u.unitarity_defect();
    if defect > tol::UNITARY {
        return Err(Error::Domain(format!("transformation is not unitary (defect {defect:.3e})")));
    }
    match rho.amplitudes() {
        Some(v) => QuantumState::pure_normalized(u.apply(v)?),
        None => QuantumState::mixed_unchecked_positivity(conjugate(u, &rho.density_matrix())?.hermitian_part()),
    }
}

/// `<φ|ρ|φ>` for a pure probe state `φ`. Not clamped.
pub fn measurement_probability(rho: &QuantumState, phi: &QuantumState) -> Result<f64> {
    let Some(phi) = phi.amplitudes() else {
        return Err(Error::Domain("measurement probe must be a pure state".into()));
    };
    if phi.len() != rho.dim() {
        return Err(Error::Shape(format!("probe dim {} vs state dim {}", phi.len(), rho.dim())));
    }
    Ok(match rho.amplitudes() {
        Some(psi) => phi.iter().zip(psi).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr(),
        None => {
            let r_phi = rho.density_matrix().apply(phi)?;
            phi.iter().zip(&r_phi).map(|(a, b)| a.conj() * b).sum::<Complex64>().re
        }
    })
}

/// `Σ_k f_k |Ψ_k><Ψ_k|`
pub fn mix(spec: &MixtureSpec) -> Result<QuantumState> {
    let dim = spec.components[0].1.dim();
    let mut rho = ComplexMatrix::zeros(dim, dim);
    for (w, s) in &spec.components {
        let psi = s.amplitudes().expect("validated pure");
        rho.axpy(Complex64::new(*w, 0.0), &ComplexMatrix::outer(psi, psi));
    }
    QuantumState::mixed(rho)
}

/// Clamp to [0, 1] for reporting only.
pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}
