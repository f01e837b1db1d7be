//! Central spin coupled to a bath of `M` spins,
//!
//! ```text
//! H = (ω₀/2) S_z + Σ_k A_k S_z ⊗ S_z^(k),   S_z = diag(+1/2, −1/2),
//! ```
//!
//! with the bath in `I/2^M`. Every term commutes, so conditioned on a bath
//! configuration `m_k = ±1/2` the central spin only acquires the phase
//! `(ω₀/2 + Σ_k A_k m_k) t`. Averaging over configurations gives
//!
//! ```text
//! ρ₁₂(t) = c₁ c₂* e^{−iω₀t/2} Π_k cos(A_k t / 2).
//! ```
//!
//! A π pulse about x at `t_e` swaps the two central-spin levels, so for
//! `t ≥ t_e` the accumulated phase runs backwards:
//!
//! ```text
//! ρ₁₂(t) = c₁* c₂ e^{−iω₀(t−2t_e)/2} Π_k cos(A_k (t − 2t_e) / 2),
//! ```
//!
//! which returns to magnitude `|c₁ c₂|` at `t = 2t_e`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{kron, partial_trace, propagate_density, spin, ComplexMatrix, TensorFactorization};
use crate::tol;

#[derive(Debug, Clone, PartialEq)]
pub struct CentralSpinParams {
    pub omega0: f64,
    pub couplings: Vec<f64>,
    pub c1: Complex64,
    pub c2: Complex64,
}

impl CentralSpinParams {
    pub fn new(omega0: f64, couplings: Vec<f64>, c1: Complex64, c2: Complex64) -> Result<Self> {
        if couplings.is_empty() {
            return Err(Error::Model("central spin model needs at least one bath spin".into()));
        }
        if !omega0.is_finite() || couplings.iter().any(|a| !a.is_finite()) {
            return Err(Error::Model("non-finite central spin parameter".into()));
        }
        let norm = c1.norm_sqr() + c2.norm_sqr();
        if (norm - 1.0).abs() > tol::NORM {
            return Err(Error::Model(format!("|c1|² + |c2|² = {norm}, expected 1")));
        }
        Ok(Self { omega0, couplings, c1, c2 })
    }

    /// Equal superposition `(|↑⟩ + |↓⟩)/√2`.
    pub fn equal_superposition(omega0: f64, couplings: Vec<f64>) -> Result<Self> {
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::new(omega0, couplings, s, s)
    }

    pub fn bath_size(&self) -> usize {
        self.couplings.len()
    }

    /// `|c₁ c₂*|`, the largest coherence magnitude the model can show.
    pub fn initial_coherence(&self) -> Complex64 {
        self.c1 * self.c2.conj()
    }
}

/// `Π_k cos(A_k t / 2)`
pub fn dephasing_factor(couplings: &[f64], t: f64) -> f64 {
    couplings.iter().map(|a| (0.5 * a * t).cos()).product()
}

/// `⟨χ₁|ρ_S(t)|χ₂⟩` of the reduced central-spin state.
pub fn central_spin_coherence(params: &CentralSpinParams, t: f64) -> Complex64 {
    params.initial_coherence()
        * Complex64::from_polar(1.0, -0.5 * params.omega0 * t)
        * dephasing_factor(&params.couplings, t)
}

/// `t_D = (Σ_k A_k²)^{−1/2}`
pub fn central_spin_decoherence_time(params: &CentralSpinParams) -> Result<f64> {
    let s: f64 = params.couplings.iter().map(|a| a * a).sum();
    if s == 0.0 {
        return Err(Error::UndefinedTimescale("all couplings are zero".into()));
    }
    Ok(s.sqrt().recip())
}

/// Coherence under the echo sequence: free evolution to `t_e`, π rotation
/// about x on the central spin, free evolution to `t`.
pub fn spin_echo_coherence(params: &CentralSpinParams, t_e: f64, t: f64) -> Result<Complex64> {
    if !(t_e > 0.0) || !(t >= 0.0) {
        return Err(Error::Domain(format!("need t_e > 0 and t ≥ 0, got t_e = {t_e}, t = {t}")));
    }
    if t <= t_e {
        return Ok(central_spin_coherence(params, t));
    }
    let tau = t - 2.0 * t_e;
    Ok(params.c1.conj()
        * params.c2
        * Complex64::from_polar(1.0, -0.5 * params.omega0 * tau)
        * dephasing_factor(&params.couplings, tau))
}

/// Full system–bath Hamiltonian on `2^(M+1)` dimensions, central spin as the
/// first (slowest) factor.
pub fn central_spin_hamiltonian(params: &CentralSpinParams) -> ComplexMatrix {
    let m = params.bath_size();
    let sz = spin::s_z();
    let id = |k: usize| ComplexMatrix::identity(1 << k);
    let mut h = kron(&sz.scale_real(0.5 * params.omega0), &id(m));
    for (k, &a) in params.couplings.iter().enumerate() {
        // S_z ⊗ I_{2^k} ⊗ S_z ⊗ I_{2^(M−k−1)}
        let bath = kron(&kron(&id(k), &sz), &id(m - k - 1));
        h.axpy(Complex64::new(a, 0.0), &kron(&sz, &bath));
    }
    h
}

/// `|Ψ⟩⟨Ψ| ⊗ I/2^M`
pub fn central_spin_initial_density(params: &CentralSpinParams) -> ComplexMatrix {
    let psi = [params.c1, params.c2];
    let bath_dim = 1usize << params.bath_size();
    kron(&ComplexMatrix::outer(&psi, &psi), &ComplexMatrix::identity(bath_dim).scale_real(1.0 / bath_dim as f64))
}

/// Coherence by explicit evolution of the full density matrix followed by the
/// partial trace over the bath. Exponential in `M`; intended as a
/// cross-check for `M ≤ 10`.
pub fn central_spin_coherence_brute_force(params: &CentralSpinParams, times: &[f64]) -> Result<Vec<Complex64>> {
    let h = central_spin_hamiltonian(params);
    let rho0 = central_spin_initial_density(params);
    let fact = TensorFactorization::new(vec![2, 1 << params.bath_size()])?;
    times
        .iter()
        .map(|&t| {
            let rho = propagate_density(&rho0, &h, t)?;
            Ok(partial_trace(&rho, &fact, &[0])?[(0, 1)])
        })
        .collect()
}

/// `(R ⊗ I) ρ (R ⊗ I)†` for a 2×2 `R` on the first factor.
fn apply_to_central(r: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    let n = rho.rows();
    let b = n / 2;
    let mut out = ComplexMatrix::zeros(n, n);
    for a in 0..2 {
        for c in 0..2 {
            for bb in 0..2 {
                for d in 0..2 {
                    let w = r[(a, bb)] * r[(c, d)].conj();
                    if w == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for i in 0..b {
                        for j in 0..b {
                            out[(a * b + i, c * b + j)] += w * rho[(bb * b + i, d * b + j)];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Echo coherence by explicit evolution with the pulse `exp(−iπ S_x) ⊗ I`.
pub fn spin_echo_coherence_brute_force(params: &CentralSpinParams, t_e: f64, t: f64) -> Result<Complex64> {
    let h = central_spin_hamiltonian(params);
    let rho0 = central_spin_initial_density(params);
    let fact = TensorFactorization::new(vec![2, 1 << params.bath_size()])?;
    let rho = if t <= t_e {
        propagate_density(&rho0, &h, t)?
    } else {
        let pulse = crate::hilbert::expm_hermitian_prop(&spin::s_x(), std::f64::consts::PI)?;
        let before = propagate_density(&rho0, &h, t_e)?;
        propagate_density(&apply_to_central(&pulse, &before), &h, t - t_e)?
    };
    Ok(partial_trace(&rho, &fact, &[0])?[(0, 1)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(couplings: Vec<f64>) -> CentralSpinParams {
        CentralSpinParams::equal_superposition(0.4, couplings).unwrap()
    }

    #[test]
    fn initial_coherence_at_zero_time() {
        let p =
            CentralSpinParams::new(1.3, vec![0.5, 2.0], Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).unwrap();
        assert_eq!(central_spin_coherence(&p, 0.0), p.c1 * p.c2.conj());
    }

    #[test]
    fn decoherence_time_formula() {
        let a = 1.7;
        let four = params(vec![a; 4]);
        assert!((central_spin_decoherence_time(&four).unwrap() - 1.0 / (2.0 * a)).abs() < 1e-15);
        let one = params(vec![a]);
        assert!((central_spin_decoherence_time(&one).unwrap() - 1.0 / a).abs() < 1e-15);
        let base = params(vec![0.3, 1.1, 2.0]);
        let doubled = params(vec![0.6, 2.2, 4.0]);
        let ratio = central_spin_decoherence_time(&base).unwrap() / central_spin_decoherence_time(&doubled).unwrap();
        assert!((ratio - 2.0).abs() < 1e-14);
        assert!(matches!(central_spin_decoherence_time(&params(vec![0.0, 0.0])), Err(Error::UndefinedTimescale(_))));
    }

    #[test]
    fn invalid_params_rejected() {
        let s = Complex64::new(0.5, 0.0);
        assert!(CentralSpinParams::new(0.0, vec![1.0], s, s).is_err());
        assert!(CentralSpinParams::equal_superposition(0.0, vec![]).is_err());
    }

    #[test]
    fn echo_degenerates_to_single_pulse() {
        let p =
            CentralSpinParams::new(0.9, vec![1.0, 0.4], Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).unwrap();
        let c = spin_echo_coherence(&p, 1e-12, 1e-12 * 1.5).unwrap();
        assert!((c.norm() - p.initial_coherence().norm()).abs() < 1e-10);
        assert!(spin_echo_coherence(&p, 0.0, 1.0).is_err());
    }

    #[test]
    fn hamiltonian_is_diagonal_and_sized() {
        let p = params(vec![1.0, 2.0, 3.0]);
        let h = central_spin_hamiltonian(&p);
        assert_eq!(h.rows(), 16);
        assert!(h.is_diagonal());
        // |↑, ↑↑↑⟩: ω₀/4 + Σ A_k / 4
        assert!((h[(0, 0)].re - (0.1 + 1.5)).abs() < 1e-15);
    }

    #[test]
    fn brute_force_matches_single_bath_spin() {
        let p = params(vec![1.3]);
        let times = [0.0, 0.7, 2.9];
        let bf = central_spin_coherence_brute_force(&p, &times).unwrap();
        for (c, &t) in bf.iter().zip(&times) {
            assert!((c - central_spin_coherence(&p, t)).norm() < 1e-12);
        }
        let e = spin_echo_coherence_brute_force(&p, 1.0, 1.7).unwrap();
        assert!((e - spin_echo_coherence(&p, 1.0, 1.7).unwrap()).norm() < 1e-12);
    }
}
