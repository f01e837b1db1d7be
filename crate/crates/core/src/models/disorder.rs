//! Dephasing from an ensemble of static random Hamiltonians.
//!
//! Each realization has fixed eigenvectors and eigenvalues
//! `ε_n(ω) = ε_n + g_n ω` with `ω` drawn from a distribution `f`. In the
//! eigenbasis the ensemble-averaged state is `ρ̄_mn(t) = r_mn γ_mn(t)` with
//!
//! ```text
//! γ_mn(t) = ∫ f(ω) e^{−i[ε_m(ω) − ε_n(ω)] t} dω
//!         = e^{−i(ε_m − ε_n)t} · φ((g_m − g_n) t),   φ(κ) = E[e^{−iκω}].
//! ```
//!
//! `γ_mm ≡ 1`, so populations never change.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Cauchy, Distribution as _, Normal, Uniform};

use crate::error::{Error, Result};
use crate::hilbert::{propagate_density, ComplexMatrix, QuantumState};
use crate::quadrature::{adaptive_gk, fourier_half_line};

/// Absolute tolerance of the quadrature route.
pub const QUADRATURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Gaussian { mean: f64, sigma: f64 },
    Lorentzian { center: f64, width: f64 },
    Uniform { a: f64, b: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Gaussian { mean, sigma } => mean.is_finite() && sigma.is_finite() && sigma > 0.0,
            Self::Lorentzian { center, width } => center.is_finite() && width.is_finite() && width > 0.0,
            Self::Uniform { a, b } => a.is_finite() && b.is_finite() && b > a,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Model(format!("invalid disorder distribution {self:?}")))
        }
    }

    pub fn density(&self, w: f64) -> f64 {
        match *self {
            Self::Gaussian { mean, sigma } => {
                let z = (w - mean) / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            Self::Lorentzian { center, width } => {
                let z = (w - center) / width;
                1.0 / (std::f64::consts::PI * width * (1.0 + z * z))
            }
            Self::Uniform { a, b } => {
                if (a..=b).contains(&w) {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
        }
    }

    /// `E[e^{−iκω}]` in closed form.
    pub fn characteristic(&self, kappa: f64) -> Complex64 {
        if kappa == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        match *self {
            Self::Gaussian { mean, sigma } => {
                Complex64::from_polar((-0.5 * sigma * sigma * kappa * kappa).exp(), -kappa * mean)
            }
            Self::Lorentzian { center, width } => Complex64::from_polar((-width * kappa.abs()).exp(), -kappa * center),
            Self::Uniform { a, b } => {
                let mid = 0.5 * (a + b);
                let half = 0.5 * kappa * (b - a);
                Complex64::from_polar(half.sin() / half, -kappa * mid)
            }
        }
    }

    /// `E[e^{−iκω}]` by adaptive quadrature of the density.
    pub fn characteristic_quadrature(&self, kappa: f64, abs_tol: f64) -> Result<Complex64> {
        if kappa == 0.0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        match *self {
            Self::Uniform { a, b } => {
                let f = |w: f64| Complex64::from_polar(1.0 / (b - a), -kappa * w);
                let half_period = std::f64::consts::PI / kappa.abs();
                let pieces = ((b - a) / half_period).ceil().max(1.0) as usize;
                let step = (b - a) / pieces as f64;
                let mut total = Complex64::new(0.0, 0.0);
                for i in 0..pieces {
                    let lo = a + i as f64 * step;
                    let hi = if i + 1 == pieces { b } else { lo + step };
                    total += adaptive_gk(f, lo, hi, abs_tol / pieces as f64, 2000)?.value;
                }
                Ok(total)
            }
            Self::Gaussian { mean: c, sigma: s } | Self::Lorentzian { center: c, width: s } => {
                let right = fourier_half_line(|x| self.density(c + x), kappa, s, abs_tol / 2.0)?;
                let left = fourier_half_line(|x| self.density(c - x), -kappa, s, abs_tol / 2.0)?;
                Ok(Complex64::from_polar(1.0, -kappa * c) * (right.value + left.value))
            }
        }
    }

    pub fn sample(&self, rng: &mut ChaCha20Rng) -> f64 {
        match *self {
            Self::Gaussian { mean, sigma } => Normal::new(mean, sigma).expect("validated").sample(rng),
            Self::Lorentzian { center, width } => Cauchy::new(center, width).expect("validated").sample(rng),
            Self::Uniform { a, b } => Uniform::new_inclusive(a, b).expect("validated").sample(rng),
        }
    }
}

/// Level `n` has energy `energy + slope·ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub energy: f64,
    pub slope: f64,
}

#[derive(Debug, Clone)]
pub struct DisorderSpec {
    distribution: Distribution,
    levels: Vec<Level>,
    initial: ComplexMatrix,
}

impl DisorderSpec {
    /// `initial` holds `r_mn` in the fixed eigenbasis and must be a valid
    /// density matrix.
    pub fn new(distribution: Distribution, levels: Vec<Level>, initial: ComplexMatrix) -> Result<Self> {
        distribution.validate()?;
        if levels.is_empty() {
            return Err(Error::Model("disorder model needs at least one level".into()));
        }
        if levels.iter().any(|l| !l.energy.is_finite() || !l.slope.is_finite()) {
            return Err(Error::Model("non-finite level parameters".into()));
        }
        if initial.rows() != levels.len() || !initial.is_square() {
            return Err(Error::Shape(format!(
                "initial matrix {}x{} does not match {} levels",
                initial.rows(),
                initial.cols(),
                levels.len()
            )));
        }
        crate::hilbert::validate_density(&initial, crate::tol::TRACE)?;
        Ok(Self { distribution, levels, initial })
    }

    pub fn distribution(&self) -> Distribution {
        self.distribution
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn initial(&self) -> &ComplexMatrix {
        &self.initial
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    fn check_indices(&self, m: usize, n: usize) -> Result<()> {
        if m >= self.dim() || n >= self.dim() {
            return Err(Error::Shape(format!("level index ({m}, {n}) out of range for {} levels", self.dim())));
        }
        Ok(())
    }

    /// `H_ω = diag(ε_n + g_n ω)`
    pub fn hamiltonian(&self, omega: f64) -> ComplexMatrix {
        let diag: Vec<f64> = self.levels.iter().map(|l| l.energy + l.slope * omega).collect();
        ComplexMatrix::from_real_diagonal(&diag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaMethod {
    ClosedForm,
    Quadrature,
}

/// `γ_mn(t)` by the chosen route; `γ_mm = 1` exactly either way.
pub fn disorder_gamma_with(spec: &DisorderSpec, m: usize, n: usize, t: f64, method: GammaMethod) -> Result<Complex64> {
    spec.check_indices(m, n)?;
    if m == n {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let (lm, ln) = (spec.levels[m], spec.levels[n]);
    let kappa = (lm.slope - ln.slope) * t;
    let phi = match method {
        GammaMethod::ClosedForm => spec.distribution.characteristic(kappa),
        GammaMethod::Quadrature => spec.distribution.characteristic_quadrature(kappa, QUADRATURE_TOL)?,
    };
    let gamma = Complex64::from_polar(1.0, -(lm.energy - ln.energy) * t) * phi;
    if gamma.norm() > 1.0 + 1e-10 {
        return Err(Error::Numerical(format!("|γ_{m}{n}({t})| = {} exceeds 1", gamma.norm())));
    }
    Ok(gamma)
}

/// `γ_mn(t)` in closed form (every supported distribution admits one); the
/// quadrature route is available through [`disorder_gamma_with`].
pub fn disorder_gamma(spec: &DisorderSpec, m: usize, n: usize, t: f64) -> Result<Complex64> {
    disorder_gamma_with(spec, m, n, t, GammaMethod::ClosedForm)
}

/// Long-time dephasing time `T₂` of `γ_mn` for Lorentzian disorder,
/// `1 / (w |g_m − g_n|)`. `None` for other distributions or equal slopes.
pub fn lorentzian_t2(spec: &DisorderSpec, m: usize, n: usize) -> Option<f64> {
    let Distribution::Lorentzian { width, .. } = spec.distribution else {
        return None;
    };
    let delta = (spec.levels.get(m)?.slope - spec.levels.get(n)?.slope).abs();
    (delta > 0.0).then(|| 1.0 / (width * delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AverageMethod {
    ClosedForm,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct DisorderMonteCarlo {
    pub state: QuantumState,
    /// Standard error of each entry (modulus of the complex error).
    pub stderr: Vec<Vec<f64>>,
    pub samples: usize,
}

/// Explicit average of `U_ω ρ₀ U_ω†` over sampled realizations.
pub fn disorder_monte_carlo(spec: &DisorderSpec, t: f64, samples: usize, seed: u64) -> Result<DisorderMonteCarlo> {
    if samples < 2 {
        return Err(Error::Configuration("monte-carlo average needs at least 2 samples".into()));
    }
    let n = spec.dim();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut mean = vec![Complex64::new(0.0, 0.0); n * n];
    let mut m2_re = vec![0.0; n * n];
    let mut m2_im = vec![0.0; n * n];
    for k in 0..samples {
        let omega = spec.distribution.sample(&mut rng);
        let rho = propagate_density(&spec.initial, &spec.hamiltonian(omega), t)?;
        let kf = (k + 1) as f64;
        for (idx, &x) in rho.data().iter().enumerate() {
            let delta = x - mean[idx];
            mean[idx] += delta / kf;
            let after = x - mean[idx];
            m2_re[idx] += delta.re * after.re;
            m2_im[idx] += delta.im * after.im;
        }
    }
    let sf = samples as f64;
    let stderr = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let idx = i * n + j;
                    ((m2_re[idx] + m2_im[idx]) / (sf - 1.0) / sf).sqrt()
                })
                .collect()
        })
        .collect();
    let state = QuantumState::mixed(ComplexMatrix::new(n, n, mean)?.hermitian_part())?;
    Ok(DisorderMonteCarlo { state, stderr, samples })
}

/// `ρ̄(t)`: closed form `r_mn γ_mn(t)` or a sampled average.
pub fn disorder_averaged_state(spec: &DisorderSpec, t: f64, method: AverageMethod) -> Result<QuantumState> {
    match method {
        AverageMethod::ClosedForm => {
            let n = spec.dim();
            let mut rho = spec.initial.clone();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        rho[(i, j)] *= disorder_gamma(spec, i, j, t)?;
                    }
                }
            }
            QuantumState::mixed(rho)
        }
        AverageMethod::MonteCarlo { samples, seed } => Ok(disorder_monte_carlo(spec, t, samples, seed)?.state),
    }
}
