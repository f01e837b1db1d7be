//! Damped harmonic oscillator in a thermal reservoir, prepared in a
//! superposition of two coherent wave packets.
//!
//! `H = ω a†a` on a truncated Fock basis with channels `(a, γ(n̄+1))` and
//! `(a†, γ n̄)`. Positions are in units of the ground-state width, so
//! `x = (a + a†)/√2` and `|α⟩` is centred at `√2 Re α`. Packets starting at
//! `±√2 α` (real `α`) overlap at odd multiples of a quarter period, where the
//! interference fringes appear.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use crate::coherence::purity;
use crate::error::{Error, Result};
use crate::evolution::{integrate_master_with, LindbladModel, TimeGrid};
use crate::hilbert::{ComplexMatrix, QuantumState};

/// Largest population allowed in the top Fock state during a run.
pub const TOP_FOCK_LIMIT: f64 = 1e-6;
pub const DEFAULT_POSITION_POINTS: usize = 512;
/// Half-width of the region where fringe visibility is measured.
pub const VISIBILITY_HALF_WIDTH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedOscParams {
    pub n_fock: usize,
    pub omega: f64,
    pub gamma: f64,
    pub n_thermal: f64,
    pub alpha1: Complex64,
    pub alpha2: Complex64,
}

impl DampedOscParams {
    pub fn max_alpha(&self) -> f64 {
        self.alpha1.norm().max(self.alpha2.norm())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.gamma.is_finite() && self.n_thermal.is_finite()) {
            return Err(Error::Model("non-finite oscillator parameter".into()));
        }
        if self.gamma < 0.0 || self.n_thermal < 0.0 {
            return Err(Error::Model("gamma and n_thermal must be non-negative".into()));
        }
        let needed = 8.0 * (self.max_alpha().powi(2) + 1.0);
        if (self.n_fock as f64) < needed {
            return Err(Error::Truncation(format!("n_fock = {} below 8·(max|α|² + 1) = {needed}", self.n_fock)));
        }
        Ok(())
    }

    /// Packet-merge times `(2k+1) π / (2ω)`, `k = 0..count`.
    pub fn merge_times(&self, count: usize) -> Vec<f64> {
        (0..count).map(|k| (2 * k + 1) as f64 * PI / (2.0 * self.omega)).collect()
    }

    /// Grid sampling every quarter period exactly, `steps_per_quarter` RK4
    /// steps each, covering `quarters` quarter periods.
    pub fn quarter_period_grid(&self, quarters: usize, steps_per_quarter: usize) -> Result<TimeGrid> {
        let quarter = PI / (2.0 * self.omega);
        TimeGrid::new(0.0, quarters as f64 * quarter, quarters * steps_per_quarter, steps_per_quarter)
    }
}

/// Annihilation operator on `n` Fock states.
pub fn annihilation(n: usize) -> ComplexMatrix {
    let mut a = ComplexMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = Complex64::new((k as f64).sqrt(), 0.0);
    }
    a
}

pub fn number_operator(n: usize) -> ComplexMatrix {
    ComplexMatrix::from_real_diagonal(&(0..n).map(|k| k as f64).collect::<Vec<_>>())
}

/// Truncated coherent-state amplitudes `e^{−|α|²/2} αⁿ/√n!` (not renormalized).
pub fn coherent_amplitudes(alpha: Complex64, n: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n);
    let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for k in 0..n {
        out.push(c);
        c = c * alpha / ((k + 1) as f64).sqrt();
    }
    out
}

/// Normalized `|α₁⟩ + |α₂⟩` in the truncated basis.
pub fn cat_state(params: &DampedOscParams) -> Result<QuantumState> {
    let a = coherent_amplitudes(params.alpha1, params.n_fock);
    let b = coherent_amplitudes(params.alpha2, params.n_fock);
    QuantumState::pure_normalized(a.iter().zip(&b).map(|(x, y)| x + y).collect())
}

pub fn damped_osc_model(params: &DampedOscParams) -> Result<LindbladModel> {
    params.validate()?;
    let n = params.n_fock;
    let a = annihilation(n);
    let h = number_operator(n).scale_real(params.omega);
    LindbladModel::new(
        h,
        vec![(a.dagger(), params.gamma * params.n_thermal), (a, params.gamma * (params.n_thermal + 1.0))],
    )
}

/// Uniform grid over `±(√2 max|α| + 5)`.
pub fn position_grid(params: &DampedOscParams, points: usize) -> Vec<f64> {
    let half = SQRT_2 * params.max_alpha() + 5.0;
    let step = 2.0 * half / (points - 1) as f64;
    (0..points).map(|i| -half + i as f64 * step).collect()
}

/// Hermite functions `ψ_n(x)` for `n < n_max`, row `n`, column `x`.
pub fn hermite_functions(n_max: usize, xs: &[f64]) -> Vec<Vec<f64>> {
    let mut table = vec![vec![0.0; xs.len()]; n_max];
    for (j, &x) in xs.iter().enumerate() {
        let mut prev = 0.0;
        let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
        for (n, row) in table.iter_mut().enumerate() {
            row[j] = cur;
            let next = (2.0 / (n + 1) as f64).sqrt() * x * cur - ((n as f64) / (n + 1) as f64).sqrt() * prev;
            prev = cur;
            cur = next;
        }
    }
    table
}

/// `p(x) = ⟨x|ρ|x⟩ = Σ_mn ψ_m(x) ρ_mn ψ_n(x)`
pub fn position_density(rho: &ComplexMatrix, hermite: &[Vec<f64>]) -> Vec<f64> {
    let n = rho.rows();
    let nx = hermite[0].len();
    (0..nx)
        .map(|j| {
            let mut p = 0.0;
            for m in 0..n {
                let hm = hermite[m][j];
                p += rho[(m, m)].re * hm * hm;
                for k in (m + 1)..n {
                    p += 2.0 * rho[(m, k)].re * hm * hermite[k][j];
                }
            }
            p
        })
        .collect()
}

pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// `(max − min)/(max + min)` of `p` over `|x| ≤ half_width`.
pub fn contrast(xs: &[f64], p: &[f64], half_width: f64) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&x, &v) in xs.iter().zip(p) {
        if x.abs() <= half_width {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !(hi + lo > 0.0) {
        return 0.0;
    }
    (hi - lo) / (hi + lo)
}

/// Contrast of `p / envelope` over `|x| ≤ half_width`, where `envelope` is
/// the density of the packets without their interference term. Dividing out
/// the envelope leaves only the fringes, so a single packet scores 0 and a
/// fully coherent merge scores 1.
pub fn fringe_visibility(xs: &[f64], p: &[f64], envelope: &[f64], half_width: f64) -> f64 {
    let peak = envelope.iter().copied().fold(0.0, f64::max);
    let ratio: Vec<f64> =
        p.iter().zip(envelope).map(|(&v, &e)| if e > 1e-12 * peak { v / e } else { f64::NAN }).collect();
    let (xs, ratio): (Vec<f64>, Vec<f64>) = xs.iter().zip(&ratio).filter(|(_, r)| !r.is_nan()).unzip();
    contrast(&xs, &ratio, half_width)
}

/// `(|α₁⟩⟨α₁| + |α₂⟩⟨α₂|)/2`: the two packets with no coherence between them.
pub fn packet_mixture(params: &DampedOscParams) -> Result<QuantumState> {
    let packet = |alpha| -> Result<ComplexMatrix> {
        let psi = QuantumState::pure_normalized(coherent_amplitudes(alpha, params.n_fock))?;
        Ok(psi.into_density_matrix())
    };
    let rho = &packet(params.alpha1)? + &packet(params.alpha2)?;
    QuantumState::mixed(rho.scale_real(0.5))
}

#[derive(Debug, Clone)]
pub struct OscillatorFrame {
    pub t: f64,
    pub density: Vec<f64>,
    pub norm: f64,
    pub trace: f64,
    pub purity: f64,
    /// `ω(⟨n⟩ + ½)`
    pub mean_energy: f64,
    pub top_population: f64,
    /// Fringe visibility relative to the packet envelope.
    pub visibility: f64,
    /// Contrast of the bare density, envelope included.
    pub raw_contrast: f64,
}

#[derive(Debug, Clone)]
pub struct OscillatorRun {
    pub x: Vec<f64>,
    pub frames: Vec<OscillatorFrame>,
}

impl OscillatorRun {
    /// Frame whose time is closest to `t`.
    pub fn frame_at(&self, t: f64) -> &OscillatorFrame {
        self.frames.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs())).expect("at least one frame")
    }
}

/// Integrates the damped-oscillator master equation and evaluates `p(x, t)`
/// at every grid sample. The packet mixture is propagated alongside to give
/// the envelope for the fringe visibility.
pub fn damped_osc_scenario(params: &DampedOscParams, grid: &TimeGrid, points: usize) -> Result<OscillatorRun> {
    if points < 3 {
        return Err(Error::Configuration("need at least 3 position points".into()));
    }
    let model = damped_osc_model(params)?;
    let x = position_grid(params, points);
    let hermite = hermite_functions(params.n_fock, &x);
    let top = params.n_fock - 1;
    let check_top = |t: f64, rho: &ComplexMatrix| {
        let top_population = rho[(top, top)].re;
        if top_population > TOP_FOCK_LIMIT {
            return Err(Error::Truncation(format!(
                "top Fock population {top_population:.3e} > {TOP_FOCK_LIMIT:e} at t = {t}"
            )));
        }
        Ok(top_population)
    };

    let mut envelopes = Vec::with_capacity(grid.n_samples());
    integrate_master_with(&packet_mixture(params)?, &model, grid, |t, state| {
        let rho = state.density_matrix();
        check_top(t, &rho)?;
        envelopes.push(position_density(&rho, &hermite));
        Ok(())
    })?;

    let mut frames = Vec::with_capacity(grid.n_samples());
    integrate_master_with(&cat_state(params)?, &model, grid, |t, state| {
        let rho = state.density_matrix();
        let top_population = check_top(t, &rho)?;
        let density = position_density(&rho, &hermite);
        let envelope = &envelopes[frames.len()];
        let mean_n: f64 = (0..params.n_fock).map(|k| k as f64 * rho[(k, k)].re).sum();
        frames.push(OscillatorFrame {
            t,
            norm: trapezoid(&x, &density),
            visibility: fringe_visibility(&x, &density, envelope, VISIBILITY_HALF_WIDTH),
            raw_contrast: contrast(&x, &density, VISIBILITY_HALF_WIDTH),
            density,
            trace: rho.trace().re,
            purity: purity(&state),
            mean_energy: params.omega * (mean_n + 0.5),
            top_population,
        });
        Ok(())
    })?;
    Ok(OscillatorRun { x, frames })
}
