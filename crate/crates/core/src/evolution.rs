//! Deterministic evolution of density matrices: unitary propagation, Kraus
//! maps and fixed-step RK4 integration of the Lindblad master equation
//!
//! ```text
//! dρ/dt = -i[H, ρ] + Σ_j γ_j (L_j ρ L_j† - ½{L_j† L_j, ρ})
//! ```

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{conjugate, matmul, propagate_density, ComplexMatrix, QuantumState};
use crate::tol;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone)]
pub struct KrausSet {
    operators: Vec<ComplexMatrix>,
    time_label: Option<f64>,
}

impl KrausSet {
    /// Validates shapes and completeness `Σ E_k† E_k = I` within 1e-8.
    pub fn new(operators: Vec<ComplexMatrix>, time_label: Option<f64>) -> Result<Self> {
        let Some(first) = operators.first() else {
            return Err(Error::Model("Kraus set is empty".into()));
        };
        let n = first.rows();
        if operators.iter().any(|e| e.rows() != n || e.cols() != n) {
            return Err(Error::Shape(format!("all Kraus operators must be {n}x{n}")));
        }
        let mut sum = ComplexMatrix::zeros(n, n);
        for e in &operators {
            sum.axpy(Complex64::new(1.0, 0.0), &matmul(&e.dagger(), e)?);
        }
        let defect = sum.max_abs_diff(&ComplexMatrix::identity(n));
        if defect > tol::KRAUS_COMPLETENESS {
            return Err(Error::Model(format!("Kraus completeness violated (defect {defect:.3e})")));
        }
        Ok(Self { operators, time_label })
    }

    /// Two-level amplitude damping with decay probability `p`, basis (g, e).
    pub fn amplitude_damping(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Model(format!("damping probability {p} outside [0, 1]")));
        }
        let e0 = ComplexMatrix::from_real_diagonal(&[1.0, (1.0 - p).sqrt()]);
        let e1 = ComplexMatrix::from_real_rows(&[&[0.0, p.sqrt()], &[0.0, 0.0]])?;
        Self::new(vec![e0, e1], None)
    }

    /// Two-level phase flip with probability `q`.
    pub fn dephasing(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Model(format!("flip probability {q} outside [0, 1]")));
        }
        let e0 = ComplexMatrix::identity(2).scale_real((1.0 - q).sqrt());
        let e1 = ComplexMatrix::from_real_diagonal(&[1.0, -1.0]).scale_real(q.sqrt());
        Self::new(vec![e0, e1], None)
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn time_label(&self) -> Option<f64> {
        self.time_label
    }

    pub fn dim(&self) -> usize {
        self.operators[0].rows()
    }
}

/// One dissipative channel: jump operator and its rate.
#[derive(Debug, Clone)]
pub struct Channel {
    pub op: ComplexMatrix,
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct LindbladModel {
    hamiltonian: ComplexMatrix,
    channels: Vec<Channel>,
}

impl LindbladModel {
    pub fn new(hamiltonian: ComplexMatrix, channels: Vec<(ComplexMatrix, f64)>) -> Result<Self> {
        if !hamiltonian.is_square() {
            return Err(Error::Shape("Hamiltonian must be square".into()));
        }
        let defect = hamiltonian.hermiticity_defect();
        if defect > tol::HERMITIAN {
            return Err(Error::Domain(format!("Hamiltonian not hermitian (defect {defect:.3e})")));
        }
        let n = hamiltonian.rows();
        let mut out = Vec::with_capacity(channels.len());
        for (k, (op, rate)) in channels.into_iter().enumerate() {
            if op.rows() != n || op.cols() != n {
                return Err(Error::Shape(format!("channel {k} operator is not {n}x{n}")));
            }
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(Error::Model(format!("channel {k} has invalid rate {rate}")));
            }
            out.push(Channel { op, rate });
        }
        Ok(Self { hamiltonian, channels: out })
    }

    pub fn closed(hamiltonian: ComplexMatrix) -> Result<Self> {
        Self::new(hamiltonian, Vec::new())
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.rows()
    }

    /// `H - (i/2) Σ_j γ_j L_j† L_j`
    pub fn effective_hamiltonian(&self) -> ComplexMatrix {
        let mut h = self.hamiltonian.clone();
        for ch in &self.channels {
            let ldl = matmul(&ch.op.dagger(), &ch.op).expect("validated shapes");
            h.axpy(Complex64::new(0.0, -0.5 * ch.rate), &ldl);
        }
        h
    }
}

/// Uniform time grid with samples every `sample_every` steps. The final step
/// is always sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub sample_every: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize, sample_every: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) || t_end <= t_start {
            return Err(Error::Configuration(format!("need t_end > t_start, got [{t_start}, {t_end}]")));
        }
        if n_steps == 0 {
            return Err(Error::Configuration("n_steps must be at least 1".into()));
        }
        if sample_every == 0 {
            return Err(Error::Configuration("sample_every must be at least 1".into()));
        }
        Ok(Self { t_start, t_end, n_steps, sample_every })
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    pub fn time(&self, step: usize) -> f64 {
        if step == self.n_steps {
            self.t_end
        } else {
            self.t_start + (self.t_end - self.t_start) * step as f64 / self.n_steps as f64
        }
    }

    pub fn is_sample(&self, step: usize) -> bool {
        step % self.sample_every == 0 || step == self.n_steps
    }

    pub fn sample_steps(&self) -> Vec<usize> {
        (0..=self.n_steps).filter(|&k| self.is_sample(k)).collect()
    }

    pub fn sample_times(&self) -> Vec<f64> {
        self.sample_steps().into_iter().map(|k| self.time(k)).collect()
    }

    pub fn n_samples(&self) -> usize {
        self.n_steps / self.sample_every + 1 + usize::from(self.n_steps % self.sample_every != 0)
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    pub state: QuantumState,
}

pub fn evolve_unitary(rho: &QuantumState, h: &ComplexMatrix, t: f64) -> Result<QuantumState> {
    if h.rows() != rho.dim() {
        return Err(Error::Shape(format!("Hamiltonian dim {} vs state dim {}", h.rows(), rho.dim())));
    }
    match rho.amplitudes() {
        Some(psi) => {
            let u = crate::hilbert::expm_hermitian_prop(h, t)?;
            QuantumState::pure_normalized(u.apply(psi)?)
        }
        None => {
            QuantumState::mixed_unchecked_positivity(propagate_density(&rho.density_matrix(), h, t)?.hermitian_part())
        }
    }
}

/// `Σ_k E_k ρ E_k†`
pub fn apply_kraus(rho: &QuantumState, ks: &KrausSet) -> Result<QuantumState> {
    if ks.dim() != rho.dim() {
        return Err(Error::Shape(format!("Kraus dim {} vs state dim {}", ks.dim(), rho.dim())));
    }
    let r = rho.density_matrix();
    let n = rho.dim();
    let mut out = ComplexMatrix::zeros(n, n);
    for e in ks.operators() {
        out.axpy(Complex64::new(1.0, 0.0), &conjugate(e, &r)?);
    }
    QuantumState::mixed(out.hermitian_part())
}

/// Precomputed pieces of the Lindblad generator.
struct Generator {
    h_eff: ComplexMatrix,
    h_eff_dag: ComplexMatrix,
    jumps: Vec<(ComplexMatrix, ComplexMatrix, f64)>,
}

impl Generator {
    fn new(model: &LindbladModel) -> Self {
        let h_eff = model.effective_hamiltonian();
        let h_eff_dag = h_eff.dagger();
        let jumps =
            model.channels().iter().filter(|c| c.rate > 0.0).map(|c| (c.op.clone(), c.op.dagger(), c.rate)).collect();
        Self { h_eff, h_eff_dag, jumps }
    }

    /// `-i (H_eff ρ - ρ H_eff†) + Σ γ L ρ L†`, algebraically equal to the
    /// commutator/anticommutator form.
    fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = &(&self.h_eff * rho) - &(rho * &self.h_eff_dag);
        out = out.scale(-I);
        for (l, ld, rate) in &self.jumps {
            out.axpy(Complex64::new(*rate, 0.0), &(&(l * rho) * ld));
        }
        out
    }

    fn rk4_step(&self, rho: &ComplexMatrix, dt: f64) -> ComplexMatrix {
        let half = Complex64::new(0.5 * dt, 0.0);
        let k1 = self.apply(rho);
        let mut tmp = rho.clone();
        tmp.axpy(half, &k1);
        let k2 = self.apply(&tmp);
        let mut tmp = rho.clone();
        tmp.axpy(half, &k2);
        let k3 = self.apply(&tmp);
        let mut tmp = rho.clone();
        tmp.axpy(Complex64::new(dt, 0.0), &k3);
        let k4 = self.apply(&tmp);
        let mut next = rho.clone();
        next.axpy(Complex64::new(dt / 6.0, 0.0), &k1);
        next.axpy(Complex64::new(dt / 3.0, 0.0), &k2);
        next.axpy(Complex64::new(dt / 3.0, 0.0), &k3);
        next.axpy(Complex64::new(dt / 6.0, 0.0), &k4);
        next
    }
}

/// Right-hand side of the master equation at `rho`.
pub fn lindblad_rhs(rho: &QuantumState, model: &LindbladModel) -> Result<ComplexMatrix> {
    if rho.dim() != model.dim() {
        return Err(Error::Shape(format!("state dim {} vs model dim {}", rho.dim(), model.dim())));
    }
    Ok(Generator::new(model).apply(&rho.density_matrix()))
}

/// Fixed-step RK4 integration. Returns one sample per grid sample point,
/// each checked for validity (trace within 1e-8, hermitian, positive within
/// tolerance); the first failing sample aborts with its time.
pub fn integrate_master(rho0: &QuantumState, model: &LindbladModel, grid: &TimeGrid) -> Result<Vec<Sample>> {
    let mut samples = Vec::with_capacity(grid.n_samples());
    integrate_master_with(rho0, model, grid, |t, rho| {
        samples.push(Sample { t, state: rho });
        Ok(())
    })?;
    Ok(samples)
}

/// Streaming variant of [`integrate_master`]: `on_sample` receives each
/// validated sample instead of collecting them.
pub fn integrate_master_with(
    rho0: &QuantumState,
    model: &LindbladModel,
    grid: &TimeGrid,
    mut on_sample: impl FnMut(f64, QuantumState) -> Result<()>,
) -> Result<()> {
    if rho0.dim() != model.dim() {
        return Err(Error::Shape(format!("state dim {} vs model dim {}", rho0.dim(), model.dim())));
    }
    let gen = Generator::new(model);
    let dt = grid.dt();
    let mut rho = rho0.density_matrix().into_owned();
    for step in 0..=grid.n_steps {
        if step > 0 {
            rho = gen.rk4_step(&rho, dt);
        }
        if grid.is_sample(step) {
            let t = grid.time(step);
            let state = QuantumState::mixed_with_trace_tol(rho.clone(), tol::INTEGRATION_TRACE)
                .map_err(|e| Error::Integration { time: t, reason: e.to_string() })?;
            on_sample(t, state)?;
        }
    }
    Ok(())
}
