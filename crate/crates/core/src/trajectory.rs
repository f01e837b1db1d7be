//! Quantum-jump (Monte Carlo wave-function) unraveling of Lindblad dynamics.
//!
//! Each step of length `dt` from state `ψ`:
//!
//! 1. draw `u ~ U[0,1)`;
//! 2. `dp_j = dt γ_j ‖L_j ψ‖²`, `dp = Σ_j dp_j`; `dp > 0.1` is a
//!    configuration error (step too coarse);
//! 3. if `u < dp`: draw `v ~ U[0,1)`, pick the first channel `j` with
//!    `v·dp < Σ_{i≤j} dp_i`, set `ψ ← L_j ψ / ‖L_j ψ‖` and record a jump at
//!    the end of the step;
//! 4. otherwise propagate `dψ/dt = -i H_eff ψ` over `dt` with one RK4 step,
//!    `H_eff = H - (i/2) Σ_j γ_j L_j† L_j`, and renormalize.
//!
//! Random numbers come from ChaCha20 seeded with `seed` on stream `stream`
//! (the trajectory index), so each trajectory is reproducible on its own and
//! trajectories can run in any order.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolution::{integrate_master, LindbladModel, TimeGrid};
use crate::hilbert::{eig_hermitian, norm_sqr, ComplexMatrix, QuantumState};

/// Per-step jump probability above which a run is rejected.
pub const MAX_STEP_JUMP_PROBABILITY: f64 = 0.1;

const PARALLEL_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream: u64,
    pub dim: usize,
    pub grid: TimeGrid,
    pub jump_times: Vec<f64>,
    pub jump_channels: Vec<usize>,
    /// One normalized state per grid sample, or empty when snapshots were
    /// not requested.
    pub snapshots: Vec<Vec<Complex64>>,
}

impl TrajectoryRecord {
    pub fn n_jumps(&self) -> usize {
        self.jump_times.len()
    }

    /// Jump times on the given channel.
    pub fn jumps_on(&self, channel: usize) -> impl Iterator<Item = f64> + '_ {
        self.jump_times.iter().zip(&self.jump_channels).filter(move |(_, &c)| c == channel).map(|(&t, _)| t)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrajectoryOptions {
    pub record_snapshots: bool,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self { record_snapshots: true }
    }
}

/// Precomputed operators for stepping.
struct Stepper {
    h_eff: ComplexMatrix,
    jumps: Vec<(ComplexMatrix, f64)>,
    dt: f64,
}

impl Stepper {
    fn new(model: &LindbladModel, dt: f64) -> Self {
        Self {
            h_eff: model.effective_hamiltonian(),
            jumps: model.channels().iter().map(|c| (c.op.clone(), c.rate)).collect(),
            dt,
        }
    }

    fn drift(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mi = Complex64::new(0.0, -1.0);
        let f = |v: &[Complex64]| -> Vec<Complex64> {
            self.h_eff.apply(v).expect("dims checked").into_iter().map(|z| z * mi).collect()
        };
        let add = |a: &[Complex64], b: &[Complex64], s: f64| -> Vec<Complex64> {
            a.iter().zip(b).map(|(x, y)| x + y * s).collect()
        };
        let dt = self.dt;
        let k1 = f(psi);
        let k2 = f(&add(psi, &k1, 0.5 * dt));
        let k3 = f(&add(psi, &k2, 0.5 * dt));
        let k4 = f(&add(psi, &k3, dt));
        psi.iter().enumerate().map(|(i, &p)| p + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0)).collect()
    }
}

fn normalize(v: &mut [Complex64]) -> f64 {
    let n = norm_sqr(v).sqrt();
    v.iter_mut().for_each(|z| *z /= n);
    n
}

/// Runs trajectory `stream` of the ensemble keyed by `seed`.
pub fn run_trajectory_stream(
    psi0: &QuantumState,
    model: &LindbladModel,
    grid: &TimeGrid,
    seed: u64,
    stream: u64,
    options: TrajectoryOptions,
) -> Result<TrajectoryRecord> {
    let Some(psi0) = psi0.amplitudes() else {
        return Err(Error::Domain("trajectories need a pure initial state".into()));
    };
    if psi0.len() != model.dim() {
        return Err(Error::Shape(format!("state dim {} vs model dim {}", psi0.len(), model.dim())));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let stepper = Stepper::new(model, grid.dt());
    let mut psi = psi0.to_vec();
    let mut jump_times = Vec::new();
    let mut jump_channels = Vec::new();
    let mut snapshots = Vec::new();
    if options.record_snapshots {
        snapshots.reserve(grid.n_samples());
        snapshots.push(psi.clone());
    }
    let mut dps = vec![0.0; stepper.jumps.len()];

    for step in 1..=grid.n_steps {
        let u: f64 = rng.random();
        let mut dp = 0.0;
        let mut jumped_states = Vec::with_capacity(stepper.jumps.len());
        for (j, (l, rate)) in stepper.jumps.iter().enumerate() {
            let lpsi = l.apply(&psi)?;
            dps[j] = stepper.dt * rate * norm_sqr(&lpsi);
            dp += dps[j];
            jumped_states.push(lpsi);
        }
        if dp > MAX_STEP_JUMP_PROBABILITY {
            return Err(Error::Configuration(format!(
                "step too coarse: jump probability {dp:.3} per step at t = {} exceeds {}",
                grid.time(step - 1),
                MAX_STEP_JUMP_PROBABILITY
            )));
        }
        if u < dp {
            let v: f64 = rng.random();
            let target = v * dp;
            let mut acc = 0.0;
            let mut channel = dps.len() - 1;
            for (j, &p) in dps.iter().enumerate() {
                acc += p;
                if target < acc {
                    channel = j;
                    break;
                }
            }
            psi = std::mem::take(&mut jumped_states[channel]);
            normalize(&mut psi);
            jump_times.push(grid.time(step));
            jump_channels.push(channel);
        } else {
            psi = stepper.drift(&psi);
            let n = normalize(&mut psi);
            if !n.is_finite() || n == 0.0 {
                return Err(Error::Numerical(format!("state norm collapsed at t = {}", grid.time(step))));
            }
        }
        if options.record_snapshots && grid.is_sample(step) {
            snapshots.push(psi.clone());
        }
    }

    Ok(TrajectoryRecord { seed, stream, dim: psi.len(), grid: *grid, jump_times, jump_channels, snapshots })
}

/// Single trajectory on stream 0 with snapshots.
pub fn run_trajectory(
    psi0: &QuantumState,
    model: &LindbladModel,
    grid: &TimeGrid,
    seed: u64,
) -> Result<TrajectoryRecord> {
    run_trajectory_stream(psi0, model, grid, seed, 0, TrajectoryOptions::default())
}

/// Streams `0..n_traj` of `seed`, run in parallel, returned in stream order.
pub fn run_ensemble(
    psi0: &QuantumState,
    model: &LindbladModel,
    grid: &TimeGrid,
    n_traj: usize,
    seed: u64,
    options: TrajectoryOptions,
) -> Result<Vec<TrajectoryRecord>> {
    (0..n_traj as u64).into_par_iter().map(|k| run_trajectory_stream(psi0, model, grid, seed, k, options)).collect()
}

#[derive(Debug, Clone)]
pub struct EnsembleEstimate {
    pub n_traj: usize,
    pub times: Vec<f64>,
    /// `(1/n) Σ_i |Ψ_i(t)><Ψ_i(t)|` at each sample.
    pub mean_state: Vec<QuantumState>,
    /// Standard error of each computational-basis population at each sample.
    pub population_stderr: Vec<Vec<f64>>,
}

/// Running projector sums plus Welford population moments. Merging follows
/// Chan's pairwise update so chunked parallel runs reduce deterministically.
#[derive(Debug, Clone)]
struct Accumulator {
    n: usize,
    grid: TimeGrid,
    dim: usize,
    proj_sum: Vec<ComplexMatrix>,
    pop_mean: Vec<Vec<f64>>,
    pop_m2: Vec<Vec<f64>>,
}

impl Accumulator {
    fn new(grid: TimeGrid, dim: usize) -> Self {
        let ns = grid.n_samples();
        Self {
            n: 0,
            grid,
            dim,
            proj_sum: vec![ComplexMatrix::zeros(dim, dim); ns],
            pop_mean: vec![vec![0.0; dim]; ns],
            pop_m2: vec![vec![0.0; dim]; ns],
        }
    }

    fn check(&self, rec: &TrajectoryRecord) -> Result<()> {
        if rec.grid != self.grid || rec.dim != self.dim {
            return Err(Error::Shape(format!(
                "record (seed {}, stream {}) has a different grid or dimension",
                rec.seed, rec.stream
            )));
        }
        if rec.snapshots.len() != self.grid.n_samples() {
            return Err(Error::Shape(format!(
                "record (seed {}, stream {}) has {} snapshots, expected {}",
                rec.seed,
                rec.stream,
                rec.snapshots.len(),
                self.grid.n_samples()
            )));
        }
        Ok(())
    }

    fn add(&mut self, rec: &TrajectoryRecord) -> Result<()> {
        self.check(rec)?;
        self.n += 1;
        let n = self.n as f64;
        for (s, psi) in rec.snapshots.iter().enumerate() {
            self.proj_sum[s].axpy(Complex64::new(1.0, 0.0), &ComplexMatrix::outer(psi, psi));
            for (i, z) in psi.iter().enumerate() {
                let x = z.norm_sqr();
                let delta = x - self.pop_mean[s][i];
                self.pop_mean[s][i] += delta / n;
                self.pop_m2[s][i] += delta * (x - self.pop_mean[s][i]);
            }
        }
        Ok(())
    }

    fn merge(mut self, other: Self) -> Self {
        if other.n == 0 {
            return self;
        }
        if self.n == 0 {
            return other;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for s in 0..self.proj_sum.len() {
            self.proj_sum[s].axpy(Complex64::new(1.0, 0.0), &other.proj_sum[s]);
            for i in 0..self.dim {
                let delta = other.pop_mean[s][i] - self.pop_mean[s][i];
                self.pop_mean[s][i] += delta * nb / n;
                self.pop_m2[s][i] += other.pop_m2[s][i] + delta * delta * na * nb / n;
            }
        }
        self.n += other.n;
        self
    }

    fn finish(self) -> Result<EnsembleEstimate> {
        if self.n == 0 {
            return Err(Error::Shape("cannot aggregate an empty ensemble".into()));
        }
        let n = self.n as f64;
        let times = self.grid.sample_times();
        let mut mean_state = Vec::with_capacity(times.len());
        for (sum, &t) in self.proj_sum.into_iter().zip(&times) {
            let rho = sum.scale_real(1.0 / n).hermitian_part();
            mean_state.push(
                QuantumState::mixed(rho)
                    .map_err(|e| Error::Integration { time: t, reason: format!("ensemble mean invalid: {e}") })?,
            );
        }
        let population_stderr = self
            .pop_m2
            .iter()
            .map(|m2| m2.iter().map(|&m| if self.n > 1 { (m / (n - 1.0) / n).sqrt() } else { 0.0 }).collect())
            .collect();
        Ok(EnsembleEstimate { n_traj: self.n, times, mean_state, population_stderr })
    }
}

/// Ensemble mean of snapshot projectors and population standard errors.
pub fn aggregate(trajs: &[TrajectoryRecord]) -> Result<EnsembleEstimate> {
    let first = trajs.first().ok_or_else(|| Error::Shape("no trajectories to aggregate".into()))?;
    let mut acc = Accumulator::new(first.grid, first.dim);
    for rec in trajs {
        acc.add(rec)?;
    }
    acc.finish()
}

/// Runs `n_traj` trajectories in parallel chunks and aggregates without
/// keeping every record in memory. Chunks are reduced in stream order.
pub fn run_and_aggregate(
    psi0: &QuantumState,
    model: &LindbladModel,
    grid: &TimeGrid,
    n_traj: usize,
    seed: u64,
) -> Result<EnsembleEstimate> {
    if n_traj == 0 {
        return Err(Error::Configuration("n_traj must be at least 1".into()));
    }
    let chunks: Vec<(u64, u64)> = (0..n_traj as u64)
        .step_by(PARALLEL_CHUNK)
        .map(|start| (start, (start + PARALLEL_CHUNK as u64).min(n_traj as u64)))
        .collect();
    let partials: Vec<Accumulator> = chunks
        .par_iter()
        .map(|&(a, b)| {
            let mut acc = Accumulator::new(*grid, model.dim());
            for k in a..b {
                let rec = run_trajectory_stream(psi0, model, grid, seed, k, TrajectoryOptions::default())?;
                acc.add(&rec)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    partials.into_iter().fold(Accumulator::new(*grid, model.dim()), Accumulator::merge).finish()
}

/// `½ ‖a − b‖₁`
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let diff = (a - b).hermitian_part();
    Ok(0.5 * eig_hermitian(&diff)?.values.iter().map(|l| l.abs()).sum::<f64>())
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub n_traj: usize,
    pub times: Vec<f64>,
    pub trace_distances: Vec<f64>,
    /// `5/√n_traj`
    pub threshold: f64,
    pub flags: Vec<bool>,
    pub max_trace_distance: f64,
    pub ensemble: EnsembleEstimate,
}

impl EquivalenceReport {
    pub fn flagged(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

/// Compares the trajectory average with the master-equation solution on the
/// same grid.
pub fn unraveling_equivalence_report(
    model: &LindbladModel,
    psi0: &QuantumState,
    grid: &TimeGrid,
    n_traj: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    let ensemble = run_and_aggregate(psi0, model, grid, n_traj, seed)?;
    let exact = integrate_master(psi0, model, grid)?;
    let threshold = 5.0 / (n_traj as f64).sqrt();
    let trace_distances = ensemble
        .mean_state
        .iter()
        .zip(&exact)
        .map(|(mc, me)| trace_distance(&mc.density_matrix(), &me.state.density_matrix()))
        .collect::<Result<Vec<_>>>()?;
    let flags = trace_distances.iter().map(|&d| d > threshold).collect();
    let max_trace_distance = trace_distances.iter().copied().fold(0.0, f64::max);
    Ok(EquivalenceReport {
        n_traj,
        times: ensemble.times.clone(),
        trace_distances,
        threshold,
        flags,
        max_trace_distance,
        ensemble,
    })
}

const RECORD_MAGIC: &str = "# decohere trajectory record v1";

/// Writes a record in the line-oriented text format:
///
/// ```text
/// # decohere trajectory record v1
/// seed <u64>
/// stream <u64>
/// dim <N>
/// grid <t_start> <t_end> <n_steps> <sample_every>
/// jumps <r>
/// <time> <channel>                      (r lines)
/// snapshots <s>
/// <t> <re_0> <im_0> ... <re_N-1> <im_N-1>   (s lines)
/// end
/// ```
///
/// Floats carry 17 significant digits so the text round-trips exactly.
pub fn write_record(rec: &TrajectoryRecord, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{RECORD_MAGIC}")?;
    writeln!(out, "seed {}", rec.seed)?;
    writeln!(out, "stream {}", rec.stream)?;
    writeln!(out, "dim {}", rec.dim)?;
    let g = &rec.grid;
    writeln!(out, "grid {:.16e} {:.16e} {} {}", g.t_start, g.t_end, g.n_steps, g.sample_every)?;
    writeln!(out, "jumps {}", rec.jump_times.len())?;
    for (t, c) in rec.jump_times.iter().zip(&rec.jump_channels) {
        writeln!(out, "{t:.16e} {c}")?;
    }
    writeln!(out, "snapshots {}", rec.snapshots.len())?;
    let times = g.sample_times();
    for (psi, t) in rec.snapshots.iter().zip(&times) {
        write!(out, "{t:.16e}")?;
        for z in psi {
            write!(out, " {:.16e} {:.16e}", z.re, z.im)?;
        }
        writeln!(out)?;
    }
    writeln!(out, "end")
}

/// Reads one record; `Ok(None)` at end of input.
pub fn read_record(input: &mut impl BufRead) -> Result<Option<TrajectoryRecord>> {
    let mut lines = LineReader { input, line_no: 0 };
    let Some(magic) = lines.next_line()? else {
        return Ok(None);
    };
    if magic != RECORD_MAGIC {
        return Err(lines.err(format!("expected record header, got {magic:?}")));
    }
    let seed = lines.keyed("seed")?.parse_one::<u64>(&lines)?;
    let stream = lines.keyed("stream")?.parse_one::<u64>(&lines)?;
    let dim = lines.keyed("dim")?.parse_one::<usize>(&lines)?;
    let g = lines.keyed("grid")?;
    let parts: Vec<&str> = g.0.split_whitespace().collect();
    if parts.len() != 4 {
        return Err(lines.err("grid needs 4 fields".into()));
    }
    let grid =
        TimeGrid::new(lines.parse(parts[0])?, lines.parse(parts[1])?, lines.parse(parts[2])?, lines.parse(parts[3])?)?;
    let n_jumps = lines.keyed("jumps")?.parse_one::<usize>(&lines)?;
    let mut jump_times = Vec::with_capacity(n_jumps);
    let mut jump_channels = Vec::with_capacity(n_jumps);
    for _ in 0..n_jumps {
        let line = lines.require()?;
        let mut it = line.split_whitespace();
        let (Some(t), Some(c), None) = (it.next(), it.next(), it.next()) else {
            return Err(lines.err("jump line needs <time> <channel>".into()));
        };
        jump_times.push(lines.parse(t)?);
        jump_channels.push(lines.parse(c)?);
    }
    if jump_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(lines.err("jump times must be strictly increasing".into()));
    }
    let n_snap = lines.keyed("snapshots")?.parse_one::<usize>(&lines)?;
    let mut snapshots = Vec::with_capacity(n_snap);
    for _ in 0..n_snap {
        let line = lines.require()?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 1 + 2 * dim {
            return Err(lines.err(format!("snapshot line needs {} fields", 1 + 2 * dim)));
        }
        let psi = fields[1..]
            .chunks_exact(2)
            .map(|p| Ok(Complex64::new(lines.parse(p[0])?, lines.parse(p[1])?)))
            .collect::<Result<Vec<_>>>()?;
        snapshots.push(psi);
    }
    let end = lines.require()?;
    if end != "end" {
        return Err(lines.err(format!("expected 'end', got {end:?}")));
    }
    Ok(Some(TrajectoryRecord { seed, stream, dim, grid, jump_times, jump_channels, snapshots }))
}

struct LineReader<'a, R> {
    input: &'a mut R,
    line_no: usize,
}

struct Keyed(String);

impl Keyed {
    fn parse_one<T: std::str::FromStr>(&self, r: &LineReader<'_, impl BufRead>) -> Result<T> {
        r.parse(self.0.trim())
    }
}

impl<R: BufRead> LineReader<'_, R> {
    fn err(&self, msg: String) -> Error {
        Error::Shape(format!("trajectory record line {}: {msg}", self.line_no))
    }

    fn next_line(&mut self) -> Result<Option<String>> {
        let mut buf = String::new();
        loop {
            buf.clear();
            let n = self.input.read_line(&mut buf).map_err(|e| self.err(e.to_string()))?;
            if n == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let line = buf.trim_end_matches(['\n', '\r']);
            if !line.trim().is_empty() {
                return Ok(Some(line.to_string()));
            }
        }
    }

    fn require(&mut self) -> Result<String> {
        self.next_line()?.ok_or_else(|| self.err("unexpected end of input".into()))
    }

    fn keyed(&mut self, key: &str) -> Result<Keyed> {
        let line = self.require()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(Keyed(rest.to_string())),
            _ => Err(self.err(format!("expected '{key} ...', got {line:?}"))),
        }
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("cannot parse {s:?}")))
    }
}
