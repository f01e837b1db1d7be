//! Driven three-level emitter with a metastable shelf: the strong `g ↔ e`
//! transition fluoresces, a weak `e → s` decay shelves the emitter and
//! switches the fluorescence off until `s → g` returns it. Single emitters
//! show a random bright/dark telegraph signal.
//!
//! Basis order is `(g, e, s)`; the drive is in the rotating frame with a
//! real Rabi coupling. Channel order: 0 = `e → g` (emission, detected),
//! 1 = `e → s` (shelving), 2 = `s → g` (de-shelving).

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolution::{LindbladModel, TimeGrid};
use crate::hilbert::{ComplexMatrix, QuantumState};
use crate::stats::{mean_stderr, poisson_dispersion_test, DispersionTest};
use crate::trajectory::{run_trajectory_stream, TrajectoryOptions, TrajectoryRecord};

pub const GROUND: usize = 0;
pub const EXCITED: usize = 1;
pub const SHELF: usize = 2;

pub const EMISSION_CHANNEL: usize = 0;
pub const SHELVE_CHANNEL: usize = 1;
pub const DESHELVE_CHANNEL: usize = 2;

/// Smallest expected bright-bin count accepted by the telegraph analysis.
pub const MIN_BRIGHT_COUNTS_PER_BIN: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeLevelParams {
    pub rabi: f64,
    pub detuning: f64,
    pub gamma_strong: f64,
    pub gamma_shelve: f64,
    pub gamma_deshelve: f64,
}

impl ThreeLevelParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.rabi, self.detuning, self.gamma_strong, self.gamma_shelve, self.gamma_deshelve];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::Model("non-finite three-level parameter".into()));
        }
        if self.gamma_strong < 0.0 || self.gamma_shelve < 0.0 || self.gamma_deshelve < 0.0 {
            return Err(Error::Model("three-level rates must be non-negative".into()));
        }
        Ok(())
    }

    /// Non-fatal warnings, e.g. a shelving rate that is not small compared to
    /// the strong decay.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.gamma_shelve > 0.1 * self.gamma_strong {
            w.push(format!(
                "gamma_shelve = {} is not much smaller than gamma_strong = {}; dark/bright periods will not separate cleanly",
                self.gamma_shelve, self.gamma_strong
            ));
        }
        w
    }

    /// Steady-state excited population of the bright two-level manifold.
    pub fn bright_excited_population(&self) -> f64 {
        two_level_steady_excited(self.rabi, self.detuning, self.gamma_strong)
    }

    /// Photon emission rate while bright.
    pub fn bright_emission_rate(&self) -> f64 {
        self.gamma_strong * self.bright_excited_population()
    }

    /// `γ_shelve · ρ_ee` of the bright manifold.
    pub fn effective_shelving_rate(&self) -> f64 {
        self.gamma_shelve * self.bright_excited_population()
    }

    /// Long-run fraction of time spent shelved.
    pub fn expected_dark_fraction(&self) -> f64 {
        let on = self.effective_shelving_rate();
        if on + self.gamma_deshelve == 0.0 {
            return 0.0;
        }
        on / (on + self.gamma_deshelve)
    }
}

/// `ρ_ee = (Ω²/4) / (Δ² + γ²/4 + Ω²/2)` for a resonantly driven decaying
/// two-level system.
pub fn two_level_steady_excited(rabi: f64, detuning: f64, gamma: f64) -> f64 {
    let q = rabi * rabi / 4.0;
    let denom = detuning * detuning + gamma * gamma / 4.0 + 2.0 * q;
    if denom == 0.0 {
        0.0
    } else {
        q / denom
    }
}

pub fn three_level_model(params: &ThreeLevelParams) -> Result<LindbladModel> {
    params.validate()?;
    let half_rabi = Complex64::new(0.5 * params.rabi, 0.0);
    let mut h = ComplexMatrix::zeros(3, 3);
    h[(GROUND, EXCITED)] = half_rabi;
    h[(EXCITED, GROUND)] = half_rabi;
    h[(EXCITED, EXCITED)] = Complex64::new(params.detuning, 0.0);
    LindbladModel::new(
        h,
        vec![
            (ComplexMatrix::transition(3, GROUND, EXCITED), params.gamma_strong),
            (ComplexMatrix::transition(3, SHELF, EXCITED), params.gamma_shelve),
            (ComplexMatrix::transition(3, GROUND, SHELF), params.gamma_deshelve),
        ],
    )
}

#[derive(Debug, Clone, Copy)]
pub struct TelegraphSettings {
    /// Counting bin length.
    pub bin: f64,
    /// Bins with at most this many counts are dark.
    pub dark_threshold: u64,
    /// Dark runs shorter than this many bins are ignored.
    pub min_dark_bins: usize,
    /// Dark periods must start at least this long before the end of the
    /// record. With a margin of several mean dark durations, dropping the
    /// periods still open at the end no longer favours short ones.
    pub end_margin: f64,
}

impl TelegraphSettings {
    pub fn new(bin: f64) -> Self {
        Self { bin, dark_threshold: 0, min_dark_bins: 1, end_margin: 0.0 }
    }
}

/// Summary of a set of period durations.
#[derive(Debug, Clone, Default)]
pub struct Durations {
    pub values: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
}

impl Durations {
    fn from_values(values: Vec<f64>) -> Self {
        let (mean, stderr) = if values.is_empty() { (f64::NAN, f64::NAN) } else { mean_stderr(&values) };
        Self { values, mean, stderr }
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryTelegraph {
    pub stream: u64,
    pub counts: Vec<u64>,
    pub dark: Durations,
    pub bright: Durations,
    /// Fraction of bins classified dark (runs of at least `min_dark_bins`).
    pub dark_fraction: f64,
    /// Variance over mean of this trajectory's bin counts.
    pub fano: f64,
    /// Dark runs of two or more bins, counted before any length filtering.
    pub long_dark_runs: usize,
}

#[derive(Debug, Clone)]
pub struct TelegraphStats {
    pub settings: TelegraphSettings,
    pub expected_bright_counts: f64,
    pub per_trajectory: Vec<TrajectoryTelegraph>,
    pub dark: Durations,
    pub bright: Durations,
    pub dark_fraction_mean: f64,
    pub dark_fraction_stderr: f64,
    /// Bin counts summed over trajectories.
    pub pooled_counts: Vec<u64>,
    pub warnings: Vec<String>,
}

fn bin_counts(emissions: &[f64], t0: f64, bin: f64, n_bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n_bins];
    for &t in emissions {
        // Emissions are stamped at step ends; the bin is (t0 + k·bin, t0 + (k+1)·bin].
        let k = ((t - t0) / bin).ceil() as isize - 1;
        if k >= 0 && (k as usize) < n_bins {
            counts[k as usize] += 1;
        }
    }
    counts
}

fn analyse_trajectory(rec: &TrajectoryRecord, settings: &TelegraphSettings) -> TrajectoryTelegraph {
    let t0 = rec.grid.t_start;
    let n_bins = ((rec.grid.t_end - t0) / settings.bin).floor() as usize;
    let emissions: Vec<f64> = rec.jumps_on(EMISSION_CHANNEL).collect();
    let counts = bin_counts(&emissions, t0, settings.bin, n_bins);
    let is_dark: Vec<bool> = counts.iter().map(|&c| c <= settings.dark_threshold).collect();

    // Maximal dark runs [start, end) in bin indices.
    let mut runs = Vec::new();
    let mut k = 0;
    while k < n_bins {
        if is_dark[k] {
            let start = k;
            while k < n_bins && is_dark[k] {
                k += 1;
            }
            runs.push((start, k));
        } else {
            k += 1;
        }
    }
    let long_dark_runs = runs.iter().filter(|(a, b)| b - a >= 2).count();
    runs.retain(|(a, b)| b - a >= settings.min_dark_bins.max(1));
    let dark_bins: usize = runs.iter().map(|(a, b)| b - a).sum();

    let bin_start = |k: usize| t0 + k as f64 * settings.bin;
    let last_before = |t: f64| emissions.iter().rev().find(|&&e| e <= t).copied();
    let first_after = |t: f64| emissions.iter().find(|&&e| e > t).copied();

    // A dark period spans from the last emission before the run to the first
    // emission after it; runs touching either end of the record are censored.
    let latest_start = rec.grid.t_end - settings.end_margin;
    let mut dark = Vec::new();
    let mut bounds = Vec::new();
    for &(a, b) in &runs {
        if a == 0 || b == n_bins {
            continue;
        }
        if let (Some(s), Some(e)) = (last_before(bin_start(a)), first_after(bin_start(b))) {
            bounds.push((s, e));
            if s <= latest_start {
                dark.push(e - s);
            }
        }
    }
    let bright = bounds.windows(2).map(|w| w[1].0 - w[0].1).filter(|d| *d > 0.0).collect();

    let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let (mean, _) = mean_stderr(&xs);
    let fano = if mean > 0.0 { crate::stats::variance(&xs) / mean } else { f64::NAN };

    TrajectoryTelegraph {
        stream: rec.stream,
        counts,
        dark: Durations::from_values(dark),
        bright: Durations::from_values(bright),
        dark_fraction: if n_bins > 0 { dark_bins as f64 / n_bins as f64 } else { 0.0 },
        fano,
        long_dark_runs,
    }
}

/// Runs `n_traj` emitter trajectories from `|g⟩`, bins the detected
/// emissions and extracts dark/bright period statistics.
pub fn fluorescence_telegraph(
    params: &ThreeLevelParams,
    grid: &TimeGrid,
    n_traj: usize,
    seed: u64,
    settings: TelegraphSettings,
) -> Result<TelegraphStats> {
    let model = three_level_model(params)?;
    if n_traj == 0 {
        return Err(Error::Configuration("n_traj must be at least 1".into()));
    }
    let expected_bright_counts = params.bright_emission_rate() * settings.bin;
    if !(expected_bright_counts >= MIN_BRIGHT_COUNTS_PER_BIN) {
        return Err(Error::Configuration(format!(
            "bin {} too small: expected bright-bin count {expected_bright_counts:.3} < {MIN_BRIGHT_COUNTS_PER_BIN}",
            settings.bin
        )));
    }
    if settings.bin > grid.t_end - grid.t_start {
        return Err(Error::Configuration("bin longer than the observation window".into()));
    }
    let psi0 = QuantumState::basis(3, GROUND)?;
    let options = TrajectoryOptions { record_snapshots: false };
    let per_trajectory: Vec<TrajectoryTelegraph> = (0..n_traj as u64)
        .into_par_iter()
        .map(|k| {
            let rec = run_trajectory_stream(&psi0, &model, grid, seed, k, options)?;
            Ok(analyse_trajectory(&rec, &settings))
        })
        .collect::<Result<_>>()?;

    let dark = Durations::from_values(per_trajectory.iter().flat_map(|t| t.dark.values.iter().copied()).collect());
    let bright = Durations::from_values(per_trajectory.iter().flat_map(|t| t.bright.values.iter().copied()).collect());
    let fractions: Vec<f64> = per_trajectory.iter().map(|t| t.dark_fraction).collect();
    let (dark_fraction_mean, dark_fraction_stderr) = mean_stderr(&fractions);
    let n_bins = per_trajectory[0].counts.len();
    let mut pooled_counts = vec![0u64; n_bins];
    for t in &per_trajectory {
        for (p, c) in pooled_counts.iter_mut().zip(&t.counts) {
            *p += c;
        }
    }
    Ok(TelegraphStats {
        settings,
        expected_bright_counts,
        per_trajectory,
        dark,
        bright,
        dark_fraction_mean,
        dark_fraction_stderr,
        pooled_counts,
        warnings: params.warnings(),
    })
}

#[derive(Debug, Clone)]
pub struct EnsembleFluorescence {
    pub n_traj: usize,
    pub bin: f64,
    /// Emissions of all trajectories per bin after the burn-in.
    pub pooled_counts: Vec<u64>,
    pub dispersion: DispersionTest,
    /// Mean emissions per trajectory per bin.
    pub per_emitter_mean: f64,
}

/// Total fluorescence of `n_traj` independent emitters, counted in bins of
/// length `bin` after `burn_in`.
///
/// Emitters start from the stationary bright/dark split: the first
/// `round(n_traj · dark_fraction)` streams start shelved, the rest in `|g⟩`.
/// When each emitter contributes much less than one count per bin the summed
/// stream approaches a Poisson process, hiding the single-emitter telegraph.
pub fn ensemble_fluorescence(
    params: &ThreeLevelParams,
    grid: &TimeGrid,
    n_traj: usize,
    seed: u64,
    bin: f64,
    burn_in: f64,
) -> Result<EnsembleFluorescence> {
    let model = three_level_model(params)?;
    if n_traj == 0 {
        return Err(Error::Configuration("n_traj must be at least 1".into()));
    }
    let t0 = grid.t_start + burn_in;
    if !(bin > 0.0) || t0 + bin > grid.t_end {
        return Err(Error::Configuration("ensemble fluorescence window holds no complete bin".into()));
    }
    let n_bins = ((grid.t_end - t0) / bin).floor() as usize;
    let n_shelved = (n_traj as f64 * params.expected_dark_fraction()).round() as usize;
    let options = TrajectoryOptions { record_snapshots: false };
    let per: Vec<Vec<u64>> = (0..n_traj)
        .into_par_iter()
        .map(|k| {
            let psi0 = QuantumState::basis(3, if k < n_shelved { SHELF } else { GROUND })?;
            let rec = run_trajectory_stream(&psi0, &model, grid, seed, k as u64, options)?;
            let emissions: Vec<f64> = rec.jumps_on(EMISSION_CHANNEL).collect();
            Ok(bin_counts(&emissions, t0, bin, n_bins))
        })
        .collect::<Result<_>>()?;
    let mut pooled_counts = vec![0u64; n_bins];
    for counts in &per {
        for (p, c) in pooled_counts.iter_mut().zip(counts) {
            *p += c;
        }
    }
    let dispersion = poisson_dispersion_test(&pooled_counts)
        .ok_or_else(|| Error::Configuration("no emissions in the ensemble window".into()))?;
    Ok(EnsembleFluorescence {
        n_traj,
        bin,
        per_emitter_mean: dispersion.mean / n_traj as f64,
        pooled_counts,
        dispersion,
    })
}
