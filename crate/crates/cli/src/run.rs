//! Scenario dispatch: each scenario turns a validated configuration into a
//! table, a list of consistency checks and a few derived quantities.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use decohere_core::evolution::{integrate_master, LindbladModel, TimeGrid};
use decohere_core::hilbert::{ComplexMatrix, QuantumState};
use decohere_core::models::central_spin::{
    central_spin_coherence, central_spin_coherence_brute_force, central_spin_decoherence_time, spin_echo_coherence,
    spin_echo_coherence_brute_force,
};
use decohere_core::models::disorder::{
    disorder_averaged_state, disorder_gamma, disorder_gamma_with, disorder_monte_carlo, lorentzian_t2, AverageMethod,
    DisorderSpec, GammaMethod, Level,
};
use decohere_core::models::oscillator::damped_osc_scenario;
use decohere_core::models::three_level::{fluorescence_telegraph, three_level_model, TelegraphSettings};
use decohere_core::trajectory::unraveling_equivalence_report;
use decohere_core::Complex64;
use thiserror::Error;

use crate::config::{
    emit, to_table, CentralSpinConfig, DisorderConfig, Estimator, OscillatorConfig, Params, ScenarioConfig,
    SpinEchoConfig, TelegraphConfig, UnravelingConfig, UnravelingSystem,
};
use crate::output::{sha256_hex, Cell, Check, RunManifest, Table};

/// Closed-form vs brute-force agreement required of the central-spin routes.
const ORACLE_TOL: f64 = 1e-10;
/// Closed-form vs quadrature agreement for disorder averages.
const QUADRATURE_TOL: f64 = 1e-8;
/// Smallest `|γ|` at which closed form and quadrature are compared.
const QUADRATURE_FLOOR: f64 = 1e-4;
const CONSERVATION_TOL: f64 = 1e-6;
const MERGE_VISIBILITY: f64 = 0.98;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{scenario}: {source}")]
    Model {
        scenario: String,
        #[source]
        source: decohere_core::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// Everything a scenario produces before it is written out.
#[derive(Debug, Clone, Default)]
pub struct ScenarioOutput {
    pub table: Table,
    pub checks: Vec<Check>,
    pub derived: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

type ModelResult<T> = decohere_core::Result<T>;

/// Runs the scenario without touching the file system.
pub fn execute(config: &ScenarioConfig) -> Result<ScenarioOutput, RunError> {
    let grid = &config.grid;
    let result = match &config.params {
        Params::CentralSpin(p) => central_spin(p, grid, config.estimator),
        Params::SpinEcho(p) => spin_echo(p, grid, config.estimator),
        Params::Disorder(p) => disorder(p, grid, config.estimator),
        Params::Telegraph(p) => telegraph(p, grid, config.estimator),
        Params::Oscillator(p) => oscillator(p, grid),
        Params::Unraveling(p) => unraveling(p, grid, config.estimator),
    };
    result.map_err(|source| RunError::Model { scenario: config.scenario.name().into(), source })
}

/// Runs the scenario, writes the CSV and the manifest, and returns the
/// manifest.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunManifest, RunError> {
    // Fail on unwritable outputs before spending time on the run.
    for path in [&config.output.path, &config.output.manifest] {
        prepare(path)?;
    }
    let started = Instant::now();
    let out = execute(config)?;
    let canonical = emit(config);
    let hash = sha256_hex(&canonical);

    let comment =
        format!("decohere {} scenario={} config_sha256={hash}", env!("CARGO_PKG_VERSION"), config.scenario.name());
    let mut csv = Vec::new();
    out.table
        .write_csv(&comment, &mut csv)
        .map_err(|source| RunError::Csv { path: config.output.path.clone(), source })?;
    write(&config.output.path, &csv)?;

    let failed = out.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect::<Vec<_>>();
    let manifest = RunManifest {
        toolkit: "decohere".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: config.scenario.name().into(),
        config: serde_json::to_value(to_table(config)).expect("toml tables convert to json"),
        config_sha256: hash,
        derived: out.derived,
        outputs: BTreeMap::from([("csv".to_string(), config.output.path.display().to_string())]),
        wall_time_s: started.elapsed().as_secs_f64(),
        passed: failed.is_empty(),
        failed,
        checks: out.checks,
        warnings: out.warnings,
    };
    let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    json.push(b'\n');
    write(&config.output.manifest, &json)?;
    Ok(manifest)
}

fn prepare(path: &Path) -> Result<(), RunError> {
    let io = |source| RunError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    Ok(())
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    fs::write(path, bytes).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |m, x| if x.is_nan() || m.is_nan() { f64::NAN } else { m.max(x) })
}

fn coherence_table(times: &[f64], values: &[Complex64], last: &str, extra: impl Fn(f64) -> f64) -> Table {
    let mut table = Table::new(["t", "re_coherence", "im_coherence", "abs_coherence", last]);
    for (&t, z) in times.iter().zip(values) {
        table.push(vec![t.into(), z.re.into(), z.im.into(), z.norm().into(), extra(t).into()]);
    }
    table
}

// t, Re ρ₁₂, Im ρ₁₂, |ρ₁₂| and the short-time Gaussian envelope
// |c₁c₂*| exp(−t²/(8 t_D²)).
fn central_spin(cfg: &CentralSpinConfig, grid: &TimeGrid, estimator: Estimator) -> ModelResult<ScenarioOutput> {
    let params = cfg.model()?;
    let times = grid.sample_times();
    let c0 = params.initial_coherence().norm();
    let mut out = ScenarioOutput::default();
    let t_d = central_spin_decoherence_time(&params).ok();
    match t_d {
        Some(t_d) => {
            out.derived.insert("t_D".into(), t_d);
        }
        None => out.warnings.push("all couplings vanish; t_D is undefined and the envelope is flat".into()),
    }
    out.derived.insert("initial_abs_coherence".into(), c0);

    let closed: Vec<Complex64> = times.iter().map(|&t| central_spin_coherence(&params, t)).collect();
    let values = match estimator {
        Estimator::MasterEquation => {
            let brute = central_spin_coherence_brute_force(&params, &times)?;
            let dev = max_of(brute.iter().zip(&closed).map(|(a, b)| (a - b).norm()));
            out.checks.push(Check::at_most(
                "brute_force_matches_closed_form",
                dev,
                ORACLE_TOL,
                format!("max |ρ₁₂ − closed form| over {} times", times.len()),
            ));
            brute
        }
        _ => closed,
    };
    let excess = max_of(values.iter().map(|z| z.norm() - c0));
    out.checks.push(Check::at_most("coherence_bounded_by_initial", excess, 1e-12, "max (|ρ₁₂(t)| − |c₁c₂*|)"));
    out.table = coherence_table(&times, &values, "envelope", |t| match t_d {
        Some(t_d) => c0 * (-t * t / (8.0 * t_d * t_d)).exp(),
        None => c0,
    });
    Ok(out)
}

fn spin_echo(cfg: &SpinEchoConfig, grid: &TimeGrid, estimator: Estimator) -> ModelResult<ScenarioOutput> {
    let params = cfg.spin.model()?;
    let t_e = cfg.t_echo;
    let times = grid.sample_times();
    let c0 = params.initial_coherence().norm();
    let mut out = ScenarioOutput::default();
    if let Ok(t_d) = central_spin_decoherence_time(&params) {
        out.derived.insert("t_D".into(), t_d);
        out.derived.insert("t_echo_over_t_D".into(), t_e / t_d);
    }
    out.derived.insert("revival_time".into(), 2.0 * t_e);

    let closed = times.iter().map(|&t| spin_echo_coherence(&params, t_e, t)).collect::<ModelResult<Vec<_>>>()?;
    let (values, revival) = match estimator {
        Estimator::MasterEquation => {
            let brute = times
                .iter()
                .map(|&t| spin_echo_coherence_brute_force(&params, t_e, t))
                .collect::<ModelResult<Vec<_>>>()?;
            let dev = max_of(brute.iter().zip(&closed).map(|(a, b)| (a - b).norm()));
            out.checks.push(Check::at_most(
                "brute_force_matches_closed_form",
                dev,
                ORACLE_TOL,
                format!("max |ρ₁₂ − closed form| over {} times", times.len()),
            ));
            (brute, spin_echo_coherence_brute_force(&params, t_e, 2.0 * t_e)?)
        }
        _ => (closed, spin_echo_coherence(&params, t_e, 2.0 * t_e)?),
    };
    out.checks.push(Check::at_most(
        "echo_revival",
        (revival.norm() - c0).abs(),
        ORACLE_TOL,
        format!("||ρ₁₂(2 t_echo)| − |c₁c₂*|| with |ρ₁₂(2 t_echo)| = {:.12}", revival.norm()),
    ));
    out.table = coherence_table(&times, &values, "free_abs_coherence", |t| central_spin_coherence(&params, t).norm());
    Ok(out)
}

fn disorder_spec(cfg: &DisorderConfig) -> ModelResult<DisorderSpec> {
    let levels = cfg.energies.iter().zip(&cfg.slopes).map(|(&energy, &slope)| Level { energy, slope }).collect();
    DisorderSpec::new(cfg.distribution, levels, ComplexMatrix::outer(&cfg.amplitudes, &cfg.amplitudes))
}

fn disorder(cfg: &DisorderConfig, grid: &TimeGrid, estimator: Estimator) -> ModelResult<ScenarioOutput> {
    let spec = disorder_spec(cfg)?;
    let n = spec.dim();
    let r = spec.initial().clone();
    let times = grid.sample_times();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|m| (m + 1..n).map(move |k| (m, k))).collect();

    let mut columns = vec!["t".to_string()];
    columns.extend((0..n).map(|m| format!("rho_{m}_{m}")));
    for &(m, k) in &pairs {
        columns.push(format!("re_rho_{m}_{k}"));
        columns.push(format!("im_rho_{m}_{k}"));
    }
    let mut out = ScenarioOutput { table: Table::new(columns), ..Default::default() };
    for &(m, k) in &pairs {
        if let Some(t2) = lorentzian_t2(&spec, m, k) {
            out.derived.insert(format!("T2_{m}_{k}"), t2);
        }
    }

    let mut population_drift: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut quadrature_dev: f64 = 0.0;
    let mut compared = 0usize;
    for &t in &times {
        let rho = match estimator {
            Estimator::Trajectories { n_traj, seed } => {
                let mc = disorder_monte_carlo(&spec, t, n_traj, seed)?;
                // Populations are invariant sample by sample, so only rounding
                // separates them from r_mm; coherences get a 5σ band.
                for i in 0..n {
                    for j in 0..n {
                        let exact = if i == j { r[(i, i)] } else { r[(i, j)] * disorder_gamma(&spec, i, j, t)? };
                        let dev = (mc.state.element(i, j) - exact).norm();
                        let band = if i == j { 3.0 * mc.stderr[i][i] } else { 5.0 * mc.stderr[i][j] };
                        worst_ratio = worst_ratio.max(dev / (band + 8.0 * f64::EPSILON));
                    }
                }
                mc.state
            }
            _ => {
                for &(m, k) in &pairs {
                    let closed = disorder_gamma(&spec, m, k, t)?;
                    if closed.norm() >= QUADRATURE_FLOOR {
                        let quad = disorder_gamma_with(&spec, m, k, t, GammaMethod::Quadrature)?;
                        quadrature_dev = quadrature_dev.max((quad - closed).norm());
                        compared += 1;
                    }
                }
                disorder_averaged_state(&spec, t, AverageMethod::ClosedForm)?
            }
        };
        for m in 0..n {
            if !matches!(estimator, Estimator::Trajectories { .. }) {
                population_drift = population_drift.max((rho.population(m) - r[(m, m)].re).abs());
            }
        }
        let mut row: Vec<Cell> = vec![t.into()];
        row.extend((0..n).map(|m| Cell::from(rho.population(m))));
        for &(m, k) in &pairs {
            let z = rho.element(m, k);
            row.push(z.re.into());
            row.push(z.im.into());
        }
        out.table.push(row);
    }

    match estimator {
        Estimator::Trajectories { n_traj, .. } => out.checks.push(Check::at_most(
            "monte_carlo_matches_closed_form",
            worst_ratio,
            1.0,
            format!("max |deviation| / (band + 8ε); band 3σ for populations, 5σ for coherences; {n_traj} samples"),
        )),
        _ => {
            out.checks.push(Check::at_most(
                "populations_invariant",
                population_drift,
                0.0,
                "max |ρ̄_mm(t) − r_mm|, required to vanish exactly",
            ));
            if compared > 0 {
                out.checks.push(Check::at_most(
                    "quadrature_matches_closed_form",
                    quadrature_dev,
                    QUADRATURE_TOL,
                    format!("max |γ_quad − γ_closed| over {compared} values with |γ| ≥ {QUADRATURE_FLOOR:e}"),
                ));
            }
        }
    }
    Ok(out)
}

fn telegraph(cfg: &TelegraphConfig, grid: &TimeGrid, estimator: Estimator) -> ModelResult<ScenarioOutput> {
    let Estimator::Trajectories { n_traj, seed } = estimator else { unreachable!("validated estimator") };
    let settings = TelegraphSettings {
        bin: cfg.bin,
        dark_threshold: cfg.dark_threshold,
        min_dark_bins: cfg.min_dark_bins,
        end_margin: cfg.end_margin,
    };
    let stats = fluorescence_telegraph(&cfg.rates, grid, n_traj, seed, settings)?;
    let expected_mean = 1.0 / cfg.rates.gamma_deshelve;
    let expected_fraction = cfg.rates.expected_dark_fraction();

    let mut out = ScenarioOutput { warnings: stats.warnings.clone(), ..Default::default() };
    out.derived.insert("expected_dark_mean".into(), expected_mean);
    out.derived.insert("expected_dark_fraction".into(), expected_fraction);
    out.derived.insert("expected_bright_counts_per_bin".into(), stats.expected_bright_counts);
    out.derived.insert("dark_periods".into(), stats.dark.count() as f64);
    out.derived.insert("dark_mean".into(), stats.dark.mean);
    out.derived.insert("dark_mean_stderr".into(), stats.dark.stderr);
    out.derived.insert("bright_mean".into(), stats.bright.mean);
    out.derived.insert("dark_fraction".into(), stats.dark_fraction_mean);

    let z = if stats.dark.count() >= 2 && stats.dark.stderr > 0.0 {
        (stats.dark.mean - expected_mean) / stats.dark.stderr
    } else {
        out.warnings.push(format!("only {} dark periods observed; extend the grid", stats.dark.count()));
        f64::NAN
    };
    out.checks.push(Check::at_most(
        "dark_mean_matches_deshelve_rate",
        z.abs(),
        3.0,
        format!(
            "|mean − 1/γ_deshelve| / SE over {} periods: {:.6} ± {:.6} vs {expected_mean:.6}",
            stats.dark.count(),
            stats.dark.mean,
            stats.dark.stderr
        ),
    ));
    if n_traj >= 2 && stats.dark_fraction_stderr > 0.0 {
        let z = (stats.dark_fraction_mean - expected_fraction) / stats.dark_fraction_stderr;
        out.checks.push(Check::at_most(
            "dark_fraction_matches_rates",
            z.abs(),
            3.0,
            format!("|fraction − expected| / SE: {:.6} vs {expected_fraction:.6}", stats.dark_fraction_mean),
        ));
    }

    out.table = Table::new(["t_bin", "pooled_counts", "counts_0"]);
    let first = &stats.per_trajectory[0].counts;
    for (k, (&pooled, &own)) in stats.pooled_counts.iter().zip(first).enumerate() {
        out.table.push(vec![(grid.t_start + k as f64 * cfg.bin).into(), pooled.into(), own.into()]);
    }
    Ok(out)
}

fn oscillator(cfg: &OscillatorConfig, grid: &TimeGrid) -> ModelResult<ScenarioOutput> {
    let params = &cfg.model;
    let run = damped_osc_scenario(params, grid, cfg.points)?;
    let mut out = ScenarioOutput::default();
    let quarter = std::f64::consts::PI / (2.0 * params.omega);
    out.derived.insert("quarter_period".into(), quarter);

    let first = &run.frames[0];
    let trace_drift = max_of(run.frames.iter().map(|f| (f.trace - first.trace).abs()));
    out.checks.push(Check::at_most("trace_conserved", trace_drift, CONSERVATION_TOL, "max |tr ρ(t) − tr ρ(0)|"));
    if params.gamma == 0.0 {
        let drift = max_of(run.frames.iter().map(|f| (f.purity - first.purity).abs()));
        out.checks.push(Check::at_most("purity_conserved", drift, CONSERVATION_TOL, "max |tr ρ² − tr ρ₀²|"));
    }

    // Merge frames are samples within 0.1% of a quarter period of (2k+1)·quarter.
    let count = ((grid.t_end / quarter + 1.0) / 2.0).floor().max(0.0) as usize;
    let merges: Vec<(f64, f64)> = params
        .merge_times(count + 1)
        .into_iter()
        .filter_map(|tm| {
            let f = run.frame_at(tm);
            ((f.t - tm).abs() <= 1e-3 * quarter).then_some((f.t, f.visibility))
        })
        .collect();
    for (k, (t, v)) in merges.iter().enumerate() {
        out.derived.insert(format!("merge_{k}_time"), *t);
        out.derived.insert(format!("merge_{k}_visibility"), *v);
    }
    let listing = merges.iter().map(|(_, v)| format!("{v:.4}")).collect::<Vec<_>>().join(", ");
    if merges.is_empty() {
        out.warnings.push("no sample falls on a packet-merge time (2k+1)π/(2ω); visibility checks skipped".into());
    } else if params.gamma == 0.0 {
        let worst = merges.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
        out.checks.push(Check::at_least(
            "merge_visibility_full",
            worst,
            MERGE_VISIBILITY,
            format!("min visibility over merges [{listing}]"),
        ));
    } else if merges.len() >= 2 {
        let worst_step = merges.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
        out.checks.push(Check::below(
            "merge_visibility_decreasing",
            worst_step,
            0.0,
            format!("largest change between successive merges [{listing}]; must be negative"),
        ));
    } else {
        out.warnings.push("only one merge time sampled; decrease check skipped".into());
    }

    out.table =
        Table::new(["t", "trace", "purity", "mean_energy", "visibility", "raw_contrast", "norm", "top_population"]);
    for f in &run.frames {
        out.table.push(
            [f.t, f.trace, f.purity, f.mean_energy, f.visibility, f.raw_contrast, f.norm, f.top_population]
                .map(Cell::from)
                .to_vec(),
        );
    }
    Ok(out)
}

fn unraveling(cfg: &UnravelingConfig, grid: &TimeGrid, estimator: Estimator) -> ModelResult<ScenarioOutput> {
    let Estimator::Trajectories { n_traj, seed } = estimator else { unreachable!("validated estimator") };
    let (model, psi0) = match &cfg.system {
        UnravelingSystem::TwoLevelDecay { omega, gamma, amplitudes } => (
            LindbladModel::new(
                ComplexMatrix::from_real_diagonal(&[0.0, *omega]),
                vec![(ComplexMatrix::transition(2, 0, 1), *gamma)],
            )?,
            QuantumState::pure(amplitudes.clone())?,
        ),
        UnravelingSystem::ThreeLevel { rates, initial } => {
            (three_level_model(rates)?, QuantumState::basis(3, *initial)?)
        }
    };
    let report = unraveling_equivalence_report(&model, &psi0, grid, n_traj, seed)?;
    let exact = integrate_master(&psi0, &model, grid)?;
    let dim = model.dim();

    let mut out = ScenarioOutput::default();
    out.derived.insert("per_time_bound".into(), report.threshold);
    out.derived.insert("times_above_per_time_bound".into(), report.flagged() as f64);
    out.derived.insert("max_trace_distance".into(), report.max_trace_distance);
    out.checks.push(Check::at_most(
        "max_trace_distance",
        report.max_trace_distance,
        cfg.threshold,
        format!("max over {} times of ½‖ρ_traj − ρ_master‖₁, {n_traj} trajectories", report.times.len()),
    ));

    let mut columns = vec!["t".to_string(), "trace_distance".to_string()];
    for k in 0..dim {
        columns.extend([format!("pop_traj_{k}"), format!("pop_stderr_{k}"), format!("pop_master_{k}")]);
    }
    out.table = Table::new(columns);
    for (i, &t) in report.times.iter().enumerate() {
        let mut row: Vec<Cell> = vec![t.into(), report.trace_distances[i].into()];
        for k in 0..dim {
            row.push(report.ensemble.mean_state[i].population(k).into());
            row.push(report.ensemble.population_stderr[i][k].into());
            row.push(exact[i].state.population(k).into());
        }
        out.table.push(row);
    }
    Ok(out)
}
