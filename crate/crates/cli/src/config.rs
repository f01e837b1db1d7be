//! Scenario configuration documents.
//!
//! A configuration is a TOML document:
//!
//! ```toml
//! scenario = "central-spin"
//!
//! [grid]
//! t_end = 5.0
//! n_steps = 500          # t_start = 0.0, sample_every = 1 by default
//!
//! [estimator]
//! kind = "closed-form"   # or "master-equation", or "trajectories" with n_traj and seed
//!
//! [output]
//! path = "out/central_spin.csv"
//!
//! [params]
//! couplings = [1.0, 1.0, 1.0, 1.0]
//! ```
//!
//! Complex numbers are written as `[re, im]` pairs or as plain reals.
//! Parsing collects every problem in one pass and reports each with its
//! field path. [`emit`] writes the canonical form with all defaults filled
//! in, and parsing it gives back the same configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use decohere_core::evolution::TimeGrid;
use decohere_core::models::central_spin::CentralSpinParams;
use decohere_core::models::disorder::Distribution;
use decohere_core::models::oscillator::DampedOscParams;
use decohere_core::models::three_level::{ThreeLevelParams, MIN_BRIGHT_COUNTS_PER_BIN};
use decohere_core::Complex64;
use toml::{Table, Value};

/// Largest bath the brute-force central-spin estimator accepts.
pub const MAX_BRUTE_FORCE_BATH: usize = 12;
const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    CentralSpin,
    SpinEcho,
    Disorder,
    ThreeLevelTelegraph,
    DampedOscillator,
    UnravelingCheck,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Self::CentralSpin,
        Self::SpinEcho,
        Self::Disorder,
        Self::ThreeLevelTelegraph,
        Self::DampedOscillator,
        Self::UnravelingCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::CentralSpin => "central-spin",
            Self::SpinEcho => "spin-echo",
            Self::Disorder => "disorder",
            Self::ThreeLevelTelegraph => "three-level-telegraph",
            Self::DampedOscillator => "damped-oscillator",
            Self::UnravelingCheck => "unraveling-check",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn summary(self) -> &'static str {
        match self {
            Self::CentralSpin => "central-spin coherence under a static spin bath",
            Self::SpinEcho => "central-spin coherence with a pi pulse at t_echo",
            Self::Disorder => "density matrix averaged over a random level shift",
            Self::ThreeLevelTelegraph => "binned fluorescence and dark periods of a shelving emitter",
            Self::DampedOscillator => "two-packet interference in a damped oscillator",
            Self::UnravelingCheck => "quantum-jump average against the master equation",
        }
    }

    /// CSV columns, in order.
    pub fn columns(self) -> &'static str {
        match self {
            Self::CentralSpin => "t, re_coherence, im_coherence, abs_coherence, envelope",
            Self::SpinEcho => "t, re_coherence, im_coherence, abs_coherence, free_abs_coherence",
            Self::Disorder => "t, rho_mm per level, re_rho_mn and im_rho_mn per pair m < n",
            Self::ThreeLevelTelegraph => "t_bin, pooled_counts, counts_0",
            Self::DampedOscillator => "t, trace, purity, mean_energy, visibility, raw_contrast, norm, top_population",
            Self::UnravelingCheck => "t, trace_distance, then pop_traj_k, pop_stderr_k, pop_master_k per level",
        }
    }

    pub fn estimators(self) -> &'static [EstimatorKind] {
        use EstimatorKind::*;
        match self {
            Self::CentralSpin | Self::SpinEcho => &[ClosedForm, MasterEquation],
            Self::Disorder => &[ClosedForm, Trajectories],
            Self::ThreeLevelTelegraph | Self::UnravelingCheck => &[Trajectories],
            Self::DampedOscillator => &[MasterEquation],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    ClosedForm,
    MasterEquation,
    Trajectories,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::ClosedForm => "closed-form",
            Self::MasterEquation => "master-equation",
            Self::Trajectories => "trajectories",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    ClosedForm,
    MasterEquation,
    Trajectories { n_traj: usize, seed: u64 },
}

impl Estimator {
    pub fn kind(self) -> EstimatorKind {
        match self {
            Self::ClosedForm => EstimatorKind::ClosedForm,
            Self::MasterEquation => EstimatorKind::MasterEquation,
            Self::Trajectories { .. } => EstimatorKind::Trajectories,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub path: PathBuf,
    pub format: OutputFormat,
    /// Defaults to the CSV path with extension `manifest.json`.
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralSpinConfig {
    pub omega0: f64,
    pub couplings: Vec<f64>,
    pub c1: Complex64,
    pub c2: Complex64,
}

impl CentralSpinConfig {
    pub fn model(&self) -> decohere_core::Result<CentralSpinParams> {
        CentralSpinParams::new(self.omega0, self.couplings.clone(), self.c1, self.c2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinEchoConfig {
    pub spin: CentralSpinConfig,
    pub t_echo: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisorderConfig {
    pub distribution: Distribution,
    pub energies: Vec<f64>,
    pub slopes: Vec<f64>,
    /// Initial pure state in the level basis.
    pub amplitudes: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TelegraphConfig {
    pub rates: ThreeLevelParams,
    pub bin: f64,
    pub dark_threshold: u64,
    pub min_dark_bins: usize,
    pub end_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorConfig {
    pub model: DampedOscParams,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UnravelingSystem {
    /// `H = diag(0, omega)`, decay `|1⟩ → |0⟩` at rate `gamma`.
    TwoLevelDecay { omega: f64, gamma: f64, amplitudes: Vec<Complex64> },
    /// Shelving emitter started in basis level `initial`.
    ThreeLevel { rates: ThreeLevelParams, initial: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnravelingConfig {
    pub system: UnravelingSystem,
    /// Pass threshold on the largest trace distance.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    CentralSpin(CentralSpinConfig),
    SpinEcho(SpinEchoConfig),
    Disorder(DisorderConfig),
    Telegraph(TelegraphConfig),
    Oscillator(OscillatorConfig),
    Unraveling(UnravelingConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub grid: TimeGrid,
    pub estimator: Estimator,
    pub output: OutputConfig,
    pub params: Params,
}

/// Every problem found in a configuration document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub errors: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "invalid configuration ({} problem{})",
            self.errors.len(),
            if self.errors.len() == 1 { "" } else { "s" }
        )?;
        for e in &self.errors {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

// ---------------------------------------------------------------------------
// Parsing

struct Section<'a> {
    path: String,
    table: Option<&'a Table>,
    read: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn new(path: impl Into<String>, table: Option<&'a Table>) -> Self {
        Self { path: path.into(), table, read: Vec::new() }
    }

    fn key_path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.read.push(key);
        self.table?.get(key)
    }

    fn present(&self, key: &str) -> bool {
        self.table.is_some_and(|t| t.contains_key(key))
    }

    fn table(&mut self, key: &'static str, errs: &mut Vec<String>) -> Section<'a> {
        let path = self.key_path(key);
        match self.raw(key) {
            Some(Value::Table(t)) => Section::new(path, Some(t)),
            Some(other) => {
                errs.push(format!("{path}: expected a table, found {}", other.type_str()));
                Section::new(path, None)
            }
            None => Section::new(path, None),
        }
    }

    fn missing(&self, key: &str, errs: &mut Vec<String>) {
        errs.push(format!("{}: missing required field", self.key_path(key)));
    }

    fn float(&mut self, key: &'static str, default: Option<f64>, errs: &mut Vec<String>) -> f64 {
        match self.raw(key) {
            None => default.unwrap_or_else(|| {
                self.missing(key, errs);
                f64::NAN
            }),
            Some(v) => as_float(v).unwrap_or_else(|e| {
                errs.push(format!("{}: {e}", self.key_path(key)));
                f64::NAN
            }),
        }
    }

    fn uint(&mut self, key: &'static str, default: Option<u64>, errs: &mut Vec<String>) -> u64 {
        match self.raw(key) {
            None => default.unwrap_or_else(|| {
                self.missing(key, errs);
                0
            }),
            Some(Value::Integer(i)) if *i >= 0 => *i as u64,
            Some(Value::Integer(_)) => {
                errs.push(format!("{}: must be non-negative", self.key_path(key)));
                0
            }
            Some(v) => {
                errs.push(format!("{}: expected an integer, found {}", self.key_path(key), v.type_str()));
                0
            }
        }
    }

    fn string(&mut self, key: &'static str, default: Option<&str>, errs: &mut Vec<String>) -> Option<String> {
        match self.raw(key) {
            None => {
                if default.is_none() {
                    self.missing(key, errs);
                }
                default.map(str::to_string)
            }
            Some(Value::String(s)) => Some(s.clone()),
            Some(v) => {
                errs.push(format!("{}: expected a string, found {}", self.key_path(key), v.type_str()));
                None
            }
        }
    }

    fn floats(&mut self, key: &'static str, default: Option<Vec<f64>>, errs: &mut Vec<String>) -> Vec<f64> {
        self.list(key, default, errs, as_float)
    }

    fn complex(&mut self, key: &'static str, default: Option<Complex64>, errs: &mut Vec<String>) -> Complex64 {
        match self.raw(key) {
            None => default.unwrap_or_else(|| {
                self.missing(key, errs);
                Complex64::new(f64::NAN, 0.0)
            }),
            Some(v) => as_complex(v).unwrap_or_else(|e| {
                errs.push(format!("{}: {e}", self.key_path(key)));
                Complex64::new(f64::NAN, 0.0)
            }),
        }
    }

    fn complexes(
        &mut self,
        key: &'static str,
        default: Option<Vec<Complex64>>,
        errs: &mut Vec<String>,
    ) -> Vec<Complex64> {
        self.list(key, default, errs, as_complex)
    }

    fn list<T>(
        &mut self,
        key: &'static str,
        default: Option<Vec<T>>,
        errs: &mut Vec<String>,
        item: impl Fn(&Value) -> Result<T, String>,
    ) -> Vec<T> {
        match self.raw(key) {
            None => default.unwrap_or_else(|| {
                self.missing(key, errs);
                Vec::new()
            }),
            Some(Value::Array(xs)) => {
                let mut out = Vec::with_capacity(xs.len());
                for (i, x) in xs.iter().enumerate() {
                    match item(x) {
                        Ok(v) => out.push(v),
                        Err(e) => errs.push(format!("{}[{i}]: {e}", self.key_path(key))),
                    }
                }
                out
            }
            Some(v) => {
                errs.push(format!("{}: expected an array, found {}", self.key_path(key), v.type_str()));
                Vec::new()
            }
        }
    }

    /// Rejects keys that were never read.
    fn finish(self, errs: &mut Vec<String>) {
        if let Some(t) = self.table {
            for key in t.keys() {
                if !self.read.contains(&key.as_str()) {
                    errs.push(format!("{}: unknown field", self.key_path(key)));
                }
            }
        }
    }
}

fn as_float(v: &Value) -> Result<f64, String> {
    let x = match v {
        Value::Float(x) => *x,
        Value::Integer(i) => *i as f64,
        other => return Err(format!("expected a number, found {}", other.type_str())),
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("must be finite, got {x}"))
    }
}

fn as_complex(v: &Value) -> Result<Complex64, String> {
    match v {
        Value::Array(parts) if parts.len() == 2 => Ok(Complex64::new(as_float(&parts[0])?, as_float(&parts[1])?)),
        Value::Array(parts) => Err(format!("expected [re, im], found an array of length {}", parts.len())),
        other => as_float(other).map(|x| Complex64::new(x, 0.0)),
    }
}

fn require(errs: &mut Vec<String>, ok: bool, path: impl fmt::Display, msg: impl fmt::Display) {
    if !ok {
        errs.push(format!("{path}: {msg}"));
    }
}

fn norm_sqr(amps: &[Complex64]) -> f64 {
    amps.iter().map(|z| z.norm_sqr()).sum()
}

/// Parses and validates a configuration document, applying defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError { errors: vec![format!("document: {}", e.message())] })?;
    let mut errs = Vec::new();
    let mut root = Section::new("", Some(&doc));

    let scenario = match root.string("scenario", None, &mut errs) {
        Some(name) => Scenario::from_name(&name).or_else(|| {
            let known: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
            errs.push(format!("scenario: unknown scenario \"{name}\" (expected one of {})", known.join(", ")));
            None
        }),
        None => None,
    };

    let mut g = root.table("grid", &mut errs);
    let t_start = g.float("t_start", Some(0.0), &mut errs);
    let t_end = g.float("t_end", None, &mut errs);
    let n_steps = g.uint("n_steps", None, &mut errs) as usize;
    let sample_every = g.uint("sample_every", Some(1), &mut errs) as usize;
    let grid_ok = t_start.is_finite() && t_end.is_finite() && g.present("n_steps");
    if grid_ok {
        require(&mut errs, t_end > t_start, "grid.t_end", format!("must exceed t_start = {t_start}"));
        require(&mut errs, n_steps >= 1, "grid.n_steps", "must be at least 1");
    }
    require(&mut errs, sample_every >= 1, "grid.sample_every", "must be at least 1");
    g.finish(&mut errs);
    let grid = TimeGrid { t_start, t_end, n_steps, sample_every };

    let mut e = root.table("estimator", &mut errs);
    let estimator = match e.string("kind", None, &mut errs).as_deref() {
        None => None,
        Some("closed-form") => Some(Estimator::ClosedForm),
        Some("master-equation") => Some(Estimator::MasterEquation),
        Some("trajectories") => {
            let n_traj = e.uint("n_traj", None, &mut errs);
            let had_n = e.present("n_traj");
            let seed = e.uint("seed", None, &mut errs);
            if had_n && n_traj == 0 {
                errs.push("estimator.n_traj: trajectories requires n_traj ≥ 1".into());
            }
            require(&mut errs, seed <= i64::MAX as u64, "estimator.seed", "must not exceed 2^63 - 1");
            Some(Estimator::Trajectories { n_traj: n_traj as usize, seed })
        }
        Some(other) => {
            errs.push(format!(
                "estimator.kind: unknown estimator \"{other}\" (expected closed-form, master-equation or trajectories)"
            ));
            None
        }
    };
    e.finish(&mut errs);
    if let (Some(s), Some(est)) = (scenario, estimator) {
        if !s.estimators().contains(&est.kind()) {
            let allowed: Vec<&str> = s.estimators().iter().map(|k| k.name()).collect();
            errs.push(format!(
                "estimator.kind: {s} does not support {} (supported: {})",
                est.kind().name(),
                allowed.join(", ")
            ));
        }
    }

    let mut o = root.table("output", &mut errs);
    let path = o.string("path", None, &mut errs).map(PathBuf::from);
    if let Some(fmt) = o.string("format", Some("csv"), &mut errs) {
        require(&mut errs, fmt == "csv", "output.format", format!("unsupported format \"{fmt}\" (expected csv)"));
    }
    let manifest = o.string("manifest", Some(""), &mut errs).filter(|m| !m.is_empty()).map(PathBuf::from);
    if let Some(p) = &path {
        require(&mut errs, p.file_name().is_some(), "output.path", "must name a file");
    }
    o.finish(&mut errs);
    let output = path.map(|path| OutputConfig {
        manifest: manifest.unwrap_or_else(|| default_manifest(&path)),
        path,
        format: OutputFormat::Csv,
    });

    let params = match scenario {
        Some(s) => {
            let mut p = root.table("params", &mut errs);
            let params = parse_params(s, &mut p, estimator, &grid, grid_ok, &mut errs);
            p.finish(&mut errs);
            Some(params)
        }
        None => {
            if !root.present("params") {
                errs.push("params: missing required table (contents depend on the scenario)".into());
            }
            root.read.push("params");
            None
        }
    };
    root.finish(&mut errs);

    match (scenario, estimator, output, params) {
        (Some(scenario), Some(estimator), Some(output), Some(params)) if errs.is_empty() => {
            Ok(ScenarioConfig { scenario, grid, estimator, output, params })
        }
        _ => Err(ConfigError { errors: errs }),
    }
}

fn default_manifest(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

fn central_spin_params(p: &mut Section, errs: &mut Vec<String>) -> CentralSpinConfig {
    let half = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let before = errs.len();
    let omega0 = p.float("omega0", Some(0.0), errs);
    let couplings = p.floats("couplings", None, errs);
    let c1 = p.complex("c1", Some(half), errs);
    let c2 = p.complex("c2", Some(half), errs);
    if errs.len() == before {
        require(errs, !couplings.is_empty(), p.key_path("couplings"), "needs at least one bath spin");
        let norm = c1.norm_sqr() + c2.norm_sqr();
        require(errs, (norm - 1.0).abs() <= NORM_TOL, p.key_path("c1"), format!("|c1|² + |c2|² = {norm}, expected 1"));
    }
    CentralSpinConfig { omega0, couplings, c1, c2 }
}

fn three_level_rates(p: &mut Section, errs: &mut Vec<String>) -> ThreeLevelParams {
    let rabi = p.float("rabi", None, errs);
    let detuning = p.float("detuning", Some(0.0), errs);
    let gamma_strong = p.float("gamma_strong", Some(1.0), errs);
    let gamma_shelve = p.float("gamma_shelve", None, errs);
    let gamma_deshelve = p.float("gamma_deshelve", None, errs);
    for (key, v) in [("gamma_strong", gamma_strong), ("gamma_shelve", gamma_shelve), ("gamma_deshelve", gamma_deshelve)]
    {
        require(errs, v.is_nan() || v >= 0.0, p.key_path(key), "rates must be non-negative");
    }
    ThreeLevelParams { rabi, detuning, gamma_strong, gamma_shelve, gamma_deshelve }
}

fn parse_params(
    scenario: Scenario,
    p: &mut Section,
    estimator: Option<Estimator>,
    grid: &TimeGrid,
    grid_ok: bool,
    errs: &mut Vec<String>,
) -> Params {
    let before = errs.len();
    match scenario {
        Scenario::CentralSpin => {
            let cfg = central_spin_params(p, errs);
            if estimator == Some(Estimator::MasterEquation) && cfg.couplings.len() > MAX_BRUTE_FORCE_BATH {
                errs.push(format!(
                    "{}: master-equation estimator supports at most {MAX_BRUTE_FORCE_BATH} bath spins, got {}",
                    p.key_path("couplings"),
                    cfg.couplings.len()
                ));
            }
            Params::CentralSpin(cfg)
        }
        Scenario::SpinEcho => {
            let spin = central_spin_params(p, errs);
            let t_echo = p.float("t_echo", None, errs);
            require(errs, t_echo.is_nan() || t_echo > 0.0, p.key_path("t_echo"), "must be positive");
            if grid_ok {
                require(errs, grid.t_start >= 0.0, "grid.t_start", "spin-echo needs t_start ≥ 0");
            }
            if estimator == Some(Estimator::MasterEquation) && spin.couplings.len() > MAX_BRUTE_FORCE_BATH {
                errs.push(format!(
                    "{}: master-equation estimator supports at most {MAX_BRUTE_FORCE_BATH} bath spins",
                    p.key_path("couplings")
                ));
            }
            Params::SpinEcho(SpinEchoConfig { spin, t_echo })
        }
        Scenario::Disorder => {
            let mut d = p.table("distribution", errs);
            let distribution = match d.string("kind", None, errs).as_deref() {
                Some("gaussian") => Distribution::Gaussian {
                    mean: d.float("mean", Some(0.0), errs),
                    sigma: d.float("sigma", None, errs),
                },
                Some("lorentzian") => Distribution::Lorentzian {
                    center: d.float("center", Some(0.0), errs),
                    width: d.float("width", None, errs),
                },
                Some("uniform") => Distribution::Uniform { a: d.float("a", None, errs), b: d.float("b", None, errs) },
                Some(other) => {
                    errs.push(format!(
                        "{}: unknown distribution \"{other}\" (expected gaussian, lorentzian or uniform)",
                        d.key_path("kind")
                    ));
                    Distribution::Gaussian { mean: 0.0, sigma: 1.0 }
                }
                None => Distribution::Gaussian { mean: 0.0, sigma: 1.0 },
            };
            let dist_ok = errs.len() == before;
            if dist_ok && distribution.validate().is_err() {
                errs.push(format!("{}: invalid parameters {distribution:?}", d.path));
            }
            d.finish(errs);
            let energies = p.floats("energies", None, errs);
            let n = energies.len();
            let slopes = p.floats("slopes", None, errs);
            let amp = Complex64::new(1.0 / (n.max(1) as f64).sqrt(), 0.0);
            let amplitudes = p.complexes("amplitudes", Some(vec![amp; n]), errs);
            if errs.len() == before {
                require(errs, n >= 1, p.key_path("energies"), "needs at least one level");
                require(
                    errs,
                    slopes.len() == n,
                    p.key_path("slopes"),
                    format!("expected {n} entries, got {}", slopes.len()),
                );
                require(
                    errs,
                    amplitudes.len() == n,
                    p.key_path("amplitudes"),
                    format!("expected {n} entries, got {}", amplitudes.len()),
                );
                let norm = norm_sqr(&amplitudes);
                require(
                    errs,
                    (norm - 1.0).abs() <= NORM_TOL,
                    p.key_path("amplitudes"),
                    format!("norm² = {norm}, expected 1"),
                );
            }
            if let Some(Estimator::Trajectories { n_traj: 1, .. }) = estimator {
                errs.push("estimator.n_traj: disorder sampling needs n_traj ≥ 2 for standard errors".into());
            }
            Params::Disorder(DisorderConfig { distribution, energies, slopes, amplitudes })
        }
        Scenario::ThreeLevelTelegraph => {
            let rates = three_level_rates(p, errs);
            let bin = p.float("bin", None, errs);
            let dark_threshold = p.uint("dark_threshold", Some(0), errs);
            let min_dark_bins = p.uint("min_dark_bins", Some(2), errs) as usize;
            let default_margin = (rates.gamma_deshelve > 0.0).then(|| 10.0 / rates.gamma_deshelve);
            let end_margin = p.float("end_margin", default_margin.or(Some(0.0)), errs);
            if errs.len() == before {
                require(
                    errs,
                    rates.gamma_deshelve > 0.0,
                    p.key_path("gamma_deshelve"),
                    "must be positive for dark periods to end",
                );
                require(errs, bin > 0.0, p.key_path("bin"), "must be positive");
                require(errs, end_margin >= 0.0, p.key_path("end_margin"), "must be non-negative");
                let expected = rates.bright_emission_rate() * bin;
                require(
                    errs,
                    expected >= MIN_BRIGHT_COUNTS_PER_BIN,
                    p.key_path("bin"),
                    format!("expected bright-bin count {expected:.3} is below {MIN_BRIGHT_COUNTS_PER_BIN}; use a longer bin"),
                );
                if grid_ok {
                    require(errs, bin <= grid.t_end - grid.t_start, p.key_path("bin"), "longer than the grid");
                }
            }
            Params::Telegraph(TelegraphConfig { rates, bin, dark_threshold, min_dark_bins, end_margin })
        }
        Scenario::DampedOscillator => {
            let n_fock = p.uint("n_fock", Some(40), errs) as usize;
            let omega = p.float("omega", Some(1.0), errs);
            let gamma = p.float("gamma", Some(0.0), errs);
            let n_thermal = p.float("n_thermal", Some(0.0), errs);
            let alpha1 = p.complex("alpha1", None, errs);
            let alpha2 = p.complex("alpha2", Some(-alpha1), errs);
            let points = p.uint("points", Some(512), errs) as usize;
            let model = DampedOscParams { n_fock, omega, gamma, n_thermal, alpha1, alpha2 };
            if errs.len() == before {
                require(errs, omega > 0.0, p.key_path("omega"), "must be positive");
                require(errs, points >= 3, p.key_path("points"), "must be at least 3");
                if let Err(e) = model.validate() {
                    errs.push(format!("{}: {e}", p.key_path("n_fock")));
                }
            }
            Params::Oscillator(OscillatorConfig { model, points })
        }
        Scenario::UnravelingCheck => {
            let threshold = p.float("threshold", Some(0.05), errs);
            require(errs, threshold.is_nan() || threshold > 0.0, p.key_path("threshold"), "must be positive");
            let system = match p.string("system", None, errs).as_deref() {
                Some("two-level-decay") => {
                    let omega = p.float("omega", Some(0.0), errs);
                    let gamma = p.float("gamma", Some(1.0), errs);
                    let amplitudes =
                        p.complexes("amplitudes", Some(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]), errs);
                    if errs.len() == before {
                        require(errs, gamma >= 0.0, p.key_path("gamma"), "must be non-negative");
                        require(errs, amplitudes.len() == 2, p.key_path("amplitudes"), "expected 2 entries");
                        let norm = norm_sqr(&amplitudes);
                        require(
                            errs,
                            (norm - 1.0).abs() <= NORM_TOL,
                            p.key_path("amplitudes"),
                            format!("norm² = {norm}, expected 1"),
                        );
                    }
                    UnravelingSystem::TwoLevelDecay { omega, gamma, amplitudes }
                }
                Some("three-level") => {
                    let rates = three_level_rates(p, errs);
                    let initial = p.uint("initial", Some(0), errs) as usize;
                    require(errs, initial < 3, p.key_path("initial"), "must be 0 (g), 1 (e) or 2 (s)");
                    UnravelingSystem::ThreeLevel { rates, initial }
                }
                Some(other) => {
                    errs.push(format!(
                        "{}: unknown system \"{other}\" (expected two-level-decay or three-level)",
                        p.key_path("system")
                    ));
                    UnravelingSystem::ThreeLevel { rates: placeholder_rates(), initial: 0 }
                }
                None => UnravelingSystem::ThreeLevel { rates: placeholder_rates(), initial: 0 },
            };
            Params::Unraveling(UnravelingConfig { system, threshold })
        }
    }
}

/// Stand-in after a parse error; never reaches a run.
fn placeholder_rates() -> ThreeLevelParams {
    ThreeLevelParams { rabi: 0.0, detuning: 0.0, gamma_strong: 1.0, gamma_shelve: 0.0, gamma_deshelve: 0.0 }
}

// ---------------------------------------------------------------------------
// Emission

fn complex_value(z: Complex64) -> Value {
    Value::Array(vec![Value::Float(z.re), Value::Float(z.im)])
}

fn floats_value(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| Value::Float(x)).collect())
}

fn complexes_value(zs: &[Complex64]) -> Value {
    Value::Array(zs.iter().map(|&z| complex_value(z)).collect())
}

fn int(x: u64) -> Value {
    Value::Integer(x as i64)
}

fn put_central_spin(t: &mut Table, c: &CentralSpinConfig) {
    t.insert("omega0".into(), Value::Float(c.omega0));
    t.insert("couplings".into(), floats_value(&c.couplings));
    t.insert("c1".into(), complex_value(c.c1));
    t.insert("c2".into(), complex_value(c.c2));
}

fn put_rates(t: &mut Table, r: &ThreeLevelParams) {
    t.insert("rabi".into(), Value::Float(r.rabi));
    t.insert("detuning".into(), Value::Float(r.detuning));
    t.insert("gamma_strong".into(), Value::Float(r.gamma_strong));
    t.insert("gamma_shelve".into(), Value::Float(r.gamma_shelve));
    t.insert("gamma_deshelve".into(), Value::Float(r.gamma_deshelve));
}

fn params_table(params: &Params) -> Table {
    let mut t = Table::new();
    match params {
        Params::CentralSpin(c) => put_central_spin(&mut t, c),
        Params::SpinEcho(c) => {
            put_central_spin(&mut t, &c.spin);
            t.insert("t_echo".into(), Value::Float(c.t_echo));
        }
        Params::Disorder(c) => {
            let mut d = Table::new();
            let (kind, fields): (&str, [(&str, f64); 2]) = match c.distribution {
                Distribution::Gaussian { mean, sigma } => ("gaussian", [("mean", mean), ("sigma", sigma)]),
                Distribution::Lorentzian { center, width } => ("lorentzian", [("center", center), ("width", width)]),
                Distribution::Uniform { a, b } => ("uniform", [("a", a), ("b", b)]),
            };
            d.insert("kind".into(), Value::String(kind.into()));
            for (k, v) in fields {
                d.insert(k.into(), Value::Float(v));
            }
            t.insert("distribution".into(), Value::Table(d));
            t.insert("energies".into(), floats_value(&c.energies));
            t.insert("slopes".into(), floats_value(&c.slopes));
            t.insert("amplitudes".into(), complexes_value(&c.amplitudes));
        }
        Params::Telegraph(c) => {
            put_rates(&mut t, &c.rates);
            t.insert("bin".into(), Value::Float(c.bin));
            t.insert("dark_threshold".into(), int(c.dark_threshold));
            t.insert("min_dark_bins".into(), int(c.min_dark_bins as u64));
            t.insert("end_margin".into(), Value::Float(c.end_margin));
        }
        Params::Oscillator(c) => {
            let m = &c.model;
            t.insert("n_fock".into(), int(m.n_fock as u64));
            t.insert("omega".into(), Value::Float(m.omega));
            t.insert("gamma".into(), Value::Float(m.gamma));
            t.insert("n_thermal".into(), Value::Float(m.n_thermal));
            t.insert("alpha1".into(), complex_value(m.alpha1));
            t.insert("alpha2".into(), complex_value(m.alpha2));
            t.insert("points".into(), int(c.points as u64));
        }
        Params::Unraveling(c) => {
            t.insert("threshold".into(), Value::Float(c.threshold));
            match &c.system {
                UnravelingSystem::TwoLevelDecay { omega, gamma, amplitudes } => {
                    t.insert("system".into(), Value::String("two-level-decay".into()));
                    t.insert("omega".into(), Value::Float(*omega));
                    t.insert("gamma".into(), Value::Float(*gamma));
                    t.insert("amplitudes".into(), complexes_value(amplitudes));
                }
                UnravelingSystem::ThreeLevel { rates, initial } => {
                    t.insert("system".into(), Value::String("three-level".into()));
                    put_rates(&mut t, rates);
                    t.insert("initial".into(), int(*initial as u64));
                }
            }
        }
    }
    t
}

/// The configuration as a TOML table with every default spelled out.
pub fn to_table(config: &ScenarioConfig) -> Table {
    let mut root = Table::new();
    root.insert("scenario".into(), Value::String(config.scenario.name().into()));

    let g = &config.grid;
    let mut grid = Table::new();
    grid.insert("t_start".into(), Value::Float(g.t_start));
    grid.insert("t_end".into(), Value::Float(g.t_end));
    grid.insert("n_steps".into(), int(g.n_steps as u64));
    grid.insert("sample_every".into(), int(g.sample_every as u64));
    root.insert("grid".into(), Value::Table(grid));

    let mut est = Table::new();
    est.insert("kind".into(), Value::String(config.estimator.kind().name().into()));
    if let Estimator::Trajectories { n_traj, seed } = config.estimator {
        est.insert("n_traj".into(), int(n_traj as u64));
        est.insert("seed".into(), int(seed));
    }
    root.insert("estimator".into(), Value::Table(est));

    let mut out = Table::new();
    out.insert("path".into(), Value::String(config.output.path.to_string_lossy().into_owned()));
    out.insert("format".into(), Value::String("csv".into()));
    out.insert("manifest".into(), Value::String(config.output.manifest.to_string_lossy().into_owned()));
    root.insert("output".into(), Value::Table(out));

    root.insert("params".into(), Value::Table(params_table(&config.params)));
    root
}

/// Canonical TOML text of a configuration.
pub fn emit(config: &ScenarioConfig) -> String {
    toml::to_string(&to_table(config)).expect("configuration tables always serialize")
}
