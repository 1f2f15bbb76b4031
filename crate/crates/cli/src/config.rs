//! Scenario files (JSON) and their validation.

use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use qrel_core::dynamics::FlowKind;
use qrel_core::functionals::Convention;
use qrel_core::suite::{Settings, Suite};
use qrel_core::{from_wave, make_gaussian, Field, GaussianParams, Grid, HydroState, PhaseExtraction, QrelError, WaveField};
use serde::Deserialize;

/// A configuration problem; maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { field: field.into(), reason: reason.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.field, self.reason)
    }
}

impl std::error::Error for ConfigError {}

impl From<QrelError> for ConfigError {
    fn from(e: QrelError) -> Self {
        match e {
            QrelError::Configuration { field, reason } => ConfigError { field, reason },
            other => ConfigError::new("initial", other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { dim: 1, n: 512, length: 40.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Units {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for Units {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaussianSpec {
    pub sigma2: f64,
    pub b: f64,
    pub c: f64,
    pub p0: f64,
    pub x0: f64,
}

impl Default for GaussianSpec {
    fn default() -> Self {
        Self { sigma2: 1.0, b: 0.0, c: 0.0, p0: 0.0, x0: 0.0 }
    }
}

/// Either Gaussian parameters or a CSV of wave samples (`re,im` per row,
/// row-major, `n^dim` rows) relative to the config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Initial {
    Gaussian(GaussianSpec),
    Samples(PathBuf),
}

impl Default for Initial {
    fn default() -> Self {
        Initial::Gaussian(GaussianSpec::default())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub grid: GridSpec,
    pub units: Units,
    pub initial: Initial,
    pub flow: String,
    pub step: f64,
    pub duration: f64,
    pub record_every: usize,
    pub alphas: Option<Vec<f64>>,
    pub suites: Option<Vec<String>>,
    pub output: PathBuf,
    pub convention: String,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            units: Units::default(),
            initial: Initial::default(),
            flow: "tau-flow".into(),
            step: 1e-3,
            duration: 0.5,
            record_every: 1,
            alphas: None,
            suites: None,
            output: PathBuf::from("qrel-out"),
            convention: "consistent".into(),
        }
    }
}

/// Validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: Grid<f64>,
    pub hbar: f64,
    pub mass: f64,
    pub initial: Initial,
    /// Directory against which relative sample paths resolve.
    pub base: PathBuf,
    pub flow: FlowKind,
    pub step: f64,
    pub steps: usize,
    pub record_every: usize,
    pub alphas: Vec<f64>,
    pub suites: Vec<Suite>,
    pub output: PathBuf,
    pub convention: Convention,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub suites: Option<Vec<String>>,
    pub output: Option<PathBuf>,
    pub convention: Option<String>,
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::new(field, format!("must be positive and finite, got {v}")))
    }
}

/// `-3, -2.5, ..., 3`.
pub fn default_alphas() -> Vec<f64> {
    (0..=12).map(|i| -3.0 + 0.5 * i as f64).collect()
}

pub fn load(path: Option<&Path>, overrides: Overrides) -> Result<Scenario, ConfigError> {
    let (cfg, base) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", p.display())))?;
            let cfg: ScenarioConfig = serde_json::from_str(&text)
                .map_err(|e| ConfigError::new("config", format!("{}: {e}", p.display())))?;
            (cfg, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (ScenarioConfig::default(), PathBuf::new()),
    };
    resolve(cfg, base, overrides)
}

pub fn resolve(cfg: ScenarioConfig, base: PathBuf, overrides: Overrides) -> Result<Scenario, ConfigError> {
    let length = positive("grid.length", cfg.grid.length)?;
    let grid = Grid::new(cfg.grid.dim, cfg.grid.n, length).map_err(|e| match e {
        QrelError::Configuration { field, reason } => ConfigError::new(format!("grid.{field}"), reason),
        other => ConfigError::new("grid", other.to_string()),
    })?;
    let hbar = positive("units.hbar", cfg.units.hbar)?;
    let mass = positive("units.mass", cfg.units.mass)?;
    let flow: FlowKind = cfg.flow.parse().map_err(ConfigError::from)?;
    let step = positive("step", cfg.step)?;
    if !(cfg.duration >= 0.0) || !cfg.duration.is_finite() {
        return Err(ConfigError::new("duration", format!("must be non-negative and finite, got {}", cfg.duration)));
    }
    let ratio = cfg.duration / step;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(ConfigError::new(
            "duration",
            format!("{} is not a whole number of steps of {step}", cfg.duration),
        ));
    }
    if cfg.record_every == 0 {
        return Err(ConfigError::new("record_every", "must be at least 1"));
    }
    let alphas = cfg.alphas.unwrap_or_else(default_alphas);
    if alphas.is_empty() {
        return Err(ConfigError::new("alphas", "must not be empty"));
    }
    if let Some(bad) = alphas.iter().find(|a| !a.is_finite()) {
        return Err(ConfigError::new("alphas", format!("non-finite value {bad}")));
    }
    let suite_names = overrides.suites.or(cfg.suites);
    let suites = match suite_names {
        None => Suite::ALL.to_vec(),
        Some(names) if names.is_empty() => return Err(ConfigError::new("suites", "must not be empty")),
        Some(names) => names
            .iter()
            .map(|n| n.trim().parse::<Suite>().map_err(|_| ConfigError::new("suites", format!("unknown suite `{n}`"))))
            .collect::<Result<_, _>>()?,
    };
    let convention: Convention = overrides
        .convention
        .as_deref()
        .unwrap_or(&cfg.convention)
        .parse()
        .map_err(ConfigError::from)?;
    if let Initial::Samples(p) = &cfg.initial {
        let full = base.join(p);
        if !full.is_file() {
            return Err(ConfigError::new("initial.samples", format!("{} does not exist", full.display())));
        }
    }
    Ok(Scenario {
        grid,
        hbar,
        mass,
        initial: cfg.initial,
        base,
        flow,
        step,
        steps: steps as usize,
        record_every: cfg.record_every,
        alphas,
        suites,
        output: overrides.output.unwrap_or(cfg.output),
        convention,
    })
}

impl Scenario {
    pub fn settings(&self) -> Settings {
        Settings { grid: self.grid.clone(), hbar: self.hbar, mass: self.mass, convention: self.convention }
    }

    /// The initial state; a sampled wave gets its action unwrapped where
    /// the density clears the floor.
    pub fn state(&self) -> Result<HydroState<f64>, ConfigError> {
        match &self.initial {
            Initial::Gaussian(g) => {
                let p = GaussianParams { sigma2: g.sigma2, b: g.b, c: g.c, p0: g.p0, x0: g.x0 };
                let st = make_gaussian(p, &self.grid, self.hbar, self.mass).map_err(|e| match e {
                    QrelError::Configuration { field, reason } => ConfigError::new(format!("initial.gaussian.{field}"), reason),
                    other => ConfigError::new("initial.gaussian", other.to_string()),
                })?;
                Ok(st)
            }
            Initial::Samples(p) => {
                let path = self.base.join(p);
                let w = read_samples(&path, &self.grid, self.hbar, self.mass)?;
                from_wave(&w, PhaseExtraction::Floored)
                    .map_err(|e| ConfigError::new("initial.samples", format!("{}: {e}", path.display())))
            }
        }
    }
}

fn read_samples(path: &Path, grid: &Grid<f64>, hbar: f64, mass: f64) -> Result<WaveField<f64>, ConfigError> {
    let err = |reason: String| ConfigError::new("initial.samples", format!("{}: {reason}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let mut values = Vec::with_capacity(grid.len());
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        if rec.len() != 2 {
            return Err(err(format!("row {} has {} columns, expected re,im", row + 1, rec.len())));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| err(format!("row {}: {e}", row + 1)));
        values.push(Complex::new(parse(&rec[0])?, parse(&rec[1])?));
    }
    if values.len() != grid.len() {
        return Err(err(format!("{} samples for a grid of {}", values.len(), grid.len())));
    }
    let field = Field::new(grid.clone(), values).map_err(|e| err(e.to_string()))?;
    WaveField::new(field, hbar, mass).map_err(|e| err(e.to_string()))
}
