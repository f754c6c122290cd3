//! Experiment configuration: strict JSON, validated at load.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use spdelab_core::martingale::MartingaleCase;
use spdelab_core::presets::NoiseCoefficient;
use spdelab_core::stats::Bootstrap;
use spdelab_core::{DriftSpec, Grid, KernelOptions, LipschitzData, ModelSpec, TciMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub model: ModelSpec,
    #[serde(default)]
    pub kernel: KernelOptions,
    #[serde(default = "zero_drift")]
    pub drift: DriftSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: u32,
    /// Defaults to `sup` when `σ ≡ 1` and `l2` otherwise.
    #[serde(default)]
    pub mode: Option<TciMode>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub constants: ConstantsConfig,
    #[serde(default)]
    pub concentration: ConcentrationConfig,
    #[serde(default)]
    pub transport: TransportConfig,
    #[serde(default)]
    pub repr: ReprConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    pub length: f64,
    pub nt: usize,
    pub nx: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default = "default_level")]
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { resamples: default_resamples(), level: default_level() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self { alphas: default_alphas() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationConfig {
    #[serde(default = "default_a_points")]
    pub a_points: usize,
    #[serde(default = "default_r_points")]
    pub r_points: usize,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        Self { a_points: default_a_points(), r_points: default_r_points() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMethodChoice {
    /// Exact when both clouds have the same size and fit under the cap.
    #[default]
    Auto,
    Exact,
    Entropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportConfig {
    /// CSV point clouds, relative to the config file. Without them the
    /// `w2` pipeline compares the coupled solution laws of the model.
    #[serde(default)]
    pub a: Option<PathBuf>,
    #[serde(default)]
    pub b: Option<PathBuf>,
    #[serde(default)]
    pub method: TransportMethodChoice,
    /// Entropic regularization as a fraction of the median pairwise cost.
    #[serde(default = "default_epsilon_factor")]
    pub epsilon_factor: f64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self { a: None, b: None, method: TransportMethodChoice::Auto, epsilon_factor: default_epsilon_factor() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReprConfig {
    #[serde(default = "default_case")]
    pub case: MartingaleCase,
    /// Basis motions used as integrators; at least the case needs.
    #[serde(default)]
    pub basis: Option<usize>,
    /// Motions entering the features; defaults to `basis`.
    #[serde(default)]
    pub vars: Option<usize>,
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Significance level of the martingale and consistency tests.
    #[serde(default = "default_test_alpha")]
    pub alpha: f64,
    #[serde(default = "default_span_degrees")]
    pub span_degrees: Vec<usize>,
}

impl Default for ReprConfig {
    fn default() -> Self {
        Self {
            case: default_case(),
            basis: None,
            vars: None,
            degree: default_degree(),
            alpha: default_test_alpha(),
            span_degrees: default_span_degrees(),
        }
    }
}

impl ReprConfig {
    /// Two motions unless configured, so that the consistency check has a
    /// coarser fit to compare against.
    pub fn basis(&self) -> usize {
        self.basis.unwrap_or(2).max(self.case.motions_used())
    }

    pub fn vars(&self) -> usize {
        self.vars.unwrap_or_else(|| self.basis())
    }
}

fn zero_drift() -> DriftSpec {
    DriftSpec::Zero
}
fn default_replicas() -> u32 {
    1000
}
fn default_resamples() -> usize {
    Bootstrap::default().resamples
}
fn default_level() -> f64 {
    Bootstrap::default().level
}
fn default_alphas() -> Vec<f64> {
    vec![1.2, 1.5, 1.8]
}
fn default_a_points() -> usize {
    21
}
fn default_r_points() -> usize {
    12
}
fn default_epsilon_factor() -> f64 {
    1e-3
}
fn default_case() -> MartingaleCase {
    MartingaleCase::Quadratic
}
fn default_degree() -> usize {
    2
}
fn default_test_alpha() -> f64 {
    0.01
}
fn default_span_degrees() -> Vec<usize> {
    vec![0, 1, 2, 3]
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<u32>,
    pub out: Option<PathBuf>,
    pub mode: Option<TciMode>,
    pub case: Option<MartingaleCase>,
}

/// A validated configuration together with what was derived from it.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub path: PathBuf,
    /// SHA-256 of the file bytes.
    pub sha256: String,
    pub grid: Grid,
    pub lipschitz: LipschitzData,
    pub mode: TciMode,
}

impl LoadedConfig {
    pub fn bootstrap(&self) -> Bootstrap {
        Bootstrap {
            resamples: self.config.bootstrap.resamples,
            seed: self.config.seed,
            level: self.config.bootstrap.level,
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.config.out.clone().unwrap_or_else(|| PathBuf::from("spdelab-out"))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }

    pub fn cloud_paths(&self) -> Option<(PathBuf, PathBuf)> {
        let t = &self.config.transport;
        Some((self.resolve(t.a.as_ref()?), self.resolve(t.b.as_ref()?)))
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    serde_json::from_str(text).map_err(|e| anyhow::anyhow!("config parse error: {e}"))
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<LoadedConfig> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let text = std::str::from_utf8(&bytes)
        .with_context(|| format!("config {} is not UTF-8", path.display()))?;
    let mut config = parse_config(text).with_context(|| path.display().to_string())?;
    apply(&mut config, overrides);
    let (grid, lipschitz) = validate(&config)?;
    let mode = config.mode.unwrap_or(if is_unit_noise(&config.model.sigma) {
        TciMode::Sup
    } else {
        TciMode::L2
    });
    Ok(LoadedConfig {
        config,
        path: path.to_path_buf(),
        sha256: crate::manifest::sha256_hex(&bytes),
        grid,
        lipschitz,
        mode,
    })
}

fn apply(config: &mut ExperimentConfig, o: &Overrides) {
    if let Some(s) = o.seed {
        config.seed = s;
    }
    if let Some(r) = o.replicas {
        config.replicas = r;
    }
    if let Some(out) = &o.out {
        config.out = Some(out.clone());
    }
    if let Some(m) = o.mode {
        config.mode = Some(m);
    }
    if let Some(c) = &o.case {
        config.repr.case = c.clone();
    }
}

pub fn is_unit_noise(sigma: &NoiseCoefficient) -> bool {
    *sigma == NoiseCoefficient::Constant { value: 1.0 }
}

/// Field-level checks beyond what the types enforce.
pub fn validate(config: &ExperimentConfig) -> Result<(Grid, LipschitzData)> {
    let g = &config.grid;
    let grid = Grid::new(g.horizon, g.length, g.nt, g.nx).map_err(|e| anyhow::anyhow!("grid: {e}"))?;
    let lipschitz = config.model.validate(&grid).map_err(|e| anyhow::anyhow!("model: {e}"))?;
    if config.replicas == 0 {
        bail!("replicas must be ≥ 1");
    }
    let b = &config.bootstrap;
    if b.resamples < 2 {
        bail!("bootstrap.resamples must be ≥ 2, got {}", b.resamples);
    }
    if !(b.level > 0.0 && b.level < 1.0) {
        bail!("bootstrap.level must lie in (0, 1), got {}", b.level);
    }
    if config.constants.alphas.is_empty() {
        bail!("constants.alphas must not be empty");
    }
    for &a in &config.constants.alphas {
        if !(a > 1.0 && a < 2.0) {
            bail!("constants.alphas: every α must lie in (1, 2), got {a}");
        }
    }
    let c = &config.concentration;
    if c.a_points < 2 {
        bail!("concentration.a_points must be ≥ 2, got {}", c.a_points);
    }
    if c.r_points < 1 {
        bail!("concentration.r_points must be ≥ 1, got {}", c.r_points);
    }
    let t = &config.transport;
    if !(t.epsilon_factor > 0.0 && t.epsilon_factor.is_finite()) {
        bail!("transport.epsilon_factor must be > 0, got {}", t.epsilon_factor);
    }
    if t.a.is_some() != t.b.is_some() {
        bail!("transport.a and transport.b must be given together");
    }
    let r = &config.repr;
    if let MartingaleCase::Linear { weights } = &r.case {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
            bail!("repr.case.weights must be a non-empty list of finite numbers");
        }
    }
    if r.basis() > g.nx {
        bail!("repr.basis must be ≤ nx = {}, got {}", g.nx, r.basis());
    }
    if r.vars() == 0 || r.vars() > r.basis() {
        bail!("repr.vars must lie in 1..={}, got {}", r.basis(), r.vars());
    }
    if r.degree > 6 {
        bail!("repr.degree must be ≤ 6, got {}", r.degree);
    }
    if !(r.alpha > 0.0 && r.alpha < 1.0) {
        bail!("repr.alpha must lie in (0, 1), got {}", r.alpha);
    }
    if r.span_degrees.iter().any(|&d| d > 6) {
        bail!("repr.span_degrees must all be ≤ 6");
    }
    Ok((grid, lipschitz))
}
