//! Scenario configuration: one TOML file describing the topology source,
//! traffic source, routing-path policy, revenue model, cost rule and
//! experiment parameters. Every random draw is governed by an explicit
//! seed. The schema is documented in the repository README and mirrored by
//! the example files under `configs/`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

/// Environment variable naming the dataset root directory; relative data
/// paths fall back to it when not found next to the config file.
pub const DATA_ROOT_ENV: &str = "DEPLOYGAME_DATA_ROOT";

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Parse(String),
    Invalid(String),
    /// A referenced dataset file is absent.
    DatasetMissing(PathBuf),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "io error: {e}"),
            ConfigError::Parse(msg) => write!(f, "config parse error: {msg}"),
            ConfigError::Invalid(msg) => write!(f, "invalid config: {msg}"),
            ConfigError::DatasetMissing(p) => {
                write!(f, "dataset file not found: {}", p.display())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<std::io::Error> for ConfigError {
    fn from(e: std::io::Error) -> Self {
        ConfigError::Io(e)
    }
}

/// `alpha` accepts a number ≥ 1 or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct AlphaParam(pub f64);

impl<'de> Deserialize<'de> for AlphaParam {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(x) => Ok(AlphaParam(x)),
            Raw::Text(s) if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinite") => {
                Ok(AlphaParam(f64::INFINITY))
            }
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "alpha must be a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub source: TopologySource,
    /// File path for file-backed sources.
    pub path: Option<PathBuf>,
    /// Restrict to the largest connected component after loading.
    #[serde(default)]
    pub largest_component: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologySource {
    EdgeList,
    CaidaAsRel,
    /// Built-in 23-node synthetic research network.
    SyntheticResearch,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    pub source: TrafficSource,
    pub path: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_mean")]
    pub mean: f64,
    #[serde(default = "default_flow_fraction")]
    pub flow_fraction: f64,
}

fn default_seed() -> u64 {
    0
}
fn default_mean() -> f64 {
    1.0
}
fn default_flow_fraction() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrafficSource {
    Gravity,
    Csv,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    #[serde(default = "default_policy")]
    pub policy: PathPolicyKind,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_policy() -> PathPolicyKind {
    PathPolicyKind::Shortest
}
fn default_k() -> usize {
    2
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            policy: default_policy(),
            k: default_k(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathPolicyKind {
    Shortest,
    KShortest,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RevenueSection {
    pub unit_price: f64,
    #[serde(default = "default_alpha")]
    pub alpha: AlphaParam,
    #[serde(default)]
    pub loss_scale: f64,
}

fn default_alpha() -> AlphaParam {
    AlphaParam(f64::INFINITY)
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CostsSection {
    #[serde(default = "default_cost_rule")]
    pub rule: CostRule,
    pub unit_cost: f64,
}

fn default_cost_rule() -> CostRule {
    CostRule::TrafficProportional
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostRule {
    /// `c_i = unit_cost * Σ_{flows through i} w_f`.
    TrafficProportional,
    /// Every on-path ISP pays `unit_cost`.
    Uniform,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FlattenSection {
    pub max_path_len: usize,
}

/// Either an explicit list or a start/stop/step range.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Grid {
    Range { start: f64, stop: f64, step: f64 },
    List(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, ConfigError> {
        match self {
            Grid::List(v) if !v.is_empty() => Ok(v.clone()),
            Grid::List(_) => Err(ConfigError::Invalid("empty grid".into())),
            Grid::Range { start, stop, step } => {
                if *step <= 0.0 || stop < start {
                    return Err(ConfigError::Invalid(format!(
                        "bad grid range {start}..{stop} step {step}"
                    )));
                }
                let mut out = Vec::new();
                let mut x = *start;
                let mut k = 0u32;
                while x <= stop + 1e-12 {
                    out.push(x);
                    k += 1;
                    x = start + f64::from(k) * step;
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Harmonic logit schedule β_t = beta0 / t; used when set.
    pub beta0: Option<f64>,
    /// Fixed logit noise; used when `beta0` is absent.
    pub beta: Option<f64>,
    #[serde(default = "default_init_prob")]
    pub init_deploy_prob: f64,
    pub price_grid: Option<Grid>,
    pub alpha_grid: Option<Vec<AlphaParam>>,
    pub flatten_grid: Option<Vec<usize>>,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    #[serde(default = "default_rounds")]
    pub induction_rounds: usize,
    #[serde(default = "default_samples")]
    pub induction_samples: usize,
}

fn default_replicas() -> usize {
    200
}
fn default_horizon() -> usize {
    500
}
fn default_init_prob() -> f64 {
    0.5
}
fn default_sigma() -> f64 {
    0.3
}
fn default_rounds() -> usize {
    100
}
fn default_samples() -> usize {
    100_000
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            seed: default_seed(),
            replicas: default_replicas(),
            horizon: default_horizon(),
            beta0: None,
            beta: None,
            init_deploy_prob: default_init_prob(),
            price_grid: None,
            alpha_grid: None,
            flatten_grid: None,
            noise_sigma: default_sigma(),
            induction_rounds: default_rounds(),
            induction_samples: default_samples(),
        }
    }
}

/// Top-level scenario configuration.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topology: TopologySection,
    pub traffic: TrafficSection,
    #[serde(default)]
    pub paths: PathsSection,
    pub revenue: RevenueSection,
    pub costs: CostsSection,
    pub flatten: Option<FlattenSection>,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

impl ScenarioConfig {
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.topology.source {
            TopologySource::SyntheticResearch => {}
            _ if self.topology.path.is_none() => {
                return Err(ConfigError::Invalid(
                    "file-backed topology sources need a path".into(),
                ))
            }
            _ => {}
        }
        if self.traffic.source == TrafficSource::Csv && self.traffic.path.is_none() {
            return Err(ConfigError::Invalid("csv traffic needs a path".into()));
        }
        if !(self.traffic.flow_fraction > 0.0 && self.traffic.flow_fraction <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "flow_fraction {} outside (0, 1]",
                self.traffic.flow_fraction
            )));
        }
        if self.paths.policy == PathPolicyKind::KShortest && self.paths.k < 1 {
            return Err(ConfigError::Invalid("k must be at least 1".into()));
        }
        if self.revenue.unit_price < 0.0 || !self.revenue.unit_price.is_finite() {
            return Err(ConfigError::Invalid("unit_price must be >= 0".into()));
        }
        let alpha = self.revenue.alpha.0;
        if alpha.is_nan() || alpha < 1.0 {
            return Err(ConfigError::Invalid("alpha must be >= 1 or \"inf\"".into()));
        }
        if self.revenue.loss_scale < 0.0 || !self.revenue.loss_scale.is_finite() {
            return Err(ConfigError::Invalid("loss_scale must be >= 0".into()));
        }
        if self.costs.unit_cost < 0.0 || !self.costs.unit_cost.is_finite() {
            return Err(ConfigError::Invalid("unit_cost must be >= 0".into()));
        }
        if let Some(flatten) = &self.flatten {
            if flatten.max_path_len < 2 {
                return Err(ConfigError::Invalid(
                    "flatten.max_path_len must be >= 2".into(),
                ));
            }
        }
        if self.experiment.replicas == 0 {
            return Err(ConfigError::Invalid("replicas must be >= 1".into()));
        }
        if let Some(grid) = &self.experiment.price_grid {
            grid.values()?;
        }
        if let Some(alphas) = &self.experiment.alpha_grid {
            if alphas.is_empty() {
                return Err(ConfigError::Invalid("empty alpha grid".into()));
            }
        }
        if let Some(ms) = &self.experiment.flatten_grid {
            if ms.is_empty() || ms.iter().any(|&m| m < 2) {
                return Err(ConfigError::Invalid(
                    "flatten grid entries must be >= 2".into(),
                ));
            }
        }
        Ok(())
    }

    /// Resolves a data path: absolute paths as-is, otherwise relative to
    /// the config file's directory, then to the dataset root environment
    /// directory.
    pub fn resolve_path(
        &self,
        raw: &Path,
        config_dir: Option<&Path>,
    ) -> Result<PathBuf, ConfigError> {
        if raw.is_absolute() {
            return if raw.exists() {
                Ok(raw.to_path_buf())
            } else {
                Err(ConfigError::DatasetMissing(raw.to_path_buf()))
            };
        }
        if let Some(dir) = config_dir {
            let candidate = dir.join(raw);
            if candidate.exists() {
                return Ok(candidate);
            }
        }
        if let Ok(root) = std::env::var(DATA_ROOT_ENV) {
            let candidate = Path::new(&root).join(raw);
            if candidate.exists() {
                return Ok(candidate);
            }
        }
        Err(ConfigError::DatasetMissing(raw.to_path_buf()))
    }
}
