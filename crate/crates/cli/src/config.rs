//! Run configuration: TOML text with every table closed to unknown keys.

use std::fmt;
use std::path::PathBuf;

use meanfield_core::controls::{PolicyClassSpec, PolicySpec};
use meanfield_core::game::SearchMethod;
use meanfield_core::model::{scenario_example33, scenario_mean_coupled, CoefficientBundle};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Validate,
    Simulate,
    NashGap,
    MfgSolve,
    Example33,
    ChaosRate,
    Propagation,
    Limit,
    Wasserstein,
    Converse,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Validate => "validate",
            Experiment::Simulate => "simulate",
            Experiment::NashGap => "nash-gap",
            Experiment::MfgSolve => "mfg-solve",
            Experiment::Example33 => "example33",
            Experiment::ChaosRate => "chaos-rate",
            Experiment::Propagation => "propagation",
            Experiment::Limit => "limit",
            Experiment::Wasserstein => "wasserstein",
            Experiment::Converse => "converse",
        }
    }

    /// Preset used when the command is given without `--config`.
    pub fn default_preset(self) -> &'static str {
        match self {
            Experiment::Validate => "validate_example33",
            Experiment::Simulate => "moments_meanfield",
            Experiment::NashGap => "nash_gap_example33",
            Experiment::MfgSolve => "example33_fixed_point",
            Experiment::Example33 => "example33_closed_form",
            Experiment::ChaosRate => "chaos_rate_meanfield",
            Experiment::Propagation => "propagation_example33",
            Experiment::Limit => "limit_example33",
            Experiment::Wasserstein => "wasserstein_meanfield",
            Experiment::Converse => "converse_example33",
        }
    }

    fn needs_weak_example(self) -> bool {
        matches!(
            self,
            Experiment::Example33 | Experiment::Propagation | Experiment::Limit | Experiment::Converse
        )
    }

    fn is_rate(self) -> bool {
        matches!(
            self,
            Experiment::Simulate
                | Experiment::ChaosRate
                | Experiment::Propagation
                | Experiment::Limit
                | Experiment::Wasserstein
                | Experiment::Converse
        )
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    /// Scalar game with drift `a`, `g(x, mu) = x * mean(mu)`, `T = 2`.
    Example33 {
        #[serde(default = "one")]
        sigma: f64,
    },
    /// Scalar game with drift `a + mean(mu)`, `f = -|a|^3`, `T = 1`.
    MeanCoupled {
        #[serde(default = "one")]
        sigma: f64,
    },
}

impl Scenario {
    pub fn build(&self) -> meanfield_core::Result<CoefficientBundle> {
        match *self {
            Scenario::Example33 { sigma } => scenario_example33(sigma),
            Scenario::MeanCoupled { sigma } => scenario_mean_coupled(sigma),
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            Scenario::Example33 { sigma } | Scenario::MeanCoupled { sigma } => sigma,
        }
    }

    /// Standard deviation of the uncontrolled state at time `t`.
    pub fn free_sd(&self, t: f64) -> f64 {
        match *self {
            Scenario::Example33 { sigma } => sigma * t.sqrt(),
            Scenario::MeanCoupled { sigma } => (1.0 + sigma * sigma * t).sqrt(),
        }
    }

    /// Policy used when a run needs a profile and none is configured.
    pub fn default_profile(&self) -> PolicySpec {
        match self {
            Scenario::Example33 { .. } => PolicySpec::Constant { action: vec![1.0] },
            Scenario::MeanCoupled { .. } => PolicySpec::SignThreshold {
                weights: vec![0.0, 0.0, -1.0, 0.0, 0.0],
                direction: vec![1.0],
            },
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_steps")]
    pub steps: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { steps: default_steps() }
    }
}

fn default_steps() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            replications: default_replications(),
            seed: 0,
        }
    }
}

fn default_replications() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    #[serde(default = "default_method")]
    pub method: SearchMethod,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            method: default_method(),
            budget: default_budget(),
        }
    }
}

fn default_method() -> SearchMethod {
    SearchMethod::Grid
}

fn default_budget() -> usize {
    243
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfgConfig {
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_search_agents")]
    pub search_agents: usize,
    /// Slopes of the initial mean paths `slope * t`.
    #[serde(default = "default_starts")]
    pub starts: Vec<f64>,
    /// Expected terminal means, one per start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Vec<f64>>,
}

impl Default for MfgConfig {
    fn default() -> Self {
        Self {
            particles: default_particles(),
            damping: default_damping(),
            max_iterations: default_max_iterations(),
            tolerance: default_tolerance(),
            search_agents: default_search_agents(),
            starts: default_starts(),
            expected: None,
        }
    }
}

fn default_particles() -> usize {
    10_000
}

fn default_damping() -> f64 {
    0.5
}

fn default_max_iterations() -> usize {
    30
}

fn default_tolerance() -> f64 {
    0.05
}

fn default_search_agents() -> usize {
    256
}

fn default_starts() -> Vec<f64> {
    vec![0.5, 0.0, -0.5]
}

/// Pass/fail thresholds; unset entries are not checked.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_r_squared: Option<f64>,
    /// The last estimate must be below the first divided by this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strictly_decreasing: Option<bool>,
    /// Allowed increase between consecutive estimates, in stderrs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotone_stderrs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_strong_distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    pub scenario: Scenario,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default = "default_class")]
    pub policy_class: PolicyClassSpec,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<PolicySpec>,
    #[serde(default)]
    pub mfg: MfgConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn default_n_list() -> Vec<usize> {
    vec![16, 32, 64, 128, 256]
}

fn default_class() -> PolicyClassSpec {
    PolicyClassSpec::Sign
}

/// Malformed text or a value outside its documented range.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("invalid `{field}`: {reason}")]
    Field { field: &'static str, reason: String },
}

fn field(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        reason: reason.into(),
    }
}

const PRESETS: &[(&str, &str)] = &[
    ("example33_fixed_point", include_str!("../presets/example33_fixed_point.toml")),
    ("example33_closed_form", include_str!("../presets/example33_closed_form.toml")),
    ("chaos_rate_meanfield", include_str!("../presets/chaos_rate_meanfield.toml")),
    ("moments_meanfield", include_str!("../presets/moments_meanfield.toml")),
    ("validate_example33", include_str!("../presets/validate_example33.toml")),
    ("nash_gap_example33", include_str!("../presets/nash_gap_example33.toml")),
    ("propagation_example33", include_str!("../presets/propagation_example33.toml")),
    ("limit_example33", include_str!("../presets/limit_example33.toml")),
    ("wasserstein_meanfield", include_str!("../presets/wasserstein_meanfield.toml")),
    ("converse_example33", include_str!("../presets/converse_example33.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.grid.steps < 2 {
            return Err(field("grid.steps", "must be at least 2"));
        }
        if self.mc.replications < 1 {
            return Err(field("mc.replications", "must be at least 1"));
        }
        if self.n_list.is_empty() {
            return Err(field("n_list", "must not be empty"));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(field("n_list", "must be strictly ascending"));
        }
        if self.n_list[0] < 1 {
            return Err(field("n_list", "values must be positive"));
        }
        if self.experiment.is_rate() && self.n_list.len() < 2 {
            return Err(field("n_list", format!("{} needs at least two values", self.experiment)));
        }
        if self.experiment == Experiment::ChaosRate && self.n_list[0] < 2 {
            return Err(field("n_list", "chaos-rate needs at least two players per row"));
        }
        if self.threads == Some(0) {
            return Err(field("threads", "must be at least 1"));
        }
        let sigma = self.scenario.sigma();
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(field("scenario.sigma", "must be finite and nonnegative"));
        }
        if self.search.budget < 1 {
            return Err(field("search.budget", "must be at least 1"));
        }
        let mfg = &self.mfg;
        if mfg.particles < 2 || mfg.particles % 2 == 1 {
            return Err(field("mfg.particles", "must be an even number of at least 2"));
        }
        if !(mfg.damping > 0.0 && mfg.damping <= 1.0) {
            return Err(field("mfg.damping", "must lie in (0, 1]"));
        }
        if mfg.max_iterations < 1 {
            return Err(field("mfg.max_iterations", "must be at least 1"));
        }
        if !(mfg.tolerance > 0.0) {
            return Err(field("mfg.tolerance", "must be positive"));
        }
        if mfg.search_agents < 2 || mfg.search_agents % 2 == 1 {
            return Err(field("mfg.search_agents", "must be an even number of at least 2"));
        }
        if mfg.starts.is_empty() {
            return Err(field("mfg.starts", "must not be empty"));
        }
        if let Some(expected) = &mfg.expected {
            if expected.len() != mfg.starts.len() {
                return Err(field("mfg.expected", "needs one value per start"));
            }
        }
        if let Some(profile) = &self.profile {
            let bundle = self.scenario.build().map_err(|e| field("scenario", e.to_string()))?;
            profile
                .check(bundle.dims.d, bundle.action_dim())
                .map_err(|e| field("profile", e.to_string()))?;
        }
        if self.experiment.needs_weak_example() && !matches!(self.scenario, Scenario::Example33 { .. }) {
            return Err(field("scenario.name", format!("{} runs on example33 only", self.experiment)));
        }
        Ok(())
    }

    pub fn profile(&self) -> PolicySpec {
        self.profile.clone().unwrap_or_else(|| self.scenario.default_profile())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}
