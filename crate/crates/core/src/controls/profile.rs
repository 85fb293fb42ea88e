use std::fmt;
use std::sync::Arc;

use crate::controls::{FeedbackPolicy, RelaxedControlPath};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::particle::{MeasureFlow, PlayerNoise};

/// Realisation of whatever randomness is shared by all players beyond the
/// Brownian motions: a branch label and, optionally, a public signal and a
/// reference flow for that branch.
#[derive(Clone, Debug, Default)]
pub struct Environment {
    pub branch: usize,
    pub label: f64,
    /// Weight of this environment within its replication group (stratified
    /// sources); `None` means equal weights.
    pub weight: Option<f64>,
    signal_dim: usize,
    signal: Option<Arc<[f64]>>,
    pub flow: Option<Arc<MeasureFlow>>,
}

impl Environment {
    pub fn none() -> Self {
        Self::default()
    }

    /// Attach a signal given at every grid node (`nodes x dim`, row-major).
    pub fn with_signal(mut self, dim: usize, values: Vec<f64>) -> Self {
        self.signal_dim = dim;
        self.signal = Some(values.into());
        self
    }

    pub fn with_flow(mut self, flow: Arc<MeasureFlow>) -> Self {
        self.flow = Some(flow);
        self
    }

    pub fn with_branch(mut self, branch: usize, label: f64) -> Self {
        self.branch = branch;
        self.label = label;
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = Some(weight);
        self
    }

    /// Signal at node `k` (empty when there is none).
    pub fn signal(&self, k: usize) -> &[f64] {
        match &self.signal {
            Some(s) => &s[k * self.signal_dim..(k + 1) * self.signal_dim],
            None => &[],
        }
    }
}

/// Source of environments for Monte-Carlo replications. Replication `r`
/// uses group `r / strata` and stratum `r % strata`; all strata of a group
/// share the same Brownian noise, so a source with several strata yields
/// stratified (antithetic-in-branch) estimates.
pub trait EnvironmentSource: Send + Sync {
    fn strata(&self) -> usize {
        1
    }

    fn environment(&self, group: u64, stratum: usize, grid: TimeGrid) -> Result<Environment>;

    fn describe(&self) -> String;
}

/// Generator of a player's control from the environment and that player's
/// own noise. Controls drawn this way are fixed processes: they do not
/// react to the other players.
pub trait ControlSampler: Send + Sync {
    fn sample(&self, player: usize, env: &Environment, noise: PlayerNoise<'_>, grid: TimeGrid)
        -> Result<RelaxedControlPath>;

    fn describe(&self) -> String;
}

#[derive(Clone)]
pub enum PlayerStrategy {
    Feedback(FeedbackPolicy),
    Open(Arc<RelaxedControlPath>),
    Sampled(Arc<dyn ControlSampler>),
}

impl fmt::Debug for PlayerStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl PlayerStrategy {
    /// Whether this player's control can change when someone else's state does.
    pub fn reacts_to_cloud(&self) -> bool {
        match self {
            PlayerStrategy::Feedback(p) => p.reads_cloud(),
            PlayerStrategy::Open(_) | PlayerStrategy::Sampled(_) => false,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            PlayerStrategy::Feedback(p) => p.describe(),
            PlayerStrategy::Open(_) => "open-loop".to_string(),
            PlayerStrategy::Sampled(s) => s.describe(),
        }
    }
}

/// One strategy per player plus an optional environment source.
#[derive(Clone)]
pub struct StrategyProfile {
    pub players: Vec<PlayerStrategy>,
    pub environment: Option<Arc<dyn EnvironmentSource>>,
}

impl fmt::Debug for StrategyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StrategyProfile")
            .field("players", &self.players.len())
            .field("environment", &self.environment.as_ref().map(|e| e.describe()))
            .finish()
    }
}

impl StrategyProfile {
    pub fn new(players: Vec<PlayerStrategy>) -> Result<Self> {
        if players.is_empty() {
            return Err(Error::Empty("strategy profile"));
        }
        Ok(Self {
            players,
            environment: None,
        })
    }

    pub fn symmetric(n: usize, strategy: PlayerStrategy) -> Result<Self> {
        Self::new(vec![strategy; n])
    }

    pub fn with_environment(mut self, source: Arc<dyn EnvironmentSource>) -> Self {
        self.environment = Some(source);
        self
    }

    pub fn len(&self) -> usize {
        self.players.len()
    }

    pub fn is_empty(&self) -> bool {
        self.players.is_empty()
    }

    /// Profile with player `i` switched to `strategy`.
    pub fn deviate(&self, i: usize, strategy: PlayerStrategy) -> Self {
        let mut out = self.clone();
        out.players[i] = strategy;
        out
    }

    pub fn strata(&self) -> usize {
        self.environment.as_ref().map_or(1, |e| e.strata().max(1))
    }

    /// Environment for replication `r`.
    pub fn environment_for(&self, r: u64, grid: TimeGrid) -> Result<Environment> {
        match &self.environment {
            None => Ok(Environment::none()),
            Some(src) => {
                let strata = src.strata().max(1) as u64;
                src.environment(r / strata, (r % strata) as usize, grid)
            }
        }
    }
}
