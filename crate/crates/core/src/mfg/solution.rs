use std::sync::Arc;

use rand::Rng;

use crate::controls::{ControlSampler, Environment, EnvironmentSource, FeedbackPolicy, RelaxedControlPath};
use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;
use crate::model::CoefficientBundle;
use crate::particle::{simulate_vs_flow, AgentControl, MeasureFlow, PlayerNoise};
use crate::rng::{derive_seed, stream};

/// How agents of a branch choose their control.
#[derive(Clone, Debug)]
pub enum BranchControl {
    /// A feedback policy run against the branch flow.
    Feedback(FeedbackPolicy),
    /// The same control path for every agent.
    Template(Arc<RelaxedControlPath>),
}

/// One value of the random measure of a weak solution.
#[derive(Clone, Debug)]
pub struct Branch {
    pub label: f64,
    pub weight: f64,
    pub flow: Arc<MeasureFlow>,
    pub control: BranchControl,
}

/// A mean field game solution that can be sampled: a deterministic flow
/// with an optimal policy, or a finite mixture of branch flows each with
/// its own optimal control.
#[derive(Clone, Debug)]
pub enum MfgSolution {
    Strong {
        flow: Arc<MeasureFlow>,
        policy: FeedbackPolicy,
    },
    Weak { branches: Vec<Branch> },
}

/// Conditional expectation of the terminal cloud mean given the flow up to
/// each node: the weighted average over branches whose clouds coincide
/// with branch `b` up to that node. Returns `nodes x d` values.
fn branch_signal(branches: &[Branch], b: usize) -> Vec<f64> {
    let flow = &branches[b].flow;
    let d = flow.dim();
    let nodes = flow.grid().nodes();
    let mut alive: Vec<bool> = vec![true; branches.len()];
    let mut out = Vec::with_capacity(nodes * d);
    for k in 0..nodes {
        for (j, other) in branches.iter().enumerate() {
            if alive[j] && other.flow.cloud(k) != flow.cloud(k) {
                alive[j] = false;
            }
        }
        let total: f64 = branches.iter().zip(&alive).filter(|(_, a)| **a).map(|(br, _)| br.weight).sum();
        for c in 0..d {
            let s: f64 = branches
                .iter()
                .zip(&alive)
                .filter(|(_, a)| **a)
                .map(|(br, _)| br.weight * br.flow.terminal().mean()[c])
                .sum();
            let scale: f64 = branches.iter().map(|br| br.weight * br.flow.terminal().mean()[c].abs()).sum();
            // Cancellation between branches leaves rounding noise, whose sign a
            // sign-type policy would otherwise read.
            let v = s / total;
            out.push(if v.abs() <= 1e-12 * scale / total { 0.0 } else { v });
        }
    }
    out
}

impl MfgSolution {
    pub fn strong(flow: MeasureFlow, policy: FeedbackPolicy) -> Self {
        MfgSolution::Strong {
            flow: Arc::new(flow),
            policy,
        }
    }

    /// Weak solution from branches whose weights sum to one.
    pub fn weak(branches: Vec<Branch>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::Empty("branch list"));
        }
        let total: f64 = branches.iter().map(|b| b.weight).sum();
        if (total - 1.0).abs() > 1e-12 || branches.iter().any(|b| !(b.weight > 0.0)) {
            return Err(invalid("branch weights", format!("must be positive and sum to 1, got {total}")));
        }
        let grid = branches[0].flow.grid();
        if branches.iter().any(|b| b.flow.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(MfgSolution::Weak { branches })
    }

    pub fn grid(&self) -> TimeGrid {
        match self {
            MfgSolution::Strong { flow, .. } => flow.grid(),
            MfgSolution::Weak { branches, .. } => branches[0].flow.grid(),
        }
    }

    pub fn branch_count(&self) -> usize {
        match self {
            MfgSolution::Strong { .. } => 1,
            MfgSolution::Weak { branches, .. } => branches.len(),
        }
    }

    pub fn flow(&self, branch: usize) -> &Arc<MeasureFlow> {
        match self {
            MfgSolution::Strong { flow, .. } => flow,
            MfgSolution::Weak { branches, .. } => &branches[branch].flow,
        }
    }

    /// Draw a branch index from the branch law (deterministic in `seed`).
    pub fn sample_branch(&self, seed: u64) -> usize {
        match self {
            MfgSolution::Strong { .. } => 0,
            MfgSolution::Weak { branches, .. } => {
                let u: f64 = stream(seed, "branch", &[]).random();
                let mut acc = 0.0;
                for (b, br) in branches.iter().enumerate() {
                    acc += br.weight;
                    if u < acc {
                        return b;
                    }
                }
                branches.len() - 1
            }
        }
    }

    /// Environment of branch `branch`: label, flow and the conditional
    /// expectation of the terminal mean as signal.
    pub fn branch_environment(&self, branch: usize) -> Environment {
        match self {
            MfgSolution::Strong { flow, .. } => {
                let mean = flow.terminal().mean().to_vec();
                let signal = mean.repeat(flow.grid().nodes());
                Environment::none()
                    .with_branch(0, mean[0])
                    .with_signal(mean.len(), signal)
                    .with_flow(flow.clone())
            }
            MfgSolution::Weak { branches, .. } => {
                let br = &branches[branch];
                Environment::none()
                    .with_branch(branch, br.label)
                    .with_signal(br.flow.dim(), branch_signal(branches, branch))
                    .with_flow(br.flow.clone())
                    .with_weight(br.weight)
            }
        }
    }

    /// The control agents use in `branch`, as seen by [`BranchControl`].
    pub fn branch_control(&self, branch: usize) -> BranchControl {
        match self {
            MfgSolution::Strong { policy, .. } => BranchControl::Feedback(policy.clone()),
            MfgSolution::Weak { branches, .. } => branches[branch].control.clone(),
        }
    }
}

/// A solution paired with the model it solves, so that feedback policies
/// can be turned into sampled controls.
#[derive(Clone, Debug)]
pub struct SolutionSampler {
    pub bundle: Arc<CoefficientBundle>,
    pub solution: MfgSolution,
    /// Visit every branch in each replication group (weighted) instead of
    /// drawing one branch per group.
    pub stratified: bool,
    /// Root seed of the branch draws when not stratified.
    pub branch_seed: u64,
}

impl SolutionSampler {
    pub fn new(bundle: Arc<CoefficientBundle>, solution: MfgSolution) -> Self {
        Self {
            bundle,
            solution,
            stratified: true,
            branch_seed: 0,
        }
    }

    /// Draw one branch per replication group from the branch law.
    pub fn random_branches(mut self, seed: u64) -> Self {
        self.stratified = false;
        self.branch_seed = seed;
        self
    }
}

impl EnvironmentSource for SolutionSampler {
    fn strata(&self) -> usize {
        if self.stratified {
            self.solution.branch_count()
        } else {
            1
        }
    }

    fn environment(&self, group: u64, stratum: usize, grid: TimeGrid) -> Result<Environment> {
        if grid != self.solution.grid() {
            return Err(Error::GridMismatch);
        }
        if self.stratified {
            return Ok(self.solution.branch_environment(stratum));
        }
        let branch = self.solution.sample_branch(derive_seed(self.branch_seed, "environment", &[group]));
        let mut env = self.solution.branch_environment(branch);
        env.weight = None;
        Ok(env)
    }

    fn describe(&self) -> String {
        match &self.solution {
            MfgSolution::Strong { .. } => "strong solution".to_string(),
            MfgSolution::Weak { branches, .. } => format!("weak solution ({} branches)", branches.len()),
        }
    }
}

impl ControlSampler for SolutionSampler {
    fn sample(
        &self,
        _player: usize,
        env: &Environment,
        noise: PlayerNoise<'_>,
        grid: TimeGrid,
    ) -> Result<RelaxedControlPath> {
        let flow = self.solution.flow(env.branch);
        if flow.grid() != grid {
            return Err(Error::GridMismatch);
        }
        match self.solution.branch_control(env.branch) {
            BranchControl::Template(q) => Ok((*q).clone()),
            BranchControl::Feedback(policy) => {
                let (_, q) = simulate_vs_flow(&self.bundle, AgentControl::Feedback(&policy), flow, noise, env)?;
                Ok(q)
            }
        }
    }

    fn describe(&self) -> String {
        "solution control".to_string()
    }
}
