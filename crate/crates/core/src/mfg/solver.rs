use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controls::{Environment, FeedbackPolicy, PolicyClass};
use crate::error::{invalid, Error, Result};
use crate::game::{best_response_vs_flow, MonteCarlo, Search};
use crate::measures::{wasserstein_clouds, ParticleCloud};
use crate::mfg::MfgSolution;
use crate::model::CoefficientBundle;
use crate::particle::{sample_noise_with, simulate_vs_flow, AgentControl, MeasureFlow, NoiseBundle};
use crate::rng::{derive_seed, stream};

/// Agents `0..noise.players()` of `noise` moving against a frozen flow;
/// returns their empirical flow.
pub fn simulate_agents(
    bundle: &CoefficientBundle,
    control: AgentControl<'_>,
    flow: &MeasureFlow,
    env: &Environment,
    noise: &NoiseBundle,
) -> Result<MeasureFlow> {
    let grid = flow.grid();
    if noise.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let d = bundle.dims.d;
    let paths: Vec<Vec<f64>> = (0..noise.players())
        .into_par_iter()
        .map(|j| Ok(simulate_vs_flow(bundle, control, flow, noise.player(j), env)?.0.values().to_vec()))
        .collect::<Result<_>>()?;
    let clouds = (0..grid.nodes())
        .map(|k| {
            let mut pts = Vec::with_capacity(paths.len() * d);
            for p in &paths {
                pts.extend_from_slice(&p[k * d..(k + 1) * d]);
            }
            ParticleCloud::new(d, pts)
        })
        .collect::<Result<_>>()?;
    MeasureFlow::new(grid, clouds)
}

/// Largest `W_p` distance over grid nodes between two flows.
pub fn flow_distance(p: f64, a: &MeasureFlow, b: &MeasureFlow) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    (0..a.grid().nodes())
        .into_par_iter()
        .map(|k| wasserstein_clouds(p, a.cloud(k), b.cloud(k)))
        .try_reduce(|| 0.0, |x, y| Ok(x.max(y)))
}

fn check_mc(mc: &MonteCarlo, flow: &MeasureFlow) -> Result<()> {
    mc.check()?;
    if mc.steps != flow.grid().steps() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Consistency residual of a flow under a control: simulate
/// `mc.replications` independent agents against the frozen flow and return
/// `max_k W_p(simulated cloud at t_k, flow cloud at t_k)`.
pub fn consistency_residual_with(
    bundle: &CoefficientBundle,
    flow: &MeasureFlow,
    control: AgentControl<'_>,
    env: &Environment,
    mc: &MonteCarlo,
) -> Result<f64> {
    check_mc(mc, flow)?;
    let noise = sample_noise_with(
        bundle,
        mc.replications,
        mc.steps,
        derive_seed(mc.seed, "consistency", &[]),
        true,
    )?;
    let simulated = simulate_agents(bundle, control, flow, env, &noise)?;
    flow_distance(bundle.exponents.p, &simulated, flow)
}

/// [`consistency_residual_with`] for a deterministic flow and a feedback
/// policy; the policy's signal is the flow's terminal mean.
pub fn consistency_residual(
    bundle: &CoefficientBundle,
    flow: &MeasureFlow,
    policy: &FeedbackPolicy,
    mc: &MonteCarlo,
) -> Result<f64> {
    let env = strong_environment(flow);
    consistency_residual_with(bundle, flow, AgentControl::Feedback(policy), &env, mc)
}

fn strong_environment(flow: &MeasureFlow) -> Environment {
    MfgSolution::strong(flow.clone(), FeedbackPolicy::Constant(Vec::new())).branch_environment(0)
}

/// Fixed-point iteration settings. `mc.replications` is the number of
/// particles `M` in the flow; best responses are searched on
/// `search_agents` representative agents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub max_iterations: usize,
    pub damping: f64,
    pub tolerance: f64,
    pub search_agents: usize,
    pub mc: MonteCarlo,
}

impl FixedPointOptions {
    pub fn new(mc: MonteCarlo) -> Self {
        Self {
            max_iterations: 30,
            damping: 0.5,
            tolerance: 0.05,
            search_agents: 256,
            mc,
        }
    }
}

/// Per-iteration record of the fixed-point solver. `residual_history[i]`
/// is the consistency residual of the flow entering iteration `i` under
/// that iteration's best response, measured on independent agents.
#[derive(Clone, Debug, Serialize)]
pub struct FixedPointTrace {
    pub residual_history: Vec<f64>,
    /// Distance between the flow and its re-simulation on the solver's own
    /// agents, before each damped update.
    pub update_history: Vec<f64>,
    pub policies: Vec<String>,
    pub damping: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Picard iteration on the consistency condition: best response to the
/// frozen flow, re-simulation of `M` agents under it, and a damped update
/// replacing each antithetic pair of particles by its re-simulated
/// counterpart with probability `damping`. Stops once the consistency
/// residual is below `tolerance`; otherwise returns the last iterate with
/// `converged = false`.
pub fn solve_strong_mfg(
    bundle: &CoefficientBundle,
    init_flow: &MeasureFlow,
    class: &PolicyClass,
    search: &Search,
    opts: &FixedPointOptions,
) -> Result<(MfgSolution, FixedPointTrace)> {
    let mc = opts.mc;
    check_mc(&mc, init_flow)?;
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(invalid("damping", format!("must lie in (0, 1], got {}", opts.damping)));
    }
    if opts.max_iterations == 0 || opts.search_agents == 0 {
        return Err(invalid("fixed point", "need at least one iteration and one search agent"));
    }
    let p = bundle.exponents.p;
    let m = mc.replications;
    let agents = sample_noise_with(bundle, opts.search_agents, mc.steps, derive_seed(mc.seed, "search-agents", &[]), true)?;
    let particles = sample_noise_with(bundle, m, mc.steps, derive_seed(mc.seed, "particles", &[]), true)?;
    let mut mixing = stream(mc.seed, "damping", &[]);

    let mut flow = init_flow.clone();
    let mut trace = FixedPointTrace {
        residual_history: Vec::new(),
        update_history: Vec::new(),
        policies: Vec::new(),
        damping: opts.damping,
        iterations: 0,
        converged: false,
    };
    let mut policy = FeedbackPolicy::Constant(vec![0.0; bundle.action_dim()]);
    for it in 0..opts.max_iterations {
        let env = strong_environment(&flow);
        let search = Search {
            seed: derive_seed(search.seed, "iteration", &[it as u64]),
            ..*search
        };
        policy = best_response_vs_flow(bundle, &flow, &env, class, &search, &agents)?.0;
        let residual = consistency_residual_with(bundle, &flow, AgentControl::Feedback(&policy), &env, &mc)?;
        trace.iterations += 1;
        trace.residual_history.push(residual);
        trace.policies.push(policy.describe());
        if residual < opts.tolerance {
            trace.converged = true;
            break;
        }
        let fresh = simulate_agents(bundle, AgentControl::Feedback(&policy), &flow, &env, &particles)?;
        trace.update_history.push(flow_distance(p, &fresh, &flow)?);
        let old_len = flow.cloud(0).len();
        if old_len != m {
            // Different particle counts cannot be mixed index-wise; adopt
            // the re-simulated flow outright.
            flow = fresh;
            continue;
        }
        let pairs = m.div_ceil(2);
        let replace: Vec<bool> = (0..pairs).map(|_| mixing.random::<f64>() < opts.damping).collect();
        let d = bundle.dims.d;
        let clouds = flow
            .clouds()
            .iter()
            .zip(fresh.clouds())
            .map(|(old, new)| {
                let mut pts = old.points().to_vec();
                for (j, r) in replace.iter().enumerate() {
                    if *r {
                        let range = 2 * j * d..((2 * j + 2) * d).min(pts.len());
                        pts[range.clone()].copy_from_slice(&new.points()[range]);
                    }
                }
                ParticleCloud::new(d, pts)
            })
            .collect::<Result<_>>()?;
        flow = MeasureFlow::new(flow.grid(), clouds)?;
    }
    Ok((MfgSolution::strong(flow, policy), trace))
}
