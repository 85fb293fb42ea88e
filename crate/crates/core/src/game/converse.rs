use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::controls::{ControlSampler, Environment, EnvironmentSource, PlayerStrategy, PolicyClass, StrategyProfile};
use crate::error::{invalid, Result};
use crate::game::search::{nash_gap_for, Search};
use crate::game::value::{group_noise, MonteCarlo, ValueEstimate};
use crate::measures::{path_measure_distance, EmpiricalPathMeasure, PathTriple};
use crate::model::CoefficientBundle;
use crate::particle::{simulate_nplayer, simulate_vs_flow, AgentControl, NoiseBundle, ParticleTrajectories};

/// Replication groups used for the distance to the solution; the Nash gap
/// uses all of them.
pub const DISTANCE_REPLICATIONS: usize = 32;

/// Outcome of the converse construction for one `n`.
#[derive(Clone, Debug, Serialize)]
pub struct ConverseReport {
    pub n: usize,
    pub epsilon_n: f64,
    pub epsilon_raw: f64,
    pub epsilon_stderr: f64,
    /// `l_{X,p}` between the players' empirical triple measure and an
    /// independent equal-size sample of the solution in the same branch.
    pub distance_to_solution: f64,
    pub distance_stderr: f64,
    pub value_mean: f64,
    pub value_stderr: f64,
}

/// `(W^i, Lambda^i, X^i)` for every player of a simulated run.
pub fn player_triples(traj: &ParticleTrajectories, noise: &NoiseBundle) -> Vec<PathTriple> {
    (0..traj.players())
        .map(|i| PathTriple {
            w: noise.idiosyncratic_path(i),
            q: traj.controls[i].clone(),
            x: traj.state_path(i),
        })
        .collect()
}

/// Conditionally i.i.d. draws from a solution given its environment: each
/// agent samples its control from `sampler` and moves against the
/// environment's flow on its own noise from `noise`.
pub fn solution_triples(
    bundle: &CoefficientBundle,
    sampler: &dyn ControlSampler,
    env: &Environment,
    noise: &NoiseBundle,
) -> Result<Vec<PathTriple>> {
    let Some(flow) = env.flow.as_deref() else {
        return Err(invalid("environment", "solution sample needs the branch flow"));
    };
    let grid = noise.grid();
    (0..noise.players())
        .into_par_iter()
        .map(|j| {
            let q = sampler.sample(j, env, noise.player(j), grid)?;
            let (x, q) = simulate_vs_flow(bundle, AgentControl::Open(&q), flow, noise.player(j), env)?;
            Ok(PathTriple {
                w: noise.idiosyncratic_path(j),
                q,
                x,
            })
        })
        .collect()
}

/// n-player profile in which player `i` plays the `i`-th control drawn from
/// the solution, with the solution's branch as environment.
pub fn converse_profile<S>(solution: Arc<S>, n: usize) -> Result<StrategyProfile>
where
    S: EnvironmentSource + ControlSampler + 'static,
{
    let sampler: Arc<dyn ControlSampler> = solution.clone();
    let env: Arc<dyn EnvironmentSource> = solution;
    Ok(StrategyProfile::symmetric(n, PlayerStrategy::Sampled(sampler))?.with_environment(env))
}

/// Converse construction: build the profile of sampled solution controls,
/// estimate its class-relative Nash gap (players are exchangeable, so
/// player 0 represents all) and measure how far the players' empirical
/// measure is from the solution.
pub fn converse_equilibrium<S>(
    bundle: &CoefficientBundle,
    solution: Arc<S>,
    n: usize,
    class: &PolicyClass,
    search: &Search,
    mc: &MonteCarlo,
) -> Result<(StrategyProfile, ConverseReport)>
where
    S: EnvironmentSource + ControlSampler + 'static,
{
    mc.check()?;
    let profile = converse_profile(solution.clone(), n)?;
    let gap = nash_gap_for(bundle, &profile, &[0], class, search, mc)?;

    let grid = mc.grid(bundle)?;
    let p = bundle.exponents.p;
    let reps = mc.replications.min(DISTANCE_REPLICATIONS);
    let distances: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let env = profile.environment_for(r, grid)?;
            let noise = group_noise(bundle, n, mc, "converse-players", r)?.with_environment(env.clone());
            let traj = simulate_nplayer(bundle, &profile, &noise)?;
            let players = EmpiricalPathMeasure::new(player_triples(&traj, &noise))?;
            let reference_noise = group_noise(bundle, n, mc, "converse-reference", r)?;
            let reference = EmpiricalPathMeasure::new(solution_triples(bundle, &*solution, &env, &reference_noise)?)?;
            path_measure_distance(p, &players, &reference)
        })
        .collect::<Result<_>>()?;
    let distance = ValueEstimate::from_samples(&distances);

    let report = ConverseReport {
        n,
        epsilon_n: gap.per_player_gap[0],
        epsilon_raw: gap.raw_gap[0],
        epsilon_stderr: gap.stderrs[0],
        distance_to_solution: distance.mean,
        distance_stderr: distance.stderr,
        value_mean: gap.profile_values[0].mean,
        value_stderr: gap.profile_values[0].stderr,
    };
    Ok((profile, report))
}
