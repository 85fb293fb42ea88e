use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controls::{RelaxedControlPath, StepMeasure, StrategyProfile};
use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;
use crate::measures::{CloudView, PathSample};
use crate::model::CoefficientBundle;
use crate::particle::{sample_noise, simulate_nplayer, MeasureFlow, NoiseBundle, ParticleTrajectories};
use crate::rng::derive_seed;

/// Monte-Carlo budget: replications, time steps and root seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub replications: usize,
    pub steps: usize,
    pub seed: u64,
}

impl MonteCarlo {
    pub fn new(replications: usize, steps: usize, seed: u64) -> Self {
        Self {
            replications,
            steps,
            seed,
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(invalid("monte carlo", "need at least one replication"));
        }
        if self.steps == 0 {
            return Err(invalid("monte carlo", "need at least one time step"));
        }
        Ok(())
    }

    pub fn grid(&self, bundle: &CoefficientBundle) -> Result<TimeGrid> {
        TimeGrid::new(bundle.horizon, self.steps)
    }
}

/// Monte-Carlo estimate of an expectation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValueEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replications: usize,
}

impl ValueEstimate {
    /// Mean and standard error (sample standard deviation over `sqrt(n)`)
    /// of i.i.d. samples.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            stderr,
            replications: n,
        }
    }
}

/// `int_0^T int_A f(t, x_t, mu_t, a) q_t(da) dt + g(x_T, mu_T)` with
/// left-endpoint quadrature on the grid.
pub fn objective_gamma(
    bundle: &CoefficientBundle,
    flow: &MeasureFlow,
    q: &RelaxedControlPath,
    x: &PathSample,
) -> Result<f64> {
    let grid = flow.grid();
    if q.grid() != grid || x.grid() != grid {
        return Err(Error::GridMismatch);
    }
    Ok(gamma_with(
        bundle,
        grid,
        |k| x.value(k),
        |k| flow.cloud(k).view(),
        |k| q.step(k),
    ))
}

pub(crate) fn gamma_with<'a>(
    bundle: &CoefficientBundle,
    grid: TimeGrid,
    state: impl Fn(usize) -> &'a [f64],
    cloud: impl Fn(usize) -> CloudView<'a>,
    control: impl Fn(usize) -> StepMeasure<'a>,
) -> f64 {
    let dt = grid.dt();
    let mut running = 0.0;
    for k in 0..grid.steps() {
        let t = grid.time(k);
        let (x, c, q) = (state(k), cloud(k), control(k));
        let mut v = 0.0;
        for (a, w) in q.iter() {
            v += w * (bundle.running)(t, x, c, a);
        }
        running += v * dt;
    }
    let n = grid.steps();
    running + (bundle.terminal)(state(n), cloud(n))
}

/// Objective of player `i` along a simulated run.
pub fn player_gamma(bundle: &CoefficientBundle, traj: &ParticleTrajectories, i: usize) -> f64 {
    gamma_with(
        bundle,
        traj.grid(),
        |k| traj.state(i, k),
        |k| traj.flow.cloud(k).view(),
        |k| traj.controls[i].step(k),
    )
}

/// Noise for replication group `group` of an experiment keyed by `label`.
pub(crate) fn group_noise(
    bundle: &CoefficientBundle,
    n: usize,
    mc: &MonteCarlo,
    label: &str,
    group: u64,
) -> Result<NoiseBundle> {
    sample_noise(bundle, n, mc.steps, derive_seed(mc.seed, label, &[group]))
}

/// Number of replication groups and strata per group. Replications are
/// rounded up to a whole number of groups.
pub(crate) fn groups(profile: &StrategyProfile, mc: &MonteCarlo) -> (usize, usize) {
    let strata = profile.strata();
    (mc.replications.div_ceil(strata), strata)
}

/// Run `f` on every stratum of every replication group in parallel and
/// return, per group, the weighted average of `f` over the group's strata
/// (each value being a vector of equal length).
pub(crate) fn per_group<F>(
    bundle: &CoefficientBundle,
    profile: &StrategyProfile,
    mc: &MonteCarlo,
    label: &str,
    f: F,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&NoiseBundle) -> Result<Vec<f64>> + Sync,
{
    mc.check()?;
    let (groups, strata) = groups(profile, mc);
    let n = profile.len();
    let grid = mc.grid(bundle)?;
    (0..groups)
        .into_par_iter()
        .map(|g| {
            let base = group_noise(bundle, n, mc, label, g as u64)?;
            let mut acc: Vec<f64> = Vec::new();
            let mut total_w = 0.0;
            for s in 0..strata {
                let env = profile.environment_for((g * strata + s) as u64, grid)?;
                let w = env.weight.unwrap_or(1.0);
                let noise = base.clone().with_environment(env);
                let v = f(&noise)?;
                if acc.is_empty() {
                    acc = vec![0.0; v.len()];
                }
                for (a, x) in acc.iter_mut().zip(&v) {
                    *a += w * x;
                }
                total_w += w;
            }
            acc.iter_mut().for_each(|a| *a /= total_w);
            Ok(acc)
        })
        .collect()
}

/// Monte-Carlo estimate of `J_i` for the profile.
pub fn estimate_value(
    bundle: &CoefficientBundle,
    profile: &StrategyProfile,
    i: usize,
    mc: &MonteCarlo,
) -> Result<ValueEstimate> {
    Ok(estimate_values(bundle, profile, &[i], mc)?[0])
}

/// `J_i` for several players from the same simulations.
pub fn estimate_values(
    bundle: &CoefficientBundle,
    profile: &StrategyProfile,
    players: &[usize],
    mc: &MonteCarlo,
) -> Result<Vec<ValueEstimate>> {
    if let Some(&i) = players.iter().find(|&&i| i >= profile.len()) {
        return Err(invalid("player", format!("{i} out of range")));
    }
    let rows = per_group(bundle, profile, mc, "value", |noise| {
        let traj = simulate_nplayer(bundle, profile, noise)?;
        Ok(players.iter().map(|&i| player_gamma(bundle, &traj, i)).collect())
    })?;
    Ok((0..players.len())
        .map(|j| ValueEstimate::from_samples(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect())
}
