use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controls::{Environment, FeedbackPolicy, PlayerStrategy, PolicyClass, StepMeasure, StrategyProfile};
use crate::error::{invalid, Result};
use crate::game::value::{gamma_with, per_group, player_gamma, MonteCarlo, ValueEstimate};
use crate::measures::{swapped_mean, CloudView};
use crate::model::CoefficientBundle;
use crate::particle::{
    simulate_deviation, simulate_nplayer, simulate_vs_flow, AgentControl, MeasureFlow, NoiseBundle,
    ParticleTrajectories, Stepper,
};
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    /// Exhaustive search over a finite class in enumeration order.
    Grid,
    /// Cross-entropy search over the parameters of a continuous class.
    CrossEntropy,
}

/// Best-response search settings. `budget` caps the number of candidate
/// policies evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Search {
    pub method: SearchMethod,
    pub budget: usize,
    pub seed: u64,
}

impl Search {
    pub fn grid(budget: usize) -> Self {
        Self {
            method: SearchMethod::Grid,
            budget,
            seed: 0,
        }
    }
}

/// Class-relative Nash gaps. Each gap is `max(0, raw)` where `raw` is the
/// paired difference between the best response found and the profile's
/// own value on common noise; the true gap over all admissible controls is
/// at least `raw` minus sampling error, and may be larger.
#[derive(Clone, Debug, Serialize)]
pub struct NashGapReport {
    pub players: Vec<usize>,
    pub per_player_gap: Vec<f64>,
    pub raw_gap: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub policy_class: String,
    #[serde(skip)]
    pub best_responses: Vec<FeedbackPolicy>,
    pub best_values: Vec<ValueEstimate>,
    pub profile_values: Vec<ValueEstimate>,
}

impl NashGapReport {
    pub fn max_gap(&self) -> f64 {
        self.per_player_gap.iter().copied().fold(0.0, f64::max)
    }
}

/// Whether player `i` can deviate without the others' paths changing.
fn isolated_deviation(bundle: &CoefficientBundle, profile: &StrategyProfile, i: usize) -> bool {
    bundle.cloud_free_dynamics
        && profile
            .players
            .iter()
            .enumerate()
            .all(|(j, s)| j == i || !s.reacts_to_cloud())
}

const ONE: [f64; 1] = [1.0];

/// Objective of player `i` after a deviation simulated in isolation.
fn deviation_gamma(
    bundle: &CoefficientBundle,
    base: &ParticleTrajectories,
    i: usize,
    values: &[f64],
    actions: &[f64],
) -> f64 {
    let grid = base.grid();
    let d = bundle.dims.d;
    let k = bundle.action_dim();
    let mut means = vec![0.0; grid.nodes() * d];
    for (step, m) in means.chunks_exact_mut(d).enumerate() {
        swapped_mean(base.flow.cloud(step), i, &values[step * d..(step + 1) * d], m);
    }
    gamma_with(
        bundle,
        grid,
        |s| &values[s * d..(s + 1) * d],
        |s| CloudView::Swapped {
            base: base.flow.cloud(s),
            index: i,
            point: &values[s * d..(s + 1) * d],
            mean: &means[s * d..(s + 1) * d],
        },
        |s| StepMeasure {
            dim: k,
            atoms: &actions[s * k..(s + 1) * k],
            weights: &ONE,
        },
    )
}

/// For one noise realisation: per player in `players`, the profile's value
/// followed by the value of every candidate deviation.
fn deviation_row(
    bundle: &CoefficientBundle,
    profile: &StrategyProfile,
    players: &[usize],
    candidates: &[FeedbackPolicy],
    noise: &NoiseBundle,
) -> Result<Vec<f64>> {
    let base = simulate_nplayer(bundle, profile, noise)?;
    let mut row = Vec::with_capacity(players.len() * (1 + candidates.len()));
    let mut stepper = Stepper::new(bundle);
    let (mut values, mut actions) = (Vec::new(), Vec::new());
    for &i in players {
        row.push(player_gamma(bundle, &base, i));
        let fast = isolated_deviation(bundle, profile, i);
        for c in candidates {
            if fast {
                simulate_deviation(bundle, &base, i, c, noise, &mut stepper, &mut values, &mut actions)?;
                row.push(deviation_gamma(bundle, &base, i, &values, &actions));
            } else {
                let deviated = profile.deviate(i, PlayerStrategy::Feedback(c.clone()));
                let traj = simulate_nplayer(bundle, &deviated, noise)?;
                row.push(player_gamma(bundle, &traj, i));
            }
        }
    }
    Ok(row)
}

/// Per-group rows of [`deviation_row`].
fn deviation_table(
    bundle: &CoefficientBundle,
    profile: &StrategyProfile,
    players: &[usize],
    candidates: &[FeedbackPolicy],
    mc: &MonteCarlo,
) -> Result<Vec<Vec<f64>>> {
    per_group(bundle, profile, mc, "deviation", |noise| {
        deviation_row(bundle, profile, players, candidates, noise)
    })
}

struct Evaluated {
    policy: FeedbackPolicy,
    /// Per-group values of the chosen candidate.
    best: Vec<f64>,
    /// Per-group values of the profile itself.
    baseline: Vec<f64>,
}

fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Index of the largest value; the first one wins exact ties.
fn first_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = j;
        }
    }
    best
}

/// Cross-entropy maximisation of `eval` over `R^dim`. `eval` maps a batch
/// of parameters to per-candidate mean values. Returns the best parameter
/// seen and its batch position data via the closure's side effects.
fn cross_entropy<F>(dim: usize, scale: f64, search: &Search, mut eval: F) -> Result<Vec<f64>>
where
    F: FnMut(&[Vec<f64>]) -> Result<Vec<f64>>,
{
    let budget = search.budget.max(1);
    let population = (budget / 5).clamp(4, 64).min(budget);
    let iterations = (budget / population).max(1);
    let elite = (population / 5).max(2).min(population);
    let mut rng = stream(search.seed, "cross-entropy", &[]);
    let mut mu = vec![0.0; dim];
    let mut sd = vec![scale; dim];
    let mut best_theta = mu.clone();
    let mut best_value = f64::NEG_INFINITY;
    for it in 0..iterations {
        let batch: Vec<Vec<f64>> = (0..population)
            .map(|j| {
                if it == 0 && j == 0 {
                    mu.clone()
                } else {
                    (0..dim)
                        .map(|c| {
                            let z: f64 = rng.sample(StandardNormal);
                            mu[c] + sd[c] * z
                        })
                        .collect()
                }
            })
            .collect();
        let values = eval(&batch)?;
        let mut order: Vec<usize> = (0..batch.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        if values[order[0]] > best_value {
            best_value = values[order[0]];
            best_theta = batch[order[0]].clone();
        }
        for c in 0..dim {
            let m = order[..elite].iter().map(|&j| batch[j][c]).sum::<f64>() / elite as f64;
            let v = order[..elite].iter().map(|&j| (batch[j][c] - m).powi(2)).sum::<f64>() / elite as f64;
            mu[c] = m;
            sd[c] = v.sqrt().max(1e-3 * scale);
        }
    }
    Ok(best_theta)
}

fn search_player(
    bundle: &CoefficientBundle,
    profile: &StrategyProfile,
    i: usize,
    class: &PolicyClass,
    search: &Search,
    mc: &MonteCarlo,
) -> Result<Evaluated> {
    match search.method {
        SearchMethod::Grid => {
            let candidates = class.enumerate(&bundle.actions, bundle.dims.d, search.budget.max(1));
            if candidates.is_empty() {
                return Err(invalid("policy class", "grid search needs a finite class"));
            }
            let rows = deviation_table(bundle, profile, &[i], &candidates, mc)?;
            let means: Vec<f64> = (0..candidates.len()).map(|c| mean(&column(&rows, 1 + c))).collect();
            let best = first_argmax(&means);
            Ok(Evaluated {
                policy: candidates[best].clone(),
                best: column(&rows, 1 + best),
                baseline: column(&rows, 0),
            })
        }
        SearchMethod::CrossEntropy => {
            if class.is_finite() {
                return Err(invalid("policy class", "cross-entropy search needs a continuous class"));
            }
            let k = bundle.action_dim();
            let dim = class.parameter_dim(k, bundle.dims.d);
            let mut best: Option<Evaluated> = None;
            let mut best_mean = f64::NEG_INFINITY;
            let theta = cross_entropy(dim, class.scale(), search, |batch| {
                let candidates: Vec<FeedbackPolicy> = batch.iter().map(|t| class.instantiate(t, k)).collect();
                let rows = deviation_table(bundle, profile, &[i], &candidates, mc)?;
                let means: Vec<f64> = (0..candidates.len()).map(|c| mean(&column(&rows, 1 + c))).collect();
                let j = first_argmax(&means);
                if means[j] > best_mean {
                    best_mean = means[j];
                    best = Some(Evaluated {
                        policy: candidates[j].clone(),
                        best: column(&rows, 1 + j),
                        baseline: column(&rows, 0),
                    });
                }
                Ok(means)
            })?;
            let found = best.expect("at least one batch evaluated");
            debug_assert_eq!(found.policy, class.instantiate(&theta, k));
            Ok(found)
        }
    }
}

/// Best response of player `i` within `class`, evaluated on common random
/// numbers. The returned value is a lower bound on the supremum over all
/// controls, up to sampling error.
pub fn best_response(
    bundle: &CoefficientBundle,
    profile: &StrategyProfile,
    i: usize,
    class: &PolicyClass,
    search: &Search,
    mc: &MonteCarlo,
) -> Result<(FeedbackPolicy, ValueEstimate)> {
    if i >= profile.len() {
        return Err(invalid("player", format!("{i} out of range")));
    }
    let found = search_player(bundle, profile, i, class, search, mc)?;
    Ok((found.policy, ValueEstimate::from_samples(&found.best)))
}

/// Class-relative Nash gaps for every player.
pub fn nash_gap(
    bundle: &CoefficientBundle,
    profile: &StrategyProfile,
    class: &PolicyClass,
    search: &Search,
    mc: &MonteCarlo,
) -> Result<NashGapReport> {
    let players: Vec<usize> = (0..profile.len()).collect();
    nash_gap_for(bundle, profile, &players, class, search, mc)
}

/// Class-relative Nash gaps for a subset of players (for exchangeable
/// profiles one player represents all).
pub fn nash_gap_for(
    bundle: &CoefficientBundle,
    profile: &StrategyProfile,
    players: &[usize],
    class: &PolicyClass,
    search: &Search,
    mc: &MonteCarlo,
) -> Result<NashGapReport> {
    if let Some(&i) = players.iter().find(|&&i| i >= profile.len()) {
        return Err(invalid("player", format!("{i} out of range")));
    }
    let evaluated: Vec<Evaluated> = if search.method == SearchMethod::Grid {
        // One pass over the noise serves every player.
        let candidates = class.enumerate(&bundle.actions, bundle.dims.d, search.budget.max(1));
        if candidates.is_empty() {
            return Err(invalid("policy class", "grid search needs a finite class"));
        }
        let rows = deviation_table(bundle, profile, players, &candidates, mc)?;
        let width = 1 + candidates.len();
        (0..players.len())
            .map(|p| {
                let means: Vec<f64> =
                    (0..candidates.len()).map(|c| mean(&column(&rows, p * width + 1 + c))).collect();
                let best = first_argmax(&means);
                Evaluated {
                    policy: candidates[best].clone(),
                    best: column(&rows, p * width + 1 + best),
                    baseline: column(&rows, p * width),
                }
            })
            .collect()
    } else {
        players
            .iter()
            .map(|&i| search_player(bundle, profile, i, class, search, mc))
            .collect::<Result<_>>()?
    };

    let mut report = NashGapReport {
        players: players.to_vec(),
        per_player_gap: Vec::new(),
        raw_gap: Vec::new(),
        stderrs: Vec::new(),
        policy_class: class.describe(),
        best_responses: Vec::new(),
        best_values: Vec::new(),
        profile_values: Vec::new(),
    };
    for e in evaluated {
        let diff: Vec<f64> = e.best.iter().zip(&e.baseline).map(|(b, a)| b - a).collect();
        let est = ValueEstimate::from_samples(&diff);
        report.raw_gap.push(est.mean);
        report.per_player_gap.push(est.mean.max(0.0));
        report.stderrs.push(est.stderr);
        report.best_values.push(ValueEstimate::from_samples(&e.best));
        report.profile_values.push(ValueEstimate::from_samples(&e.baseline));
        report.best_responses.push(e.policy);
    }
    Ok(report)
}

/// Value of a policy for a representative agent facing a frozen flow,
/// averaged over the agents of `agents` (all of them share `env`).
pub fn value_vs_flow(
    bundle: &CoefficientBundle,
    policy: &FeedbackPolicy,
    flow: &MeasureFlow,
    env: &Environment,
    agents: &NoiseBundle,
) -> Result<Vec<f64>> {
    (0..agents.players())
        .into_par_iter()
        .map(|j| {
            let (x, q) = simulate_vs_flow(bundle, AgentControl::Feedback(policy), flow, agents.player(j), env)?;
            crate::game::objective_gamma(bundle, flow, &q, &x)
        })
        .collect()
}

/// Best response of a representative agent to a frozen flow: the
/// single-agent control problem, searched within `class` with every
/// candidate evaluated on the same agents' noise.
pub fn best_response_vs_flow(
    bundle: &CoefficientBundle,
    flow: &MeasureFlow,
    env: &Environment,
    class: &PolicyClass,
    search: &Search,
    agents: &NoiseBundle,
) -> Result<(FeedbackPolicy, ValueEstimate)> {
    let evaluate = |candidates: &[FeedbackPolicy]| -> Result<Vec<Vec<f64>>> {
        candidates
            .iter()
            .map(|c| value_vs_flow(bundle, c, flow, env, agents))
            .collect()
    };
    match search.method {
        SearchMethod::Grid => {
            let candidates = class.enumerate(&bundle.actions, bundle.dims.d, search.budget.max(1));
            if candidates.is_empty() {
                return Err(invalid("policy class", "grid search needs a finite class"));
            }
            let values = evaluate(&candidates)?;
            let means: Vec<f64> = values.iter().map(|v| mean(v)).collect();
            let best = first_argmax(&means);
            Ok((candidates[best].clone(), ValueEstimate::from_samples(&values[best])))
        }
        SearchMethod::CrossEntropy => {
            let k = bundle.action_dim();
            let dim = class.parameter_dim(k, bundle.dims.d);
            let mut best: Option<(FeedbackPolicy, Vec<f64>)> = None;
            let mut best_mean = f64::NEG_INFINITY;
            cross_entropy(dim, class.scale(), search, |batch| {
                let candidates: Vec<FeedbackPolicy> = batch.iter().map(|t| class.instantiate(t, k)).collect();
                let values = evaluate(&candidates)?;
                let means: Vec<f64> = values.iter().map(|v| mean(v)).collect();
                let j = first_argmax(&means);
                if means[j] > best_mean {
                    best_mean = means[j];
                    best = Some((candidates[j].clone(), values[j].clone()));
                }
                Ok(means)
            })?;
            let (policy, values) = best.expect("at least one batch evaluated");
            Ok((policy, ValueEstimate::from_samples(&values)))
        }
    }
}
