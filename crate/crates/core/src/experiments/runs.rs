use std::sync::Arc;

use serde::Serialize;

use crate::controls::{ControlSampler, EnvironmentSource, StrategyProfile};
use crate::error::{invalid, Error, Result};
use crate::experiments::{RateRow, RateTable};
use crate::game::{converse_profile, per_group, player_triples, solution_triples, MonteCarlo, ValueEstimate};
use crate::measures::{path_transport_cost, truncated_sup_distance, PathMetric, PathTriple};
use crate::mfg::MfgSolution;
use crate::model::CoefficientBundle;
use crate::particle::{sample_noise, simulate_k_modified, simulate_nplayer, simulate_vs_flow, AgentControl};
use crate::rng::derive_seed;

/// Builds the n-player profile of an experiment row.
pub type ProfileFamily<'a> = dyn Fn(usize) -> Result<StrategyProfile> + Sync + 'a;

fn check_n_list(n_list: &[usize], min_n: usize) -> Result<()> {
    if n_list.len() < 2 {
        return Err(invalid("n list", "need at least two values"));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("n list", "must be strictly increasing"));
    }
    if n_list[0] < min_n {
        return Err(invalid("n list", format!("values must be at least {min_n}")));
    }
    Ok(())
}

/// Mean and standard error of a per-group scalar for every `n`.
fn tabulate<F>(n_list: &[usize], mut row: F) -> Result<RateTable>
where
    F: FnMut(usize) -> Result<Vec<f64>>,
{
    let rows = n_list
        .iter()
        .map(|&n| {
            let est = ValueEstimate::from_samples(&row(n)?);
            Ok(RateRow {
                n,
                estimate: est.mean,
                stderr: est.stderr,
            })
        })
        .collect::<Result<_>>()?;
    RateTable::new(rows)
}

fn row_mc(mc: &MonteCarlo, label: &str, n: usize) -> MonteCarlo {
    MonteCarlo {
        seed: derive_seed(mc.seed, label, &[n as u64]),
        ..*mc
    }
}

/// Metric used by the experiments: `d_X` with the diagonal bound for `d_V`
/// taken with exponent `p`.
fn experiment_metric(bundle: &CoefficientBundle) -> PathMetric {
    PathMetric::diagonal(bundle.exponents.p)
}

/// Coupling of the n-player system with its 1-modified version on the same
/// noise (player index 0 is removed from the empirical measure). Each row
/// estimates `E[l^{p'}(mu^{-k}, mu) + ||X^k - Y^{-k,k}||_T^{p'}]`, the
/// first term exactly by the transport simplex on `n - 1` against `n`
/// triples.
pub fn run_chaos_rate(
    bundle: &CoefficientBundle,
    family: &ProfileFamily<'_>,
    n_list: &[usize],
    mc: &MonteCarlo,
) -> Result<RateTable> {
    check_n_list(n_list, 2)?;
    let pp = bundle.exponents.p_prime;
    let metric = experiment_metric(bundle);
    let horizon = bundle.horizon;
    tabulate(n_list, |n| {
        let profile = family(n)?;
        if profile.len() != n {
            return Err(Error::CountMismatch {
                left: profile.len(),
                right: n,
            });
        }
        let rows = per_group(bundle, &profile, &row_mc(mc, "chaos-rate", n), "noise", |noise| {
            let traj = simulate_nplayer(bundle, &profile, noise)?;
            let modified = simulate_k_modified(bundle, &traj, 0, noise)?;
            let full = player_triples(&traj, noise);
            let reduced: Vec<PathTriple> = full[1..]
                .iter()
                .enumerate()
                .map(|(j, t)| PathTriple {
                    w: t.w.clone(),
                    q: t.q.clone(),
                    x: modified.state_path(j + 1),
                })
                .collect();
            let ell = path_transport_cost(pp, metric, &reduced, &full)?;
            let dx = truncated_sup_distance(&full[0].x, &modified.state_path(0), horizon)?;
            Ok(vec![ell + dx.powf(pp)])
        })?;
        Ok(rows.into_iter().map(|r| r[0]).collect())
    })
}

/// Players draw their controls i.i.d. from the solution (per branch) and
/// are coupled on shared noise with representative agents driven by the
/// solution flow. Each row estimates
/// `E[l^{p'}(mu_hat, mu) + ||X^1 - Y^1||_T^{p'}]`, with the unknown branch
/// law `mu` represented by an independent equal-size sample from the
/// solution in the same branch.
pub fn run_pathwise_propagation<S>(
    bundle: &CoefficientBundle,
    solution: Arc<S>,
    n_list: &[usize],
    mc: &MonteCarlo,
) -> Result<RateTable>
where
    S: EnvironmentSource + ControlSampler + 'static,
{
    check_n_list(n_list, 1)?;
    let pp = bundle.exponents.p_prime;
    let metric = experiment_metric(bundle);
    let horizon = bundle.horizon;
    tabulate(n_list, |n| {
        let profile = converse_profile(solution.clone(), n)?;
        let rows = per_group(bundle, &profile, &row_mc(mc, "propagation", n), "noise", |noise| {
            let env = &noise.environment;
            let Some(flow) = env.flow.as_deref() else {
                return Err(invalid("environment", "solution environments must carry the branch flow"));
            };
            let traj = simulate_nplayer(bundle, &profile, noise)?;
            let players = player_triples(&traj, noise);
            let reference_noise = sample_noise(bundle, n, noise.grid().steps(), derive_seed(noise.seed(), "reference", &[]))?;
            let reference = solution_triples(bundle, &*solution, env, &reference_noise)?;
            let ell = path_transport_cost(pp, metric, &players, &reference)?;
            let (y, _) = simulate_vs_flow(bundle, AgentControl::Open(&traj.controls[0]), flow, noise.player(0), env)?;
            let dx = truncated_sup_distance(&players[0].x, &y, horizon)?;
            Ok(vec![ell + dx.powf(pp)])
        })?;
        Ok(rows.into_iter().map(|r| r[0]).collect())
    })
}

/// Branch statistics of one row of the limit experiment.
#[derive(Clone, Debug, Serialize)]
pub struct LimitRow {
    pub n: usize,
    /// Replications classified into each branch.
    pub branch_counts: Vec<usize>,
    /// Terminal empirical means of every replication.
    pub terminal_means: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitReport {
    pub table: RateTable,
    pub rows: Vec<LimitRow>,
}

/// Simulates the given n-player profiles and measures `l_{X,p}` between
/// the players' empirical measure and an independent equal-size sample of
/// the solution. Replications are matched to the branch whose terminal
/// mean is closest to the realised terminal empirical mean (first
/// coordinate).
pub fn run_limit_experiment(
    bundle: &CoefficientBundle,
    equilibria: &ProfileFamily<'_>,
    solution: &MfgSolution,
    sampler: &dyn ControlSampler,
    n_list: &[usize],
    mc: &MonteCarlo,
) -> Result<LimitReport> {
    check_n_list(n_list, 1)?;
    let p = bundle.exponents.p;
    let metric = experiment_metric(bundle);
    let labels: Vec<f64> = (0..solution.branch_count())
        .map(|b| solution.flow(b).terminal().mean()[0])
        .collect();
    let mut rows = Vec::new();
    let table = tabulate(n_list, |n| {
        let profile = equilibria(n)?;
        let out = per_group(bundle, &profile, &row_mc(mc, "limit", n), "noise", |noise| {
            let traj = simulate_nplayer(bundle, &profile, noise)?;
            let players = player_triples(&traj, noise);
            let m = traj.flow.terminal().mean()[0];
            let branch = (0..labels.len())
                .min_by(|&a, &b| (labels[a] - m).abs().total_cmp(&(labels[b] - m).abs()))
                .expect("at least one branch");
            let env = solution.branch_environment(branch);
            let reference_noise = sample_noise(bundle, n, noise.grid().steps(), derive_seed(noise.seed(), "reference", &[]))?;
            let reference = solution_triples(bundle, sampler, &env, &reference_noise)?;
            let cost = path_transport_cost(p, metric, &players, &reference)?;
            Ok(vec![cost.powf(1.0 / p), branch as f64, m])
        })?;
        let mut counts = vec![0usize; labels.len()];
        for r in &out {
            counts[r[1] as usize] += 1;
        }
        rows.push(LimitRow {
            n,
            branch_counts: counts,
            terminal_means: out.iter().map(|r| r[2]).collect(),
        });
        Ok(out.into_iter().map(|r| r[0]).collect())
    })?;
    Ok(LimitReport { table, rows })
}

/// `E ||X^1||_T^p` of the first player for every `n`.
pub fn run_moment_table(
    bundle: &CoefficientBundle,
    family: &ProfileFamily<'_>,
    n_list: &[usize],
    mc: &MonteCarlo,
) -> Result<RateTable> {
    check_n_list(n_list, 1)?;
    let p = bundle.exponents.p;
    let horizon = bundle.horizon;
    tabulate(n_list, |n| {
        let profile = family(n)?;
        let rows = per_group(bundle, &profile, &row_mc(mc, "moments", n), "noise", |noise| {
            let traj = simulate_nplayer(bundle, &profile, noise)?;
            Ok(vec![traj.state_path(0).truncated_sup_norm(horizon).powf(p)])
        })?;
        Ok(rows.into_iter().map(|r| r[0]).collect())
    })
}
