//! Dispatch from a validated configuration to the core experiments.

use std::sync::Arc;

use meanfield_core::controls::{FeedbackPolicy, PlayerStrategy, PolicyClass, StrategyProfile};
use meanfield_core::experiments::{
    run_chaos_rate, run_limit_experiment, run_moment_table, run_pathwise_propagation, RateRow, RateTable,
};
use meanfield_core::game::{converse_equilibrium, converse_profile, nash_gap, MonteCarlo, Search, ValueEstimate};
use meanfield_core::measures::wasserstein_clouds;
use meanfield_core::mfg::{
    consistency_residual, consistency_residual_with, example33_strong_solutions, example33_weak,
    example33_weak_solution, gaussian_flow, solve_strong_mfg, BranchControl, FixedPointOptions, SolutionSampler,
};
use meanfield_core::model::{validate_coefficients, CoefficientBundle, Probe};
use meanfield_core::particle::{sample_noise, simulate_nplayer, AgentControl};
use meanfield_core::rng::derive_seed;
use meanfield_core::{Result, TimeGrid};
use rayon::prelude::*;

use crate::config::{Experiment, RunConfig, Thresholds};

/// Pass/fail verdict of one configured threshold.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Everything an experiment emits: named CSV files, summary values and
/// threshold verdicts.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub values: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl Outcome {
    fn value(&mut self, key: impl Into<String>, value: impl ToString) {
        self.values.push((key.into(), value.to_string()));
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub(crate) fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

struct Context<'a> {
    config: &'a RunConfig,
    bundle: Arc<CoefficientBundle>,
    grid: TimeGrid,
    seed: u64,
}

impl Context<'_> {
    fn mc(&self) -> MonteCarlo {
        MonteCarlo::new(self.config.mc.replications, self.config.grid.steps, self.seed)
    }

    fn search(&self, label: &str, index: u64) -> Search {
        Search {
            method: self.config.search.method,
            budget: self.config.search.budget,
            seed: derive_seed(self.seed, label, &[index]),
        }
    }

    fn class(&self) -> PolicyClass {
        PolicyClass::from(&self.config.policy_class)
    }

    fn profile_family(&self) -> impl Fn(usize) -> Result<StrategyProfile> + Sync {
        let policy = FeedbackPolicy::from(&self.config.profile());
        move |n| StrategyProfile::symmetric(n, PlayerStrategy::Feedback(policy.clone()))
    }

    fn weak_sampler(&self) -> Result<(meanfield_core::mfg::MfgSolution, SolutionSampler)> {
        let weak = example33_weak(self.config.scenario.sigma(), self.grid, self.config.mfg.particles)?;
        Ok((weak.clone(), SolutionSampler::new(self.bundle.clone(), weak)))
    }
}

pub fn run_experiment(config: &RunConfig) -> Result<Outcome> {
    let bundle = Arc::new(config.scenario.build()?);
    let grid = TimeGrid::new(bundle.horizon, config.grid.steps)?;
    let ctx = Context {
        config,
        bundle,
        grid,
        seed: config.mc.seed,
    };
    let mut out = Outcome::default();
    match config.experiment {
        Experiment::Validate => validate(&ctx, &mut out)?,
        Experiment::Simulate => simulate(&ctx, &mut out)?,
        Experiment::NashGap => nash(&ctx, &mut out)?,
        Experiment::MfgSolve => mfg_solve(&ctx, &mut out)?,
        Experiment::Example33 => example33(&ctx, &mut out)?,
        Experiment::ChaosRate => {
            let table = run_chaos_rate(&ctx.bundle, &ctx.profile_family(), &config.n_list, &ctx.mc())?;
            rate_outputs("chaos_rate", &table, &config.thresholds, &mut out);
        }
        Experiment::Propagation => {
            let (_, sampler) = ctx.weak_sampler()?;
            let table = run_pathwise_propagation(&ctx.bundle, Arc::new(sampler), &config.n_list, &ctx.mc())?;
            rate_outputs("propagation", &table, &config.thresholds, &mut out);
        }
        Experiment::Limit => limit(&ctx, &mut out)?,
        Experiment::Wasserstein => wasserstein(&ctx, &mut out)?,
        Experiment::Converse => converse(&ctx, &mut out)?,
    }
    Ok(out)
}

fn rate_outputs(name: &str, table: &RateTable, th: &Thresholds, out: &mut Outcome) {
    out.files.push((format!("{name}.csv"), table.to_csv()));
    out.files.push((format!("{name}_plot.csv"), table.plot_data()));
    out.value("fitted_slope", num(table.fitted_slope));
    out.value("fitted_intercept", num(table.fitted_intercept));
    out.value("r_squared", num(table.r_squared));
    let e = table.estimates();
    if let Some(max) = th.max_slope {
        out.check("fitted slope", table.fitted_slope <= max, format!("{:.4} <= {max}", table.fitted_slope));
    }
    if let Some(min) = th.min_r_squared {
        out.check("r squared", table.r_squared >= min, format!("{:.4} >= {min}", table.r_squared));
    }
    if th.strictly_decreasing == Some(true) {
        let ok = e.windows(2).all(|w| w[1] < w[0]);
        out.check("strictly decreasing", ok, format!("{e:.4?}"));
    }
    if let Some(k) = th.monotone_stderrs {
        let ok = table
            .rows
            .windows(2)
            .all(|w| w[1].estimate <= w[0].estimate + k * w[0].stderr.max(w[1].stderr));
        out.check("nonincreasing up to stderrs", ok, format!("{e:.4?} with tolerance {k} stderr"));
    }
    if let Some(decay) = th.min_decay {
        let (first, last) = (e[0], e[e.len() - 1]);
        out.check("decay", last < first / decay, format!("{last:.4} < {first:.4} / {decay}"));
    }
    if let Some(max) = th.max_ratio {
        let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.check("max/min ratio", hi / lo <= max, format!("{:.4} <= {max}", hi / lo));
    }
}

fn validate(ctx: &Context<'_>, out: &mut Outcome) -> Result<()> {
    let probe = Probe {
        samples: ctx.config.mc.replications,
        radius: 1.0,
        seed: ctx.seed,
    };
    let report = validate_coefficients(&ctx.bundle, probe)?;
    out.files.push((
        "validation.csv".into(),
        csv(
            &["condition", "verdict"],
            report
                .checks
                .iter()
                .map(|c| [format!("{:?}", c.condition), format!("{:?}", c.verdict)]),
        ),
    ));
    out.value("c1", num(report.fitted.c1));
    out.value("c2", num(report.fitted.c2));
    out.value("c3", num(report.fitted.c3));
    out.value("lipschitz_estimate", num(report.lipschitz_estimate));
    out.value("growth_violations", report.growth_violations);
    out.value("coercivity_margin", num(report.coercivity_margin));
    out.check("all conditions", report.passed(), format!("{} probe points", report.samples));
    Ok(())
}

fn simulate(ctx: &Context<'_>, out: &mut Outcome) -> Result<()> {
    let family = ctx.profile_family();
    let table = run_moment_table(&ctx.bundle, &family, &ctx.config.n_list, &ctx.mc())?;
    let mut rows = Vec::new();
    for &n in &ctx.config.n_list {
        let noise = sample_noise(&ctx.bundle, n, ctx.grid.steps(), derive_seed(ctx.seed, "simulate", &[n as u64]))?;
        let traj = simulate_nplayer(&ctx.bundle, &family(n)?, &noise)?;
        for (k, cloud) in traj.flow.clouds().iter().enumerate() {
            rows.push([n.to_string(), k.to_string(), num(ctx.grid.time(k)), num(cloud.mean()[0]), num(cloud.moment(2.0))]);
        }
    }
    out.files.push(("paths.csv".into(), csv(&["n", "step", "t", "mean", "second_moment"], rows)));
    rate_outputs("moments", &table, &ctx.config.thresholds, out);
    Ok(())
}

fn nash(ctx: &Context<'_>, out: &mut Outcome) -> Result<()> {
    let family = ctx.profile_family();
    let class = ctx.class();
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &n in &ctx.config.n_list {
        let mc = MonteCarlo {
            seed: derive_seed(ctx.seed, "nash-gap", &[n as u64]),
            ..ctx.mc()
        };
        let report = nash_gap(&ctx.bundle, &family(n)?, &class, &ctx.search("nash-gap-search", n as u64), &mc)?;
        worst = worst.max(report.max_gap());
        for (j, &i) in report.players.iter().enumerate() {
            rows.push([
                n.to_string(),
                i.to_string(),
                num(report.per_player_gap[j]),
                num(report.raw_gap[j]),
                num(report.stderrs[j]),
                num(report.best_values[j].mean),
                num(report.profile_values[j].mean),
                report.best_responses[j].describe(),
            ]);
        }
    }
    out.files.push((
        "nash_gap.csv".into(),
        csv(
            &["n", "player", "gap", "raw_gap", "stderr", "best_value", "profile_value", "best_response"],
            rows,
        ),
    ));
    out.value("policy_class", class.describe());
    out.value("max_gap", num(worst));
    if let Some(max) = ctx.config.thresholds.max_gap {
        out.check("max gap", worst <= max, format!("{worst:.4} <= {max}"));
    }
    Ok(())
}

fn mfg_solve(ctx: &Context<'_>, out: &mut Outcome) -> Result<()> {
    let cfg = &ctx.config.mfg;
    let class = ctx.class();
    let mut residual_rows = Vec::new();
    let mut mean_rows = Vec::new();
    for (i, &slope) in cfg.starts.iter().enumerate() {
        let scenario = &ctx.config.scenario;
        let init = gaussian_flow(ctx.grid, cfg.particles, |t| slope * t, |t| scenario.free_sd(t))?;
        let opts = FixedPointOptions {
            max_iterations: cfg.max_iterations,
            damping: cfg.damping,
            tolerance: cfg.tolerance,
            search_agents: cfg.search_agents,
            mc: MonteCarlo::new(cfg.particles, ctx.grid.steps(), derive_seed(ctx.seed, "mfg-solve", &[i as u64])),
        };
        let (solution, trace) = solve_strong_mfg(&ctx.bundle, &init, &class, &ctx.search("mfg-search", i as u64), &opts)?;
        for (it, (r, u)) in trace.residual_history.iter().zip(&trace.update_history).enumerate() {
            residual_rows.push([i.to_string(), num(slope), it.to_string(), num(*r), num(*u), trace.policies[it].clone()]);
        }
        let flow = solution.flow(0);
        for (k, cloud) in flow.clouds().iter().enumerate() {
            mean_rows.push([i.to_string(), num(slope), k.to_string(), num(ctx.grid.time(k)), num(cloud.mean()[0])]);
        }
        let end = flow.terminal().mean()[0];
        let residual = *trace.residual_history.last().expect("at least one iteration");
        let policy = trace.policies.last().cloned().unwrap_or_default();
        out.value(format!("start {slope}: terminal mean"), num(end));
        out.value(format!("start {slope}: residual"), num(residual));
        out.value(format!("start {slope}: iterations"), trace.iterations);
        out.value(format!("start {slope}: policy"), policy);
        out.check(
            format!("start {slope}: converged"),
            trace.converged && residual < cfg.tolerance,
            format!("residual {residual:.4} < {} after {} iterations", cfg.tolerance, trace.iterations),
        );
        if let (Some(expected), Some(tol)) = (&cfg.expected, ctx.config.thresholds.mean_tolerance) {
            let target = expected[i];
            out.check(
                format!("start {slope}: terminal mean"),
                (end - target).abs() <= tol,
                format!("|{end:.4} - {target}| <= {tol}"),
            );
        }
    }
    out.files.push((
        "mfg_residuals.csv".into(),
        csv(&["start", "slope", "iteration", "residual", "update", "policy"], residual_rows),
    ));
    out.files.push(("mfg_means.csv".into(), csv(&["start", "slope", "step", "t", "mean"], mean_rows)));
    Ok(())
}

fn example33(ctx: &Context<'_>, out: &mut Outcome) -> Result<()> {
    let cfg = &ctx.config.mfg;
    let th = &ctx.config.thresholds;
    let sigma = ctx.config.scenario.sigma();
    let residual_mc = |label: &str, i: usize| MonteCarlo::new(cfg.particles, ctx.grid.steps(), derive_seed(ctx.seed, label, &[i as u64]));
    let mut strong_rows = Vec::new();
    let mut strong_means = Vec::new();
    for (i, (flow, policy)) in example33_strong_solutions(sigma, ctx.grid, cfg.particles)?.iter().enumerate() {
        let residual = consistency_residual(&ctx.bundle, flow, policy, &residual_mc("strong", i))?;
        let end = flow.terminal().mean()[0];
        strong_means.push(end);
        strong_rows.push([policy.describe(), num(end), num(residual)]);
        out.check(format!("strong {i}: residual"), residual < cfg.tolerance, format!("{residual:.4} < {}", cfg.tolerance));
    }
    out.files.push(("strong.csv".into(), csv(&["policy", "terminal_mean", "residual"], strong_rows)));

    let weak = example33_weak(sigma, ctx.grid, cfg.particles)?;
    let draws = ctx.config.mc.replications;
    let plus = (0..draws)
        .into_par_iter()
        .map(|r| example33_weak_solution(&weak, derive_seed(ctx.seed, "weak-draw", &[r as u64])).map(|d| d.gamma > 0.0))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|p| *p)
        .count();
    let freq_plus = plus as f64 / draws as f64;
    out.value("draws", draws);
    out.value("frequency_plus", num(freq_plus));
    if let Some(tol) = th.frequency_tolerance {
        out.check("branch frequency", (freq_plus - 0.5).abs() <= tol, format!("|{freq_plus:.4} - 0.5| <= {tol}"));
    }
    let mut weak_rows = Vec::new();
    for b in 0..weak.branch_count() {
        let env = weak.branch_environment(b);
        let residual = match weak.branch_control(b) {
            BranchControl::Template(q) => {
                consistency_residual_with(&ctx.bundle, weak.flow(b), AgentControl::Open(&q), &env, &residual_mc("weak", b))?
            }
            BranchControl::Feedback(p) => {
                consistency_residual_with(&ctx.bundle, weak.flow(b), AgentControl::Feedback(&p), &env, &residual_mc("weak", b))?
            }
        };
        let end = weak.flow(b).terminal().mean()[0];
        let gamma = env.label;
        let frequency = if gamma > 0.0 { freq_plus } else { 1.0 - freq_plus };
        let distance = [-2.0f64, 0.0, 2.0].iter().map(|s| (end - s).abs()).fold(f64::INFINITY, f64::min);
        weak_rows.push([b.to_string(), num(gamma), num(env.weight.unwrap_or(f64::NAN)), num(frequency), num(end), num(residual), num(distance)]);
        out.check(format!("branch {gamma}: residual"), residual < cfg.tolerance, format!("{residual:.4} < {}", cfg.tolerance));
        if let Some(tol) = th.mean_tolerance {
            out.check(format!("branch {gamma}: terminal mean"), (end - gamma).abs() <= tol, format!("|{end:.4} - {gamma}| <= {tol}"));
        }
        if let Some(min) = th.min_strong_distance {
            out.check(format!("branch {gamma}: away from strong means"), distance >= min, format!("{distance:.4} >= {min}"));
        }
    }
    out.files.push((
        "weak.csv".into(),
        csv(
            &["branch", "gamma", "weight", "frequency", "terminal_mean", "residual", "strong_distance"],
            weak_rows,
        ),
    ));
    Ok(())
}

fn limit(ctx: &Context<'_>, out: &mut Outcome) -> Result<()> {
    let (weak, sampler) = ctx.weak_sampler()?;
    let sampler = Arc::new(sampler.random_branches(derive_seed(ctx.seed, "limit-branches", &[])));
    let family = |n| converse_profile(sampler.clone(), n);
    let report = run_limit_experiment(&ctx.bundle, &family, &weak, &*sampler, &ctx.config.n_list, &ctx.mc())?;
    let mut rows = Vec::new();
    for row in &report.rows {
        for (b, count) in row.branch_counts.iter().enumerate() {
            rows.push([row.n.to_string(), b.to_string(), num(weak.branch_environment(b).label), count.to_string()]);
        }
    }
    out.files.push(("limit_branches.csv".into(), csv(&["n", "branch", "gamma", "count"], rows)));
    rate_outputs("limit", &report.table, &ctx.config.thresholds, out);
    Ok(())
}

fn wasserstein(ctx: &Context<'_>, out: &mut Outcome) -> Result<()> {
    let family = ctx.profile_family();
    let p = ctx.bundle.exponents.p;
    let rows = ctx
        .config
        .n_list
        .iter()
        .map(|&n| {
            let profile = family(n)?;
            let samples = (0..ctx.config.mc.replications as u64)
                .into_par_iter()
                .map(|r| {
                    let terminal = |label: &str| -> Result<_> {
                        let noise = sample_noise(&ctx.bundle, n, ctx.grid.steps(), derive_seed(ctx.seed, label, &[n as u64, r]))?;
                        Ok(simulate_nplayer(&ctx.bundle, &profile, &noise)?.flow.terminal().clone())
                    };
                    wasserstein_clouds(p, &terminal("wasserstein-a")?, &terminal("wasserstein-b")?)
                })
                .collect::<Result<Vec<f64>>>()?;
            let est = ValueEstimate::from_samples(&samples);
            Ok(RateRow {
                n,
                estimate: est.mean,
                stderr: est.stderr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rate_outputs("wasserstein", &RateTable::new(rows)?, &ctx.config.thresholds, out);
    Ok(())
}

fn converse(ctx: &Context<'_>, out: &mut Outcome) -> Result<()> {
    let (_, sampler) = ctx.weak_sampler()?;
    let sampler = Arc::new(sampler);
    let class = ctx.class();
    let mut rows = Vec::new();
    let mut rate_rows = Vec::new();
    for &n in &ctx.config.n_list {
        let mc = MonteCarlo {
            seed: derive_seed(ctx.seed, "converse", &[n as u64]),
            ..ctx.mc()
        };
        let (_, r) = converse_equilibrium(&ctx.bundle, sampler.clone(), n, &class, &ctx.search("converse-search", n as u64), &mc)?;
        rows.push([
            n.to_string(),
            num(r.epsilon_n),
            num(r.epsilon_raw),
            num(r.epsilon_stderr),
            num(r.distance_to_solution),
            num(r.distance_stderr),
            num(r.value_mean),
            num(r.value_stderr),
        ]);
        rate_rows.push(RateRow {
            n,
            estimate: r.epsilon_n,
            stderr: r.epsilon_stderr,
        });
    }
    out.files.push((
        "converse_report.csv".into(),
        csv(
            &["n", "epsilon", "epsilon_raw", "epsilon_stderr", "distance", "distance_stderr", "value", "value_stderr"],
            rows,
        ),
    ));
    rate_outputs("converse", &RateTable::new(rate_rows)?, &ctx.config.thresholds, out);
    Ok(())
}
