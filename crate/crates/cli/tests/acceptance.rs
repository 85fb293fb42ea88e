//! End-to-end acceptance suite: one PASS/FAIL line per criterion, nonzero
//! exit if any criterion fails.

use std::fs;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use meanfield_core::controls::{chattering, Environment, FeedbackPolicy, PlayerStrategy, PolicyClass, RelaxedControlPath, StrategyProfile};
use meanfield_core::experiments::{run_chaos_rate, run_moment_table, run_pathwise_propagation};
use meanfield_core::game::{converse_equilibrium, estimate_value, nash_gap, objective_gamma, MonteCarlo, Search, SearchMethod};
use meanfield_core::measures::{control_distance, wasserstein_1d, wasserstein_clouds, ControlMetric, ParticleCloud};
use meanfield_core::mfg::{
    consistency_residual_with, example33_weak, example33_weak_solution, gaussian_flow, solve_strong_mfg, BranchControl,
    FixedPointOptions, SolutionSampler,
};
use meanfield_core::model::{scenario_example33, scenario_mean_coupled, ActionSet, CoefficientBundle, Dims};
use meanfield_core::particle::{sample_noise, simulate_vs_flow, AgentControl, MeasureFlow};
use meanfield_core::{Result, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = (bool, String);

fn toward_origin(n: usize) -> Result<StrategyProfile> {
    StrategyProfile::symmetric(
        n,
        PlayerStrategy::Feedback(FeedbackPolicy::SignThreshold {
            weights: vec![0.0, 0.0, -1.0, 0.0, 0.0],
            direction: vec![1.0],
        }),
    )
}

fn all_plus(n: usize) -> Result<StrategyProfile> {
    StrategyProfile::symmetric(n, PlayerStrategy::Feedback(FeedbackPolicy::Constant(vec![1.0])))
}

fn strong_fixed_points() -> Result<Verdict> {
    let b = scenario_example33(1.0)?;
    let grid = TimeGrid::new(2.0, 200)?;
    let mut ok = true;
    let mut detail = Vec::new();
    for (i, (slope, target)) in [(0.5, 2.0), (0.0, 0.0), (-0.5, -2.0)].into_iter().enumerate() {
        let start = Instant::now();
        let init = gaussian_flow(grid, 10_000, |t| slope * t, |t| t.sqrt())?;
        let opts = FixedPointOptions::new(MonteCarlo::new(10_000, 200, 100 + i as u64));
        let (sol, trace) = solve_strong_mfg(&b, &init, &PolicyClass::Sign { direction: None }, &Search::grid(243), &opts)?;
        let secs = start.elapsed().as_secs_f64();
        let residual = *trace.residual_history.last().unwrap();
        let end = sol.flow(0).terminal().mean()[0];
        ok &= trace.converged && residual < 0.05 && (end - target).abs() <= 0.05 && secs < 60.0;
        detail.push(format!("start {slope}: mean {end:.4} residual {residual:.4} in {secs:.1}s"));
    }
    Ok((ok, detail.join("; ")))
}

fn weak_solution() -> Result<Verdict> {
    let b = scenario_example33(1.0)?;
    let grid = TimeGrid::new(2.0, 200)?;
    let weak = example33_weak(1.0, grid, 10_000)?;
    let mut plus = 0usize;
    for seed in 0..10_000u64 {
        if example33_weak_solution(&weak, seed)?.gamma > 0.0 {
            plus += 1;
        }
    }
    let freq = plus as f64 / 10_000.0;
    let mut ok = (0.485..=0.515).contains(&freq);
    let mut detail = vec![format!("P(gamma=+1) {freq:.4}")];
    for branch in 0..weak.branch_count() {
        let env = weak.branch_environment(branch);
        let BranchControl::Template(q) = weak.branch_control(branch) else { unreachable!("template branches") };
        let mc = MonteCarlo::new(10_000, 200, 200 + branch as u64);
        let residual = consistency_residual_with(&b, weak.flow(branch), AgentControl::Open(&q), &env, &mc)?;
        let end = weak.flow(branch).terminal().mean()[0];
        let distance = [-2.0f64, 0.0, 2.0].iter().map(|s| (end - s).abs()).fold(f64::INFINITY, f64::min);
        ok &= residual < 0.05 && (end - env.label).abs() <= 0.05 && distance >= 0.9;
        detail.push(format!("branch {}: mean {end:.4} residual {residual:.4} distance {distance:.3}", env.label));
    }
    Ok((ok, detail.join("; ")))
}

fn converse_decay() -> Result<Verdict> {
    let start = Instant::now();
    let b = Arc::new(scenario_example33(1.0)?);
    let grid = TimeGrid::new(2.0, 200)?;
    let sampler = Arc::new(SolutionSampler::new(b.clone(), example33_weak(1.0, grid, 1000)?));
    let mut rows = Vec::new();
    for n in [16, 32, 64, 128, 256] {
        let mc = MonteCarlo::new(2000, 200, 300 + n as u64);
        let (_, r) = converse_equilibrium(&b, sampler.clone(), n, &PolicyClass::Sign { direction: None }, &Search::grid(243), &mc)?;
        rows.push((r.epsilon_n, r.epsilon_stderr));
    }
    let secs = start.elapsed().as_secs_f64();
    let monotone = rows.windows(2).all(|w| w[1].0 <= w[0].0 + w[0].1.max(w[1].1));
    let decay = rows[4].0 < rows[0].0 / 3.0;
    let eps: Vec<String> = rows.iter().map(|(e, s)| format!("{e:.4}±{s:.4}")).collect();
    Ok((monotone && decay && secs < 600.0, format!("eps_n {} in {secs:.0}s", eps.join(" "))))
}

fn chaos_rate() -> Result<Verdict> {
    let b = scenario_mean_coupled(1.0)?;
    let table = run_chaos_rate(&b, &toward_origin, &[8, 16, 32, 64, 128, 256], &MonteCarlo::new(500, 200, 400))?;
    let ok = table.fitted_slope <= -0.7 && table.r_squared >= 0.9;
    Ok((ok, format!("slope {:.3} r2 {:.4}", table.fitted_slope, table.r_squared)))
}

fn propagation() -> Result<Verdict> {
    let steps = 50;
    let b = Arc::new(scenario_example33(1.0)?);
    let grid = TimeGrid::new(2.0, steps)?;
    let sampler = Arc::new(SolutionSampler::new(b.clone(), example33_weak(1.0, grid, 2000)?));
    let table = run_pathwise_propagation(&b, sampler, &[16, 32, 64, 128, 256], &MonteCarlo::new(200, steps, 500))?;
    let e = table.estimates();
    let ok = e.windows(2).all(|w| w[1] < w[0]) && e[4] < e[0] / 4.0;
    Ok((ok, format!("{steps} steps, estimates {e:.4?}, first/last {:.2}", e[0] / e[4])))
}

fn permutation_oracle(p: f64, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    fn go(p: f64, a: &[Vec<f64>], b: &[Vec<f64>], used: &mut [bool], i: usize, acc: f64, best: &mut f64) {
        if i == a.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                let d = a[i].iter().zip(&b[j]).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
                go(p, a, b, used, i + 1, acc + d.powf(p), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(p, a, b, &mut vec![false; b.len()], 0, 0.0, &mut best);
    (best / a.len() as f64).powf(1.0 / p)
}

fn transport_oracles() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_1d: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=32);
        let p = [1.0, 1.5, 2.0, 3.0][rng.random_range(0..4)];
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let lp = wasserstein_clouds(p, &ParticleCloud::from_scalars(a.clone())?, &ParticleCloud::from_scalars(b.clone())?)?;
        worst_1d = worst_1d.max((lp - wasserstein_1d(p, &a, &b)?).abs());
    }
    let mut worst_perm: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..=6);
        let d = rng.random_range(1..=3);
        let p = [1.0, 2.0, 3.0][rng.random_range(0..3)];
        let mut gen = || -> Vec<Vec<f64>> { (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect() };
        let (a, b) = (gen(), gen());
        let got = wasserstein_clouds(p, &ParticleCloud::new(d, a.concat())?, &ParticleCloud::new(d, b.concat())?)?;
        worst_perm = worst_perm.max((got - permutation_oracle(p, &a, &b)).abs());
    }
    let mut worst_axiom: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(1..=8);
        let p = rng.random_range(1.0..3.0);
        let mut gen = || ParticleCloud::new(2, (0..2 * n).map(|_| rng.random_range(-3.0..3.0)).collect());
        let (a, b, c) = (gen()?, gen()?, gen()?);
        let ab = wasserstein_clouds(p, &a, &b)?;
        let ba = wasserstein_clouds(p, &b, &a)?;
        let ac = wasserstein_clouds(p, &a, &c)?;
        let bc = wasserstein_clouds(p, &b, &c)?;
        worst_axiom = worst_axiom.max((ab - ba).abs()).max(ac - ab - bc).max(wasserstein_clouds(p, &a, &a)?);
    }
    let ok = worst_1d < 1e-9 && worst_perm < 1e-9 && worst_axiom < 1e-9;
    Ok((ok, format!("max errors: 1d {worst_1d:.1e}, permutation {worst_perm:.1e}, axioms {worst_axiom:.1e}")))
}

fn random_control(rng: &mut ChaCha8Rng, grid: TimeGrid, atoms: usize) -> Result<RelaxedControlPath> {
    let steps = (0..grid.steps())
        .map(|_| {
            let k = rng.random_range(1..=atoms);
            let a: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            (a, raw.iter().map(|w| w / s).collect())
        })
        .collect();
    RelaxedControlPath::new(grid, 1, steps)
}

fn control_metric_bounds() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_order = f64::NEG_INFINITY;
    let mut worst_moment = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let grid = TimeGrid::new(rng.random_range(0.5..2.0), rng.random_range(1..=6))?;
        let p = [1.0, 2.0, 3.0][rng.random_range(0..3)];
        let (q1, q2) = (random_control(&mut rng, grid, 3)?, random_control(&mut rng, grid, 3)?);
        let exact = control_distance(p, &q1, &q2, ControlMetric::Exact)?;
        let diag = control_distance(p, &q1, &q2, ControlMetric::Diagonal)?;
        worst_order = worst_order.max(exact - diag);
        worst_moment = worst_moment.max(exact.powf(p) - 2f64.powf(p - 1.0) * (q1.moment(p) + q2.moment(p)));
    }
    let ok = worst_order <= 1e-9 && worst_moment <= 1e-9;
    Ok((ok, format!("max(exact - diagonal) {worst_order:.2e}, max(d^p - bound) {worst_moment:.2e}")))
}

fn gamma_of(b: &CoefficientBundle, q: &RelaxedControlPath) -> Result<f64> {
    let flow = MeasureFlow::constant(q.grid(), ParticleCloud::from_scalars(vec![0.0])?);
    let noise = sample_noise(b, 1, q.grid().steps(), 0)?;
    let (x, q) = simulate_vs_flow(b, AgentControl::Open(q), &flow, noise.player(0), &Environment::none())?;
    objective_gamma(b, &flow, &q, &x)
}

fn chattering_convergence() -> Result<Verdict> {
    let b = CoefficientBundle::builder("chattering", Dims { d: 1, m: 1, m0: 1 }, 1.0)
        .actions(ActionSet::interval(-1.0, 1.0)?)
        .drift(|_, _, _, a, out| out[0] = a[0])
        .scalar_diffusion(0.0)
        .running(|_, _, _, a| a[0] - a[0] * a[0])
        .terminal(|x, _| x[0].sin())
        .build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let grid = TimeGrid::new(1.0, 10)?;
    let mut ok = true;
    let mut ratios = Vec::new();
    for i in 0..20u64 {
        let q = random_control(&mut rng, grid, 4)?;
        let base = gamma_of(&b, &q)?;
        let coarse = (gamma_of(&b, &chattering(&q, 10, i)?)? - base).abs();
        let fine = (gamma_of(&b, &chattering(&q, 1000, i)?)? - base).abs();
        ok &= fine < 10.0 * coarse;
        ratios.push(fine / coarse);
    }
    let quadratic = CoefficientBundle::builder("quadratic", Dims { d: 1, m: 1, m0: 1 }, 1.5)
        .actions(ActionSet::interval(-1.0, 1.0)?)
        .drift(|_, _, _, a, out| out[0] = a[0])
        .scalar_diffusion(0.0)
        .running(|_, _, _, a| -a[0] * a[0])
        .build()?;
    let grid = TimeGrid::new(1.5, 10)?;
    let uniform = RelaxedControlPath::new(grid, 1, vec![(vec![1.0, -1.0], vec![0.5, 0.5]); 10])?;
    let relaxed = gamma_of(&quadratic, &uniform)?;
    let strict = gamma_of(&quadratic, &chattering(&uniform, 1000, 0)?)?;
    ok &= (relaxed + 1.5).abs() <= 0.015 && (strict + 1.5).abs() <= 0.015;
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok((
        ok,
        format!("max |dGamma(1000)| / |dGamma(10)| {max_ratio:.4}; uniform sign: relaxed {relaxed:.6} chattered {strict:.6} (exact -1.5)"),
    ))
}

fn value_analytics() -> Result<Verdict> {
    let b = scenario_example33(1.0)?;
    let mut ok = true;
    let mut detail = Vec::new();
    for n in [8usize, 64] {
        let exact = 4.0 + 2.0 / n as f64;
        let v = estimate_value(&b, &all_plus(n)?, 0, &MonteCarlo::new(10_000, 200, 900 + n as u64))?;
        ok &= (v.mean - exact).abs() <= 3.0 * v.stderr;
        detail.push(format!("n={n}: {:.4}±{:.4} vs {exact:.4}", v.mean, v.stderr));
    }
    Ok((ok, detail.join("; ")))
}

fn degenerate_game() -> Result<Verdict> {
    let b = CoefficientBundle::builder("no objective", Dims { d: 1, m: 1, m0: 1 }, 1.0)
        .actions(ActionSet::interval(-1.0, 1.0)?)
        .drift(|_, _, cloud, a, out| out[0] = a[0] - cloud.mean()[0])
        .scalar_diffusion(1.0)
        .build()?;
    let profiles = [
        FeedbackPolicy::Constant(vec![0.3]),
        FeedbackPolicy::SignThreshold { weights: vec![0.0, 1.0, -1.0, 1.0, 0.0], direction: vec![1.0] },
        FeedbackPolicy::Affine { intercept: vec![0.1], gain: vec![0.0, 0.5, -0.5, 0.2, 0.0] },
    ];
    let classes = [
        (PolicyClass::Sign { direction: None }, SearchMethod::Grid),
        (PolicyClass::Constant { levels: 5 }, SearchMethod::Grid),
        (PolicyClass::Affine { scale: 1.0 }, SearchMethod::CrossEntropy),
    ];
    let mut checked = 0;
    let mut ok = true;
    for policy in &profiles {
        let profile = StrategyProfile::symmetric(3, PlayerStrategy::Feedback(policy.clone()))?;
        for (class, method) in &classes {
            let search = Search { method: *method, budget: 40, seed: 1 };
            let report = nash_gap(&b, &profile, class, &search, &MonteCarlo::new(20, 20, 2))?;
            ok &= report.per_player_gap.iter().all(|g| *g == 0.0);
            checked += report.per_player_gap.len();
        }
    }
    Ok((ok, format!("{checked} player gaps, all exactly zero: {ok}")))
}

fn moment_stability() -> Result<Verdict> {
    let n_list = [8, 16, 32, 64, 128, 256, 512];
    let mut ok = true;
    let mut detail = Vec::new();
    let cases: [(&str, CoefficientBundle, &(dyn Fn(usize) -> Result<StrategyProfile> + Sync)); 2] = [
        ("signed example, all +1", scenario_example33(1.0)?, &all_plus),
        ("mean-coupled, toward origin", scenario_mean_coupled(1.0)?, &toward_origin),
    ];
    for (name, b, family) in cases {
        let e = run_moment_table(&b, family, &n_list, &MonteCarlo::new(1000, 200, 1100))?.estimates();
        let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = e.iter().copied().fold(0.0, f64::max);
        ok &= hi / lo <= 1.5;
        detail.push(format!("{name}: max/min {:.3}", hi / lo));
    }
    Ok((ok, detail.join("; ")))
}

fn reproducibility() -> Result<Verdict> {
    let dir = std::env::temp_dir().join(format!("meanfield-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    let config = dir.join("config.toml");
    fs::write(
        &config,
        "experiment = \"chaos-rate\"\nn_list = [4, 8, 16, 32]\n\n[scenario]\nname = \"mean_coupled\"\n\n[grid]\nsteps = 40\n\n[mc]\nreplications = 24\nseed = 12\n",
    )
    .unwrap();
    let run = |out: &str, threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_meanfield"))
            .args(["run", "--config", config.to_str().unwrap(), "--threads", threads, "--out"])
            .arg(dir.join(out))
            .output()
            .unwrap()
            .status
            .success()
    };
    let first = run("first", "1");
    let again = Command::new(env!("CARGO_BIN_EXE_meanfield"))
        .args(["run", "--config"])
        .arg(dir.join("first").join("manifest.toml"))
        .arg("--out")
        .arg(dir.join("second"))
        .output()
        .unwrap()
        .status
        .success();
    let third = run("third", "2");
    let mut identical = first && again && third;
    let mut files = 0;
    for file in ["chaos_rate.csv", "chaos_rate_plot.csv"] {
        let a = fs::read(dir.join("first").join(file)).unwrap_or_default();
        identical &= !a.is_empty()
            && a == fs::read(dir.join("second").join(file)).unwrap_or_default()
            && a == fs::read(dir.join("third").join(file)).unwrap_or_default();
        files += 1;
    }
    let _ = fs::remove_dir_all(&dir);
    Ok((identical, format!("{files} CSVs compared across a rerun from the manifest and a different thread count")))
}

fn main() {
    let criteria: [(&str, fn() -> Result<Verdict>); 12] = [
        ("strong fixed points of the signed example", strong_fixed_points),
        ("weak solution of the signed example", weak_solution),
        ("converse approximate equilibria", converse_decay),
        ("k-modified coupling rate", chaos_rate),
        ("pathwise propagation", propagation),
        ("transport oracles", transport_oracles),
        ("relaxed-control metric bounds", control_metric_bounds),
        ("chattering", chattering_convergence),
        ("value analytics", value_analytics),
        ("degenerate game", degenerate_game),
        ("moment stability", moment_stability),
        ("reproducibility", reproducibility),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, check) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        if !ok {
            failed += 1;
        }
        println!(
            "{} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
