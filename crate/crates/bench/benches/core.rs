use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use meanfield_core::controls::{FeedbackPolicy, PlayerStrategy, PolicyClass, RelaxedControlPath, StrategyProfile};
use meanfield_core::game::{nash_gap, MonteCarlo, Search};
use meanfield_core::measures::{control_distance, wasserstein_1d, wasserstein_clouds, ControlMetric, ParticleCloud};
use meanfield_core::model::{scenario_example33, scenario_mean_coupled};
use meanfield_core::particle::{sample_noise, simulate_nplayer};
use meanfield_core::TimeGrid;

// Deterministic scattered points; the benches only need realistic sizes.
fn scatter(n: usize, d: usize, phase: f64) -> Vec<f64> {
    (0..n * d).map(|i| ((i as f64 + phase) * 12.9898).sin() * 3.0).collect()
}

fn transport(c: &mut Criterion) {
    let mut group = c.benchmark_group("wasserstein");
    for n in [16usize, 64, 256] {
        let a = ParticleCloud::new(2, scatter(n, 2, 0.3)).unwrap();
        let b = ParticleCloud::new(2, scatter(n, 2, 7.1)).unwrap();
        group.bench_with_input(BenchmarkId::new("assignment_2d", n), &n, |bench, _| {
            bench.iter(|| wasserstein_clouds(2.0, black_box(&a), black_box(&b)).unwrap())
        });
    }
    let a = scatter(10_000, 1, 0.3);
    let b = scatter(10_000, 1, 7.1);
    group.bench_function("sorted_1d_10000", |bench| bench.iter(|| wasserstein_1d(2.0, black_box(&a), black_box(&b)).unwrap()));

    let grid = TimeGrid::new(1.0, 8).unwrap();
    let control = |phase: f64| {
        let steps = (0..8)
            .map(|k| {
                let atoms = scatter(3, 1, phase + k as f64).iter().map(|x| x / 3.0).collect();
                (atoms, vec![0.2, 0.3, 0.5])
            })
            .collect();
        RelaxedControlPath::new(grid, 1, steps).unwrap()
    };
    let (q1, q2) = (control(0.0), control(5.0));
    group.bench_function("control_exact_24_atoms", |bench| {
        bench.iter(|| control_distance(2.0, black_box(&q1), black_box(&q2), ControlMetric::Exact).unwrap())
    });
    group.finish();
}

fn simulate(c: &mut Criterion) {
    let b = scenario_mean_coupled(1.0).unwrap();
    let policy = FeedbackPolicy::SignThreshold {
        weights: vec![0.0, 0.0, -1.0, 0.0, 0.0],
        direction: vec![1.0],
    };
    let mut group = c.benchmark_group("simulate_nplayer");
    for n in [16usize, 128] {
        let profile = StrategyProfile::symmetric(n, PlayerStrategy::Feedback(policy.clone())).unwrap();
        let noise = sample_noise(&b, n, 200, 1).unwrap();
        group.bench_with_input(BenchmarkId::new("steps_200", n), &n, |bench, _| {
            bench.iter(|| simulate_nplayer(&b, black_box(&profile), black_box(&noise)).unwrap())
        });
    }
    group.finish();
}

fn gaps(c: &mut Criterion) {
    let b = scenario_example33(1.0).unwrap();
    let profile = StrategyProfile::symmetric(4, PlayerStrategy::Feedback(FeedbackPolicy::Constant(vec![1.0]))).unwrap();
    let class = PolicyClass::Sign { direction: None };
    let mut group = c.benchmark_group("nash_gap");
    group.sample_size(10);
    group.bench_function("sign_class_n4", |bench| {
        bench.iter(|| nash_gap(&b, &profile, &class, &Search::grid(243), &MonteCarlo::new(64, 50, 3)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, transport, simulate, gaps);
criterion_main!(benches);
