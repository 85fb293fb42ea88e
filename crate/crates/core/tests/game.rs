use std::sync::Arc;

use meanfield_core::controls::{FeedbackPolicy, PlayerStrategy, PolicyClass, RelaxedControlPath, StrategyProfile};
use meanfield_core::game::{
    best_response, best_response_vs_flow, converse_equilibrium, estimate_value, nash_gap, objective_gamma, MonteCarlo,
    Search, SearchMethod,
};
use meanfield_core::measures::PathSample;
use meanfield_core::mfg::{example33_flow, MfgSolution, SolutionSampler};
use meanfield_core::model::{scenario_example33, ActionSet, CoefficientBundle, Dims};
use meanfield_core::particle::{sample_noise_with, MeasureFlow};
use meanfield_core::TimeGrid;

const SCALAR: Dims = Dims { d: 1, m: 1, m0: 1 };

fn zero_objective() -> CoefficientBundle {
    CoefficientBundle::builder("silent", SCALAR, 1.0)
        .actions(ActionSet::interval(-1.0, 1.0).unwrap())
        .drift(|_, _, c, a, out| out[0] = a[0] + c.mean()[0])
        .scalar_diffusion(1.0)
        .build()
        .unwrap()
}

/// `dX = a dt + dW`, reward `-(a - target)^2`, nothing depends on the cloud.
fn decoupled(target: f64) -> CoefficientBundle {
    CoefficientBundle::builder("decoupled", SCALAR, 1.0)
        .actions(ActionSet::interval(-1.0, 1.0).unwrap())
        .drift(|_, _, _, a, out| out[0] = a[0])
        .scalar_diffusion(1.0)
        .running(move |_, _, _, a| -(a[0] - target).powi(2))
        .cloud_free_dynamics(true)
        .build()
        .unwrap()
}

fn constant(n: usize, a: f64) -> StrategyProfile {
    StrategyProfile::symmetric(n, PlayerStrategy::Feedback(FeedbackPolicy::Constant(vec![a]))).unwrap()
}

fn sign_class() -> PolicyClass {
    PolicyClass::Sign { direction: None }
}

#[test]
fn objective_of_zero_rewards_is_zero() {
    let b = zero_objective();
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let flow = example33_flow(0.0, grid, 3, 1.0).unwrap();
    let x = PathSample::from_fn(grid, 1, |t, v| v[0] = t).unwrap();
    let q = RelaxedControlPath::constant(grid, &[0.5]);
    assert_eq!(objective_gamma(&b, &flow, &q, &x).unwrap(), 0.0);
}

#[test]
fn example33_objective_by_substitution() {
    let b = scenario_example33(1.0).unwrap();
    let grid = TimeGrid::new(2.0, 50).unwrap();
    let flow = example33_flow(0.0, grid, 4, 1.0).unwrap();
    let x = PathSample::from_fn(grid, 1, |t, v| v[0] = t).unwrap();
    let q = RelaxedControlPath::constant(grid, &[1.0]);
    assert!((objective_gamma(&b, &flow, &q, &x).unwrap() - 4.0).abs() < 1e-12);
}

#[test]
fn quadratic_running_cost_matches_integral() {
    let b = CoefficientBundle::builder("quadratic", SCALAR, 1.0)
        .actions(ActionSet::interval(-1.0, 1.0).unwrap())
        .running(|_, _, _, a| -a[0] * a[0])
        .build()
        .unwrap();
    let steps = 400;
    let grid = TimeGrid::new(1.0, steps).unwrap();
    let actions = (0..steps).map(|k| grid.time(k)).collect();
    let q = RelaxedControlPath::strict(grid, 1, actions).unwrap();
    let flow = MeasureFlow::constant(grid, meanfield_core::measures::ParticleCloud::from_scalars(vec![0.0]).unwrap());
    let x = PathSample::zeros(grid, 1);
    let gamma = objective_gamma(&b, &flow, &q, &x).unwrap();
    // Integral of -t^2 over [0, 1]; the left-point rule errs by at most dt.
    assert!((gamma + 1.0 / 3.0).abs() < 1.0 / steps as f64);
}

#[test]
fn constant_reward_has_exact_value() {
    let b = CoefficientBundle::builder("constant", SCALAR, 1.5)
        .running(|_, _, _, _| 2.0)
        .scalar_diffusion(1.0)
        .build()
        .unwrap();
    let v = estimate_value(&b, &constant(4, 0.0), 2, &MonteCarlo::new(50, 30, 1)).unwrap();
    assert!((v.mean - 3.0).abs() < 1e-12);
    assert!(v.stderr < 1e-12);
}

#[test]
fn all_plus_one_value_matches_gaussian_covariance() {
    let (sigma, n) = (1.0, 8);
    let b = scenario_example33(sigma).unwrap();
    let v = estimate_value(&b, &constant(n, 1.0), 0, &MonteCarlo::new(4000, 20, 9)).unwrap();
    // X^i_2 = 2 + sigma W^i_2 and the cloud mean is 2 + sigma * average of
    // W^j_2, so E[X^i_2 * mean] = 4 + sigma^2 Cov(W^i_2, avg W_2) = 4 + 2 sigma^2 / n.
    let oracle = 4.0 + sigma * sigma * 2.0 / n as f64;
    assert!((v.mean - oracle).abs() < 3.0 * v.stderr, "{} vs {oracle} ({})", v.mean, v.stderr);
}

#[test]
fn stderr_scales_with_replications() {
    let b = scenario_example33(1.0).unwrap();
    let small = estimate_value(&b, &constant(4, 1.0), 0, &MonteCarlo::new(2000, 10, 3)).unwrap();
    let large = estimate_value(&b, &constant(4, 1.0), 0, &MonteCarlo::new(4000, 10, 4)).unwrap();
    let ratio = large.stderr / small.stderr;
    assert!((ratio - 0.5f64.sqrt()).abs() < 0.3 * 0.5f64.sqrt(), "{ratio}");
}

#[test]
fn value_is_additive_in_the_running_reward() {
    let with = |f: fn(f64) -> f64| {
        CoefficientBundle::builder("mix", SCALAR, 1.0)
            .actions(ActionSet::interval(-1.0, 1.0).unwrap())
            .drift(|_, _, _, a, out| out[0] = a[0])
            .scalar_diffusion(1.0)
            .running(move |_, x, _, _| f(x[0]))
            .build()
            .unwrap()
    };
    let mc = MonteCarlo::new(40, 20, 5);
    let profile = constant(3, 0.3);
    let v1 = estimate_value(&with(|x| x * x), &profile, 1, &mc).unwrap().mean;
    let v2 = estimate_value(&with(|x| x.sin()), &profile, 1, &mc).unwrap().mean;
    let both = estimate_value(&with(|x| x * x + x.sin()), &profile, 1, &mc).unwrap().mean;
    assert!((both - v1 - v2).abs() < 1e-10);
}

#[test]
fn best_response_recovers_pointwise_maximiser() {
    let b = decoupled(0.3);
    let class = PolicyClass::Constant { levels: 21 };
    let (policy, value) = best_response(&b, &constant(3, 0.0), 1, &class, &Search::grid(100), &MonteCarlo::new(8, 10, 2)).unwrap();
    let FeedbackPolicy::Constant(a) = policy else { panic!("constant class") };
    assert!((a[0] - 0.3).abs() < 0.05 + 1e-12);
    assert!(value.mean.abs() < 1e-12);
}

#[test]
fn plus_one_is_optimal_against_flow_ending_at_two() {
    let b = scenario_example33(1.0).unwrap();
    let grid = TimeGrid::new(2.0, 40).unwrap();
    let flow = example33_flow(1.0, grid, 64, 1.0).unwrap();
    let solution = MfgSolution::strong(flow.clone(), FeedbackPolicy::Constant(vec![1.0]));
    let env = solution.branch_environment(0);
    let agents = sample_noise_with(&b, 64, 40, 3, true).unwrap();
    let (policy, value) = best_response_vs_flow(&b, &flow, &env, &sign_class(), &Search::grid(243), &agents).unwrap();
    // With antithetic agents E[x_2] = 2 exactly, so the value is 2 * 2.
    assert!((value.mean - 4.0).abs() < 1e-9);
    assert_eq!(policy, FeedbackPolicy::SignThreshold { weights: vec![1.0, 0.0, 0.0, 0.0, 0.0], direction: vec![1.0] });
}

#[test]
fn ties_go_to_the_first_candidate() {
    let b = zero_objective();
    let (policy, value) = best_response(&b, &constant(2, 0.5), 0, &sign_class(), &Search::grid(243), &MonteCarlo::new(4, 10, 1)).unwrap();
    assert_eq!(value.mean, 0.0);
    assert_eq!(policy, FeedbackPolicy::SignThreshold { weights: vec![0.0; 5], direction: vec![1.0] });
}

#[test]
fn zero_objective_gives_zero_gaps() {
    let b = zero_objective();
    let mc = MonteCarlo::new(6, 10, 4);
    let classes = [sign_class(), PolicyClass::Constant { levels: 5 }, PolicyClass::Affine { scale: 1.0 }];
    for class in classes {
        let search = Search {
            method: if class.is_finite() { SearchMethod::Grid } else { SearchMethod::CrossEntropy },
            budget: 40,
            seed: 1,
        };
        let report = nash_gap(&b, &constant(3, -0.2), &class, &search, &mc).unwrap();
        assert!(report.per_player_gap.iter().all(|g| *g == 0.0), "{report:?}");
        assert!(report.raw_gap.iter().all(|g| *g == 0.0));
    }
}

#[test]
fn decoupled_optimum_has_no_gap() {
    let b = decoupled(0.5);
    let report = nash_gap(&b, &constant(4, 0.5), &PolicyClass::Constant { levels: 21 }, &Search::grid(100), &MonteCarlo::new(20, 10, 7)).unwrap();
    for (g, s) in report.per_player_gap.iter().zip(&report.stderrs) {
        assert!(*g <= 3.0 * s + 1e-12);
    }
}

#[test]
fn idle_profile_in_example33_has_a_positive_gap() {
    let b = scenario_example33(1.0).unwrap();
    let n = 64;
    let mc = MonteCarlo::new(200, 40, 8);
    let report = meanfield_core::game::nash_gap_for(&b, &constant(n, 0.0), &[0], &sign_class(), &Search::grid(243), &mc).unwrap();
    assert!(report.raw_gap[0] > 3.0 * report.stderrs[0], "{report:?}");
    let implied = report.best_values[0].mean - report.profile_values[0].mean;
    assert!((implied - report.raw_gap[0]).abs() < 1e-9);
}

#[test]
fn fast_deviation_path_matches_full_resimulation() {
    // A cloud-reading player elsewhere forces full re-simulation; the
    // cloud-free profile uses the isolated path. Both must agree when the
    // reading player ignores what it reads.
    let b = scenario_example33(1.0).unwrap();
    let ignores = FeedbackPolicy::Parametric {
        name: "reads-but-ignores".into(),
        theta: vec![],
        evaluator: Arc::new(|_: &[f64], _: &meanfield_core::controls::Observation<'_>, out: &mut [f64]| out[0] = 0.5),
        reads_cloud: true,
    };
    let fast = StrategyProfile::symmetric(5, PlayerStrategy::Feedback(FeedbackPolicy::Constant(vec![0.5]))).unwrap();
    let slow = fast.deviate(4, PlayerStrategy::Feedback(ignores));
    let mc = MonteCarlo::new(10, 20, 2);
    let a = meanfield_core::game::nash_gap_for(&b, &fast, &[0], &sign_class(), &Search::grid(243), &mc).unwrap();
    let c = meanfield_core::game::nash_gap_for(&b, &slow, &[0], &sign_class(), &Search::grid(243), &mc).unwrap();
    assert!((a.raw_gap[0] - c.raw_gap[0]).abs() < 1e-9);
    assert_eq!(a.best_responses, c.best_responses);
}

#[test]
fn converse_of_zero_objective_is_exact() {
    let b = Arc::new(zero_objective());
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let flow = example33_flow(1.0, grid, 16, 0.0).unwrap();
    let solution = Arc::new(SolutionSampler::new(b.clone(), MfgSolution::strong(flow, FeedbackPolicy::Constant(vec![0.0]))));
    let (_, report) = converse_equilibrium(&b, solution, 8, &sign_class(), &Search::grid(243), &MonteCarlo::new(6, 10, 3)).unwrap();
    assert_eq!(report.epsilon_n, 0.0);
    assert!(report.distance_to_solution.is_finite());
}

#[test]
fn converse_of_decoupled_optimum_has_no_gap() {
    let b = Arc::new(decoupled(0.5));
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let flow = example33_flow(1.0, grid, 16, 0.5).unwrap();
    let solution = Arc::new(SolutionSampler::new(b.clone(), MfgSolution::strong(flow, FeedbackPolicy::Constant(vec![0.5]))));
    for n in [4, 16] {
        let (_, report) = converse_equilibrium(&b, solution.clone(), n, &PolicyClass::Constant { levels: 21 }, &Search::grid(100), &MonteCarlo::new(20, 10, 3)).unwrap();
        assert!(report.epsilon_n <= 3.0 * report.epsilon_stderr + 1e-12, "{report:?}");
    }
}
