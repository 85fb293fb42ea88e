use std::sync::Arc;

use meanfield_core::controls::{chattering, FeedbackPolicy, PlayerStrategy, RelaxedControlPath, StrategyProfile};
use meanfield_core::game::objective_gamma;
use meanfield_core::model::{scenario_example33, scenario_mean_coupled, ActionSet, CoefficientBundle, Dims};
use meanfield_core::particle::*;
use meanfield_core::{Error, TimeGrid};
use proptest::prelude::*;

fn constant(n: usize, a: f64) -> StrategyProfile {
    StrategyProfile::symmetric(n, PlayerStrategy::Feedback(FeedbackPolicy::Constant(vec![a]))).unwrap()
}

#[test]
fn deterministic_drift_is_integrated_exactly() {
    let b = scenario_example33(0.0).unwrap();
    let noise = sample_noise(&b, 3, 20, 1).unwrap();
    let traj = simulate_nplayer(&b, &constant(3, 0.5), &noise).unwrap();
    for i in 0..3 {
        assert!((traj.state(i, 20)[0] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn same_seed_same_paths() {
    let b = scenario_mean_coupled(1.0).unwrap();
    let run = |seed| {
        let noise = sample_noise(&b, 5, 30, seed).unwrap();
        simulate_nplayer(&b, &constant(5, 0.2), &noise).unwrap().flow
    };
    assert_eq!(run(4).clouds(), run(4).clouds());
    assert_ne!(run(4).clouds(), run(5).clouds());
}

#[test]
fn player_noise_does_not_depend_on_population_size() {
    let b = scenario_mean_coupled(1.0).unwrap();
    let small = sample_noise(&b, 4, 10, 9).unwrap();
    let large = sample_noise(&b, 8, 10, 9).unwrap();
    for i in 0..4 {
        assert_eq!(small.player(i).w, large.player(i).w);
        assert_eq!(small.initial(i), large.initial(i));
    }
}

#[test]
fn antithetic_pairs_mirror_increments() {
    let b = scenario_example33(1.0).unwrap();
    let noise = sample_noise_with(&b, 4, 10, 2, true).unwrap();
    for (u, v) in noise.player(0).w.iter().zip(noise.player(1).w) {
        assert_eq!(*u, -v);
    }
}

#[test]
fn k_modified_equals_original_without_interaction() {
    let b = scenario_example33(1.0).unwrap();
    let noise = sample_noise(&b, 6, 25, 3).unwrap();
    let traj = simulate_nplayer(&b, &constant(6, -0.3), &noise).unwrap();
    let modified = simulate_k_modified(&b, &traj, 2, &noise).unwrap();
    assert_eq!(modified.states.clouds(), traj.flow.clouds());
    assert_eq!(modified.reduced_flow.terminal().len(), 5);
}

#[test]
fn k_modified_moves_when_the_mean_matters() {
    let b = scenario_mean_coupled(1.0).unwrap();
    let noise = sample_noise(&b, 6, 25, 3).unwrap();
    let traj = simulate_nplayer(&b, &constant(6, 0.0), &noise).unwrap();
    let modified = simulate_k_modified(&b, &traj, 0, &noise).unwrap();
    let shift = (modified.state_path(1).values()[25] - traj.state_path(1).values()[25]).abs();
    assert!(shift > 0.0);
    assert!(simulate_k_modified(&b, &traj, 6, &noise).is_err());
}

#[test]
fn explosive_drift_is_reported() {
    let b = CoefficientBundle::builder("explode", Dims { d: 1, m: 1, m0: 1 }, 1.0)
        .drift(|_, x, _, _, out| out[0] = x[0] * x[0] * 1e6 + 1.0)
        .scalar_diffusion(0.0)
        .build()
        .unwrap();
    let noise = sample_noise(&b, 2, 50, 0).unwrap();
    let err = simulate_nplayer(&b, &constant(2, 0.0), &noise).unwrap_err();
    assert!(matches!(err, Error::BlowUp { .. }));
}

#[test]
fn profile_size_must_match_noise() {
    let b = scenario_example33(1.0).unwrap();
    let noise = sample_noise(&b, 3, 5, 0).unwrap();
    assert!(matches!(simulate_nplayer(&b, &constant(4, 0.0), &noise), Err(Error::CountMismatch { .. })));
}

#[test]
fn open_controls_are_followed() {
    let b = scenario_example33(0.0).unwrap();
    let grid = TimeGrid::new(2.0, 4).unwrap();
    let q = RelaxedControlPath::strict(grid, 1, vec![1.0, -1.0, 1.0, 1.0]).unwrap();
    let profile = StrategyProfile::symmetric(2, PlayerStrategy::Open(Arc::new(q))).unwrap();
    let noise = sample_noise(&b, 2, 4, 0).unwrap();
    let traj = simulate_nplayer(&b, &profile, &noise).unwrap();
    assert!((traj.state(0, 4)[0] - 1.0).abs() < 1e-12);
}

#[test]
fn relaxed_control_drives_with_its_mean() {
    let b = scenario_example33(0.0).unwrap();
    let grid = TimeGrid::new(2.0, 10).unwrap();
    let flow = MeasureFlow::constant(grid, meanfield_core::measures::ParticleCloud::new(1, vec![0.0]).unwrap());
    let q = RelaxedControlPath::new(grid, 1, vec![(vec![1.0, -1.0], vec![0.75, 0.25]); 10]).unwrap();
    let noise = sample_noise(&b, 1, 10, 0).unwrap();
    let env = meanfield_core::controls::Environment::none();
    let (x, _) = simulate_vs_flow(&b, AgentControl::Open(&q), &flow, noise.player(0), &env).unwrap();
    assert!((x.values()[10] - 1.0).abs() < 1e-12);
}

#[test]
fn chattering_uniform_sign_costs_the_horizon() {
    let b = CoefficientBundle::builder("quadratic cost", Dims { d: 1, m: 1, m0: 1 }, 1.5)
        .actions(ActionSet::interval(-1.0, 1.0).unwrap())
        .drift(|_, _, _, a, out| out[0] = a[0])
        .scalar_diffusion(0.0)
        .running(|_, _, _, a| -a[0] * a[0])
        .build()
        .unwrap();
    let grid = TimeGrid::new(1.5, 10).unwrap();
    let q = RelaxedControlPath::new(grid, 1, vec![(vec![1.0, -1.0], vec![0.5, 0.5]); 10]).unwrap();
    let flow = MeasureFlow::constant(grid, meanfield_core::measures::ParticleCloud::new(1, vec![0.0]).unwrap());
    let env = meanfield_core::controls::Environment::none();
    let relaxed_noise = sample_noise(&b, 1, 10, 0).unwrap();
    let (x, q) = simulate_vs_flow(&b, AgentControl::Open(&q), &flow, relaxed_noise.player(0), &env).unwrap();
    let relaxed = objective_gamma(&b, &flow, &q, &x).unwrap();
    assert!((relaxed + 1.5).abs() < 1e-12);
    let strict = chattering(&q, 100, 7).unwrap();
    assert!(strict.is_strict());
    let fine = TimeGrid::new(1.5, 1000).unwrap();
    let fine_flow = MeasureFlow::constant(fine, meanfield_core::measures::ParticleCloud::new(1, vec![0.0]).unwrap());
    let fine_noise = sample_noise(&b, 1, 1000, 0).unwrap();
    let (y, strict) = simulate_vs_flow(&b, AgentControl::Open(&strict), &fine_flow, fine_noise.player(0), &env).unwrap();
    let gamma = objective_gamma(&b, &fine_flow, &strict, &y).unwrap();
    assert!((gamma + 1.5).abs() < 0.015, "{gamma}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constant_controls_shift_paths_linearly(a in -1.0f64..1.0, seed in 0u64..1000) {
        let b = scenario_example33(1.0).unwrap();
        let noise = sample_noise(&b, 2, 16, seed).unwrap();
        let zero = simulate_nplayer(&b, &constant(2, 0.0), &noise).unwrap();
        let moved = simulate_nplayer(&b, &constant(2, a), &noise).unwrap();
        for k in 0..=16 {
            let t = 2.0 * k as f64 / 16.0;
            prop_assert!((moved.state(1, k)[0] - zero.state(1, k)[0] - a * t).abs() < 1e-9);
        }
    }
}
