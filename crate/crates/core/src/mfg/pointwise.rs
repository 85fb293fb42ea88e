use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::controls::{FeedbackPolicy, Observation};
use crate::error::{Error, Result};
use crate::measures::{CloudView, ParticleCloud};
use crate::model::{ActionSet, CoefficientBundle, RunningFn};
use crate::rng::stream;

const PROBES: usize = 64;
const COARSE: usize = 33;
const REFINEMENTS: usize = 40;

/// Maximiser of `a -> f(t, x, cloud, a)` over the action set: the best of a
/// coarse lattice, then a compass search with halving steps.
fn maximise(running: &RunningFn, actions: &ActionSet, coarse: &[Vec<f64>], t: f64, x: &[f64], cloud: CloudView<'_>, out: &mut [f64]) {
    let value = |a: &[f64]| running(t, x, cloud, a);
    let mut best = coarse[0].clone();
    let mut best_v = value(&best);
    for a in &coarse[1..] {
        let v = value(a);
        if v > best_v {
            best_v = v;
            best = a.clone();
        }
    }
    if let ActionSet::Finite { .. } = actions {
        out.copy_from_slice(&best);
        return;
    }
    let mut step = 2.0 * actions.max_norm().max(1.0) / (COARSE - 1) as f64;
    let mut trial = best.clone();
    for _ in 0..REFINEMENTS {
        let mut improved = false;
        for c in 0..best.len() {
            for dir in [1.0, -1.0] {
                trial.copy_from_slice(&best);
                trial[c] += dir * step;
                actions.project(&mut trial);
                let v = value(&trial);
                if v > best_v {
                    best_v = v;
                    best.copy_from_slice(&trial);
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    out.copy_from_slice(&best);
}

fn probe_cloud(rng: &mut crate::rng::SimRng, d: usize) -> Result<ParticleCloud> {
    let pts: Vec<f64> = (0..8 * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    ParticleCloud::new(d, pts)
}

/// Policy `a*(t, cloud) = argmax_a f(t, cloud, a)` for models whose
/// terminal reward vanishes and whose running reward ignores the own
/// state. Both properties are probed at random points first.
pub fn pointwise_optimal_policy(bundle: &CoefficientBundle) -> Result<FeedbackPolicy> {
    let d = bundle.dims.d;
    let k = bundle.action_dim();
    let mut rng = stream(0, "pointwise-probe", &[]);
    let mut a = vec![0.0; k];
    for _ in 0..PROBES {
        let cloud = probe_cloud(&mut rng, d)?;
        let x1: Vec<f64> = (0..d).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let x2: Vec<f64> = (0..d).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let t = rng.random::<f64>() * bundle.horizon;
        bundle.actions.sample(&mut rng, &mut a);
        let g = (bundle.terminal)(&x1, cloud.view());
        if g != 0.0 {
            return Err(Error::Precondition(format!("terminal reward is {g} at a probe point, expected 0")));
        }
        let (f1, f2) = (
            (bundle.running)(t, &x1, cloud.view(), &a),
            (bundle.running)(t, &x2, cloud.view(), &a),
        );
        if (f1 - f2).abs() > 1e-12 * (1.0 + f1.abs().max(f2.abs())) {
            return Err(Error::Precondition(
                "running reward depends on the own state at a probe point".to_string(),
            ));
        }
    }
    let running = bundle.running.clone();
    let actions = bundle.actions.clone();
    let coarse = actions.candidates(COARSE);
    Ok(FeedbackPolicy::Parametric {
        name: "pointwise-optimal".to_string(),
        theta: Vec::new(),
        evaluator: Arc::new(move |_: &[f64], obs: &Observation<'_>, out: &mut [f64]| {
            maximise(&running, &actions, &coarse, obs.t, obs.state, obs.cloud, out)
        }),
        reads_cloud: true,
    })
}
