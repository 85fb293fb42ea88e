use std::sync::Arc;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::controls::{FeedbackPolicy, Observation, RelaxedControlPath};
use crate::error::Result;
use crate::grid::TimeGrid;
use crate::measures::ParticleCloud;
use crate::mfg::{Branch, BranchControl, MfgSolution};
use crate::particle::MeasureFlow;

/// `m` points at the mid-quantiles of `N(mean, sd^2)`, stored as adjacent
/// mirrored pairs so that a centred cloud has mean exactly zero.
pub fn gaussian_quantile_cloud(mean: f64, sd: f64, m: usize) -> Result<ParticleCloud> {
    let normal = Normal::standard();
    let mut pts = Vec::with_capacity(m);
    for j in 0..m / 2 {
        let z = normal.inverse_cdf((j as f64 + 0.5) / m as f64);
        pts.push(mean + sd * z);
        pts.push(mean - sd * z);
    }
    if m % 2 == 1 {
        pts.push(mean);
    }
    ParticleCloud::from_scalars(pts)
}

/// Flow of Gaussian quantile clouds with the given mean and standard
/// deviation paths.
pub fn gaussian_flow(
    grid: TimeGrid,
    m: usize,
    mean: impl Fn(f64) -> f64,
    sd: impl Fn(f64) -> f64,
) -> Result<MeasureFlow> {
    let clouds = grid
        .times()
        .map(|t| gaussian_quantile_cloud(mean(t), sd(t), m))
        .collect::<Result<_>>()?;
    MeasureFlow::new(grid, clouds)
}

/// Flow with mean path `slope * t` and variance `sigma^2 t`: the law of
/// `X_t = slope * t + sigma W_t`.
pub fn example33_flow(sigma: f64, grid: TimeGrid, m: usize, slope: f64) -> Result<MeasureFlow> {
    gaussian_flow(grid, m, |t| slope * t, |t| sigma * t.sqrt())
}

/// The three strong solutions: mean paths `t`, `0` and `-t` with constant
/// policies `+1`, `0` and `-1`.
pub fn example33_strong_solutions(sigma: f64, grid: TimeGrid, m: usize) -> Result<Vec<(MeasureFlow, FeedbackPolicy)>> {
    [1.0, 0.0, -1.0]
        .into_iter()
        .map(|s| Ok((example33_flow(sigma, grid, m, s)?, FeedbackPolicy::Constant(vec![s]))))
        .collect()
}

/// Control `gamma * 1_{(1, 2]}(t)` on the grid: `gamma` on every step
/// starting at or after `t = 1`.
pub fn example33_weak_control(gamma: f64, grid: TimeGrid) -> RelaxedControlPath {
    let actions = (0..grid.steps())
        .map(|k| if grid.time(k) >= 1.0 - 1e-12 { gamma } else { 0.0 })
        .collect();
    RelaxedControlPath::strict_unchecked(grid, 1, actions)
}

/// Flow of branch `gamma` of the weak solution: mean `gamma (t - 1)^+`,
/// variance `sigma^2 t`.
pub fn example33_weak_flow(sigma: f64, grid: TimeGrid, m: usize, gamma: f64) -> Result<MeasureFlow> {
    gaussian_flow(grid, m, |t| gamma * (t - 1.0).max(0.0), |t| sigma * t.sqrt())
}

/// Weak solution: `gamma = +1` or `-1` with probability 1/2, flow of
/// branch `gamma` and control `gamma * 1_{(1, 2]}`.
pub fn example33_weak(sigma: f64, grid: TimeGrid, m: usize) -> Result<MfgSolution> {
    let branches = [1.0, -1.0]
        .into_iter()
        .map(|gamma| {
            Ok(Branch {
                label: gamma,
                weight: 0.5,
                flow: Arc::new(example33_weak_flow(sigma, grid, m, gamma)?),
                control: BranchControl::Template(Arc::new(example33_weak_control(gamma, grid))),
            })
        })
        .collect::<Result<_>>()?;
    MfgSolution::weak(branches)
}

/// One draw of the weak solution.
#[derive(Clone, Debug)]
pub struct WeakDraw {
    pub gamma: f64,
    pub control: RelaxedControlPath,
    pub flow: Arc<MeasureFlow>,
}

/// Draw `gamma` from the weak solution's branch law (deterministic in
/// `seed`) with its control and flow.
pub fn example33_weak_solution(solution: &MfgSolution, seed: u64) -> Result<WeakDraw> {
    let b = solution.sample_branch(seed);
    let env = solution.branch_environment(b);
    let control = match solution.branch_control(b) {
        BranchControl::Template(q) => (*q).clone(),
        BranchControl::Feedback(_) => {
            return Err(crate::error::invalid("weak solution", "expected template controls"));
        }
    };
    Ok(WeakDraw {
        gamma: env.label,
        control,
        flow: solution.flow(b).clone(),
    })
}

/// `sign` of the environment signal (the conditional expectation of the
/// terminal mean), with `sign(0) = 0`.
pub fn example33_optimal_policy() -> FeedbackPolicy {
    FeedbackPolicy::SignThreshold {
        weights: vec![0.0, 0.0, 0.0, 0.0, 1.0],
        direction: vec![1.0],
    }
}

/// `sign(conditional_mean(t, signal))` for a user-supplied conditional
/// expectation of the terminal mean.
pub fn example33_policy_from(
    conditional_mean: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
) -> FeedbackPolicy {
    FeedbackPolicy::Parametric {
        name: "sign-of-conditional-mean".to_string(),
        theta: Vec::new(),
        evaluator: Arc::new(move |_: &[f64], obs: &Observation<'_>, out: &mut [f64]| {
            out[0] = crate::controls::sign(conditional_mean(obs.t, obs.signal));
        }),
        reads_cloud: false,
    }
}
