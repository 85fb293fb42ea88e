//! Mean field game solutions: the damped fixed-point solver for strong
//! solutions, the consistency residual, pointwise-optimal policies and
//! closed-form solutions of the two-period example.

mod example33;
mod pointwise;
mod solution;
mod solver;

pub use example33::{
    example33_flow, example33_optimal_policy, example33_policy_from, example33_strong_solutions, example33_weak,
    example33_weak_control, example33_weak_flow, example33_weak_solution, gaussian_flow, gaussian_quantile_cloud,
    WeakDraw,
};
pub use pointwise::pointwise_optimal_policy;
pub use solution::{Branch, BranchControl, MfgSolution, SolutionSampler};
pub use solver::{
    consistency_residual, consistency_residual_with, flow_distance, simulate_agents, solve_strong_mfg,
    FixedPointOptions, FixedPointTrace,
};
