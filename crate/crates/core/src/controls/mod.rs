//! Relaxed and strict controls, feedback policies and policy classes,
//! strategy profiles and the chattering approximation.

mod chattering;
mod policy;
mod profile;
mod relaxed;

pub use chattering::chattering;
pub use policy::{sign, FeedbackPolicy, Observation, PolicyClass, PolicyClassSpec, PolicyFn, PolicySpec};
pub use profile::{ControlSampler, Environment, EnvironmentSource, PlayerStrategy, StrategyProfile};
pub use relaxed::{RelaxedControlPath, StepMeasure};


use crate::error::Result;
use crate::measures::PathSample;
use crate::model::ActionSet;
use crate::particle::MeasureFlow;

/// Strict control obtained by evaluating `policy` at the left end of every
/// step along a realised own path and flow.
pub fn policy_to_control(
    policy: &FeedbackPolicy,
    actions: &ActionSet,
    own_path: &PathSample,
    flow: &MeasureFlow,
    env: &Environment,
) -> Result<RelaxedControlPath> {
    let grid = own_path.grid();
    if flow.grid() != grid {
        return Err(crate::error::Error::GridMismatch);
    }
    let k = actions.dim();
    let mut out = vec![0.0; grid.steps() * k];
    for (step, a) in out.chunks_exact_mut(k).enumerate() {
        let obs = Observation {
            t: grid.time(step),
            step,
            state: own_path.value(step),
            cloud: flow.cloud(step).view(),
            signal: env.signal(step),
        };
        policy.act(&obs, actions, a);
    }
    RelaxedControlPath::strict(grid, k, out)
}
