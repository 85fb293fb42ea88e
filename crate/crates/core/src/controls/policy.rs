use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::measures::CloudView;
use crate::model::ActionSet;

/// What a feedback policy may read at a grid time: the time, the player's
/// own current state, the current cloud and an environment signal (the
/// conditional expectation of the terminal cloud mean when the environment
/// provides one; empty otherwise). Nothing from the future is visible.
#[derive(Clone, Copy, Debug)]
pub struct Observation<'a> {
    pub t: f64,
    pub step: usize,
    pub state: &'a [f64],
    pub cloud: CloudView<'a>,
    pub signal: &'a [f64],
}

/// Evaluator of a parametric policy: `(theta, observation, out)`.
pub type PolicyFn = Arc<dyn Fn(&[f64], &Observation<'_>, &mut [f64]) + Send + Sync>;

/// Feedback policy `(t, x, cloud, signal) -> action`, always projected into
/// the action set.
///
/// Sign and affine policies act on the feature vector
/// `[1, t, x_1..x_d, mean_1..mean_d, s_1..s_d]` where `mean` is the cloud
/// mean and `s` the environment signal (zero when absent).
#[derive(Clone)]
pub enum FeedbackPolicy {
    Constant(Vec<f64>),
    SignThreshold {
        weights: Vec<f64>,
        direction: Vec<f64>,
    },
    Affine {
        intercept: Vec<f64>,
        /// Row-major `action_dim x features`.
        gain: Vec<f64>,
    },
    /// Piecewise-constant lookup on a `(t, x_1)` grid: time cells of equal
    /// width over `[0, horizon]`, nearest state node.
    Table {
        horizon: f64,
        time_cells: usize,
        x_lower: f64,
        x_upper: f64,
        x_nodes: usize,
        /// `time_cells x x_nodes x action_dim`.
        values: Vec<f64>,
    },
    Parametric {
        name: String,
        theta: Vec<f64>,
        evaluator: PolicyFn,
        reads_cloud: bool,
    },
}

impl fmt::Debug for FeedbackPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl PartialEq for FeedbackPolicy {
    fn eq(&self, other: &Self) -> bool {
        use FeedbackPolicy::*;
        match (self, other) {
            (Constant(a), Constant(b)) => a == b,
            (SignThreshold { weights: w1, direction: d1 }, SignThreshold { weights: w2, direction: d2 }) => {
                w1 == w2 && d1 == d2
            }
            (Affine { intercept: i1, gain: g1 }, Affine { intercept: i2, gain: g2 }) => i1 == i2 && g1 == g2,
            (Table { values: v1, .. }, Table { values: v2, .. }) => v1 == v2 && self.describe() == other.describe(),
            (Parametric { name: n1, theta: t1, evaluator: e1, .. }, Parametric { name: n2, theta: t2, evaluator: e2, .. }) => {
                n1 == n2 && t1 == t2 && Arc::ptr_eq(e1, e2)
            }
            _ => false,
        }
    }
}

pub(crate) fn feature_count(state_dim: usize) -> usize {
    2 + 3 * state_dim
}

#[inline]
fn linear_form(w: &[f64], obs: &Observation<'_>) -> f64 {
    let d = obs.state.len();
    let mut v = w[0] + w[1] * obs.t;
    for i in 0..d {
        v += w[2 + i] * obs.state[i];
    }
    let mean_w = &w[2 + d..2 + 2 * d];
    if mean_w.iter().any(|c| *c != 0.0) {
        let mean = obs.cloud.mean();
        for i in 0..d {
            v += mean_w[i] * mean[i];
        }
    }
    if !obs.signal.is_empty() {
        for i in 0..d {
            v += w[2 + 2 * d + i] * obs.signal[i];
        }
    }
    v
}

/// `sign` with the convention `sign(0) = 0`.
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl FeedbackPolicy {
    /// Evaluate at `obs` and project into `actions`.
    pub fn act(&self, obs: &Observation<'_>, actions: &ActionSet, out: &mut [f64]) {
        match self {
            FeedbackPolicy::Constant(a) => out.copy_from_slice(a),
            FeedbackPolicy::SignThreshold { weights, direction } => {
                let s = sign(linear_form(weights, obs));
                for (o, d) in out.iter_mut().zip(direction) {
                    *o = s * d;
                }
            }
            FeedbackPolicy::Affine { intercept, gain } => {
                let features = gain.len() / intercept.len();
                for (r, o) in out.iter_mut().enumerate() {
                    *o = intercept[r] + linear_form(&gain[r * features..(r + 1) * features], obs);
                }
            }
            FeedbackPolicy::Table {
                horizon,
                time_cells,
                x_lower,
                x_upper,
                x_nodes,
                values,
            } => {
                let ti = ((obs.t / horizon * *time_cells as f64).floor().max(0.0) as usize).min(time_cells - 1);
                let xi = if *x_nodes == 1 {
                    0
                } else {
                    let h = (x_upper - x_lower) / (*x_nodes - 1) as f64;
                    (((obs.state[0] - x_lower) / h).round().max(0.0) as usize).min(x_nodes - 1)
                };
                let k = out.len();
                let at = (ti * x_nodes + xi) * k;
                out.copy_from_slice(&values[at..at + k]);
            }
            FeedbackPolicy::Parametric { theta, evaluator, .. } => evaluator(theta, obs, out),
        }
        actions.project(out);
    }

    /// Whether the action can depend on the cloud.
    pub fn reads_cloud(&self) -> bool {
        match self {
            FeedbackPolicy::Constant(_) | FeedbackPolicy::Table { .. } => false,
            FeedbackPolicy::SignThreshold { weights, .. } => {
                let d = (weights.len() - 2) / 3;
                weights[2 + d..2 + 2 * d].iter().any(|w| *w != 0.0)
            }
            FeedbackPolicy::Affine { intercept, gain } => {
                let features = gain.len() / intercept.len();
                let d = (features - 2) / 3;
                gain.chunks_exact(features).any(|row| row[2 + d..2 + 2 * d].iter().any(|w| *w != 0.0))
            }
            FeedbackPolicy::Parametric { reads_cloud, .. } => *reads_cloud,
        }
    }

    /// Short stable text description used in reports.
    pub fn describe(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        match self {
            FeedbackPolicy::Constant(a) => format!("constant[{}]", list(a)),
            FeedbackPolicy::SignThreshold { weights, direction } => {
                format!("sign[w={};dir={}]", list(weights), list(direction))
            }
            FeedbackPolicy::Affine { intercept, gain } => format!("affine[b={};k={}]", list(intercept), list(gain)),
            FeedbackPolicy::Table {
                time_cells, x_lower, x_upper, x_nodes, ..
            } => format!("table[{time_cells}x{x_nodes};x={x_lower}..{x_upper}]"),
            FeedbackPolicy::Parametric { name, theta, .. } => format!("{name}[{}]", list(theta)),
        }
    }
}

/// Families searched by best responses.
#[derive(Clone)]
pub enum PolicyClass {
    /// Constant policies on a lattice with `levels` points per action axis
    /// (all atoms for finite sets).
    Constant { levels: usize },
    /// `sign(w . features) * direction` with `w` ranging over `{0, 1, -1}`
    /// per feature. Enumeration starts at `w = 0` and counts in base three
    /// with digits in the order `0, 1, -1`, first feature fastest.
    Sign { direction: Option<Vec<f64>> },
    /// Affine policies with continuous parameters (cross-entropy search).
    Affine { scale: f64 },
    /// User-supplied evaluator with a `dim`-dimensional parameter.
    Parametric {
        name: String,
        dim: usize,
        scale: f64,
        evaluator: PolicyFn,
        reads_cloud: bool,
    },
}

impl fmt::Debug for PolicyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// Serializable descriptor of the built-in classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyClassSpec {
    Constant {
        #[serde(default = "default_levels")]
        levels: usize,
    },
    Sign,
    Affine {
        #[serde(default = "default_scale")]
        scale: f64,
    },
}

fn default_levels() -> usize {
    21
}

fn default_scale() -> f64 {
    1.0
}

/// Serializable descriptor of a single feedback policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Constant { action: Vec<f64> },
    SignThreshold { weights: Vec<f64>, direction: Vec<f64> },
    Affine { intercept: Vec<f64>, gain: Vec<f64> },
}

impl PolicySpec {
    /// Checks parameter lengths against the state and action dimensions.
    pub fn check(&self, state_dim: usize, action_dim: usize) -> Result<()> {
        let f = feature_count(state_dim);
        let (got, want) = match self {
            PolicySpec::Constant { action } => (vec![action.len()], vec![action_dim]),
            PolicySpec::SignThreshold { weights, direction } => {
                (vec![weights.len(), direction.len()], vec![f, action_dim])
            }
            PolicySpec::Affine { intercept, gain } => {
                (vec![intercept.len(), gain.len()], vec![action_dim, action_dim * f])
            }
        };
        if got != want {
            return Err(invalid("policy", format!("parameter lengths {got:?}, expected {want:?}")));
        }
        Ok(())
    }
}

impl From<&PolicySpec> for FeedbackPolicy {
    fn from(spec: &PolicySpec) -> Self {
        match spec.clone() {
            PolicySpec::Constant { action } => FeedbackPolicy::Constant(action),
            PolicySpec::SignThreshold { weights, direction } => FeedbackPolicy::SignThreshold { weights, direction },
            PolicySpec::Affine { intercept, gain } => FeedbackPolicy::Affine { intercept, gain },
        }
    }
}

impl From<&PolicyClassSpec> for PolicyClass {
    fn from(spec: &PolicyClassSpec) -> Self {
        match spec {
            PolicyClassSpec::Constant { levels } => PolicyClass::Constant { levels: *levels },
            PolicyClassSpec::Sign => PolicyClass::Sign { direction: None },
            PolicyClassSpec::Affine { scale } => PolicyClass::Affine { scale: *scale },
        }
    }
}

impl PolicyClass {
    pub fn describe(&self) -> String {
        match self {
            PolicyClass::Constant { levels } => format!("constant(levels={levels})"),
            PolicyClass::Sign { .. } => "sign".to_string(),
            PolicyClass::Affine { scale } => format!("affine(scale={scale})"),
            PolicyClass::Parametric { name, dim, .. } => format!("{name}(dim={dim})"),
        }
    }

    /// Whether the class is a finite list searchable exhaustively.
    pub fn is_finite(&self) -> bool {
        matches!(self, PolicyClass::Constant { .. } | PolicyClass::Sign { .. })
    }

    /// Deterministic enumeration of a finite class, truncated to `budget`.
    pub fn enumerate(&self, actions: &ActionSet, state_dim: usize, budget: usize) -> Vec<FeedbackPolicy> {
        match self {
            PolicyClass::Constant { levels } => actions
                .candidates(*levels)
                .into_iter()
                .take(budget)
                .map(FeedbackPolicy::Constant)
                .collect(),
            PolicyClass::Sign { direction } => {
                let direction = direction.clone().unwrap_or_else(|| vec![1.0; actions.dim()]);
                let f = feature_count(state_dim);
                let total = 3usize.saturating_pow(f as u32);
                (0..total.min(budget))
                    .map(|mut c| {
                        let mut weights = vec![0.0; f];
                        for w in weights.iter_mut() {
                            *w = [0.0, 1.0, -1.0][c % 3];
                            c /= 3;
                        }
                        FeedbackPolicy::SignThreshold {
                            weights,
                            direction: direction.clone(),
                        }
                    })
                    .collect()
            }
            PolicyClass::Affine { .. } | PolicyClass::Parametric { .. } => Vec::new(),
        }
    }

    /// Parameter dimension of a continuous class.
    pub fn parameter_dim(&self, action_dim: usize, state_dim: usize) -> usize {
        match self {
            PolicyClass::Affine { .. } => action_dim * (1 + feature_count(state_dim)),
            PolicyClass::Parametric { dim, .. } => *dim,
            _ => 0,
        }
    }

    pub fn scale(&self) -> f64 {
        match self {
            PolicyClass::Affine { scale } | PolicyClass::Parametric { scale, .. } => *scale,
            _ => 1.0,
        }
    }

    /// Policy of a continuous class at parameter `theta`.
    pub fn instantiate(&self, theta: &[f64], action_dim: usize) -> FeedbackPolicy {
        match self {
            PolicyClass::Affine { .. } => FeedbackPolicy::Affine {
                intercept: theta[..action_dim].to_vec(),
                gain: theta[action_dim..].to_vec(),
            },
            PolicyClass::Parametric {
                name,
                evaluator,
                reads_cloud,
                ..
            } => FeedbackPolicy::Parametric {
                name: name.clone(),
                theta: theta.to_vec(),
                evaluator: evaluator.clone(),
                reads_cloud: *reads_cloud,
            },
            _ => panic!("instantiate called on a finite class"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::ParticleCloud;

    fn obs<'a>(t: f64, x: &'a [f64], cloud: &'a ParticleCloud, s: &'a [f64]) -> Observation<'a> {
        Observation {
            t,
            step: 0,
            state: x,
            cloud: cloud.view(),
            signal: s,
        }
    }

    #[test]
    fn sign_class_enumeration_order() {
        let a = ActionSet::interval(-1.0, 1.0).unwrap();
        let all = PolicyClass::Sign { direction: None }.enumerate(&a, 1, usize::MAX);
        assert_eq!(all.len(), 243);
        let FeedbackPolicy::SignThreshold { weights, .. } = &all[0] else { panic!() };
        assert!(weights.iter().all(|w| *w == 0.0));
        let FeedbackPolicy::SignThreshold { weights, .. } = &all[2] else { panic!() };
        assert_eq!(weights[0], -1.0);
    }

    #[test]
    fn sign_of_zero_is_zero_and_outputs_are_projected() {
        let a = ActionSet::interval(-0.5, 0.5).unwrap();
        let cloud = ParticleCloud::from_scalars(vec![2.0]).unwrap();
        let p = FeedbackPolicy::SignThreshold {
            weights: vec![0.0, 0.0, 0.0, 0.0, 1.0],
            direction: vec![1.0],
        };
        let mut out = [9.0];
        p.act(&obs(1.0, &[0.0], &cloud, &[0.0]), &a, &mut out);
        assert_eq!(out, [0.0]);
        p.act(&obs(1.0, &[0.0], &cloud, &[3.0]), &a, &mut out);
        assert_eq!(out, [0.5]);
        assert!(!p.reads_cloud());
        let affine = FeedbackPolicy::Affine {
            intercept: vec![0.0],
            gain: vec![0.0, 0.0, 0.0, 1.0, 0.0],
        };
        affine.act(&obs(0.0, &[0.0], &cloud, &[]), &a, &mut out);
        assert_eq!(out, [0.5]);
        assert!(affine.reads_cloud());
    }

    #[test]
    fn table_lookup() {
        let a = ActionSet::interval(-1.0, 1.0).unwrap();
        let cloud = ParticleCloud::from_scalars(vec![0.0]).unwrap();
        let p = FeedbackPolicy::Table {
            horizon: 2.0,
            time_cells: 2,
            x_lower: -1.0,
            x_upper: 1.0,
            x_nodes: 3,
            values: vec![-1.0, 0.0, 1.0, 0.5, 0.25, -0.5],
        };
        let mut out = [0.0];
        p.act(&obs(0.5, &[0.9], &cloud, &[]), &a, &mut out);
        assert_eq!(out, [1.0]);
        p.act(&obs(1.5, &[-0.1], &cloud, &[]), &a, &mut out);
        assert_eq!(out, [0.25]);
        p.act(&obs(2.0, &[-7.0], &cloud, &[]), &a, &mut out);
        assert_eq!(out, [0.5]);
    }
}
