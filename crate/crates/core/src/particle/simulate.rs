use std::borrow::Cow;

use crate::controls::{Environment, FeedbackPolicy, Observation, PlayerStrategy, RelaxedControlPath, StepMeasure, StrategyProfile};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::measures::{swapped_mean, CloudView, ParticleCloud, PathSample};
use crate::model::CoefficientBundle;
use crate::particle::{MeasureFlow, NoiseBundle, PlayerNoise};

/// Any coordinate beyond this magnitude aborts the simulation.
pub const BLOW_UP: f64 = 1e12;

/// Realised n-player run: the empirical flow of states (which stores every
/// player's path) and the controls actually used.
#[derive(Clone, Debug)]
pub struct ParticleTrajectories {
    pub flow: MeasureFlow,
    pub controls: Vec<RelaxedControlPath>,
    pub environment: Environment,
}

impl ParticleTrajectories {
    pub fn players(&self) -> usize {
        self.flow.cloud(0).len()
    }

    pub fn grid(&self) -> TimeGrid {
        self.flow.grid()
    }

    pub fn state(&self, i: usize, k: usize) -> &[f64] {
        self.flow.cloud(k).point(i)
    }

    pub fn state_path(&self, i: usize) -> PathSample {
        path_of(&self.flow, i)
    }
}

pub(crate) fn path_of(flow: &MeasureFlow, i: usize) -> PathSample {
    let values = flow.clouds().iter().flat_map(|c| c.point(i).iter().copied()).collect();
    PathSample::new_unchecked(flow.grid(), flow.dim(), values)
}

/// Scratch buffers for one Euler step.
pub(crate) struct Stepper {
    d: usize,
    m: usize,
    m0: usize,
    drift: Vec<f64>,
    tmp: Vec<f64>,
    sigma: Vec<f64>,
    sigma0: Vec<f64>,
    action: Vec<f64>,
}

impl Stepper {
    pub(crate) fn new(bundle: &CoefficientBundle) -> Self {
        let crate::model::Dims { d, m, m0 } = bundle.dims;
        Self {
            d,
            m,
            m0,
            drift: vec![0.0; d],
            tmp: vec![0.0; d],
            sigma: vec![0.0; d * m],
            sigma0: vec![0.0; d * m0],
            action: vec![0.0; bundle.action_dim()],
        }
    }

    pub(crate) fn action_mut(&mut self) -> &mut [f64] {
        &mut self.action
    }

    /// One explicit Euler-Maruyama step from `x` with the drift averaged
    /// over `q` (or the stored strict action when `q` is `None`).
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn advance(
        &mut self,
        bundle: &CoefficientBundle,
        t: f64,
        dt: f64,
        x: &[f64],
        cloud: CloudView<'_>,
        q: Option<StepMeasure<'_>>,
        dw: &[f64],
        db: &[f64],
        out: &mut [f64],
    ) {
        match q {
            None => (bundle.drift)(t, x, cloud, &self.action, &mut self.drift),
            Some(q) if q.len() == 1 => (bundle.drift)(t, x, cloud, q.atom(0), &mut self.drift),
            Some(q) => {
                self.drift.fill(0.0);
                for (a, w) in q.iter() {
                    (bundle.drift)(t, x, cloud, a, &mut self.tmp);
                    for (acc, v) in self.drift.iter_mut().zip(&self.tmp) {
                        *acc += w * v;
                    }
                }
            }
        }
        for c in 0..self.d {
            out[c] = x[c] + self.drift[c] * dt;
        }
        if self.m > 0 {
            (bundle.diffusion)(t, x, cloud, &mut self.sigma);
            for c in 0..self.d {
                let row = &self.sigma[c * self.m..(c + 1) * self.m];
                out[c] += row.iter().zip(dw).map(|(s, w)| s * w).sum::<f64>();
            }
        }
        if self.m0 > 0 {
            (bundle.common_diffusion)(t, x, cloud, &mut self.sigma0);
            for c in 0..self.d {
                let row = &self.sigma0[c * self.m0..(c + 1) * self.m0];
                out[c] += row.iter().zip(db).map(|(s, w)| s * w).sum::<f64>();
            }
        }
    }
}

#[inline]
pub(crate) fn blown_up(x: &[f64]) -> bool {
    x.iter().any(|v| !(v.abs() <= BLOW_UP))
}

/// Materialise the open-loop part of a profile for this noise realisation.
pub(crate) fn open_controls<'p>(
    profile: &'p StrategyProfile,
    noise: &NoiseBundle,
) -> Result<Vec<Option<Cow<'p, RelaxedControlPath>>>> {
    let grid = noise.grid();
    profile
        .players
        .iter()
        .enumerate()
        .map(|(i, s)| match s {
            PlayerStrategy::Feedback(_) => Ok(None),
            PlayerStrategy::Open(q) => {
                if q.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                Ok(Some(Cow::Borrowed(q.as_ref())))
            }
            PlayerStrategy::Sampled(sampler) => {
                let q = sampler.sample(i, &noise.environment, noise.player(i), grid)?;
                if q.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                Ok(Some(Cow::Owned(q)))
            }
        })
        .collect()
}

/// Euler-Maruyama simulation of the n-player system. The cloud seen by
/// every coefficient at step `k` is the empirical measure of all `n`
/// states at `t_k`, the player's own state included; relaxed controls
/// enter through the exact atom average of the drift.
pub fn simulate_nplayer(
    bundle: &CoefficientBundle,
    profile: &StrategyProfile,
    noise: &NoiseBundle,
) -> Result<ParticleTrajectories> {
    let n = noise.players();
    if profile.len() != n {
        return Err(Error::CountMismatch {
            left: profile.len(),
            right: n,
        });
    }
    let grid = noise.grid();
    let (d, m, m0) = (bundle.dims.d, bundle.dims.m, bundle.dims.m0);
    let k_dim = bundle.action_dim();
    let dt = grid.dt();
    let open = open_controls(profile, noise)?;
    let mut feedback_actions: Vec<Vec<f64>> = profile
        .players
        .iter()
        .map(|s| match s {
            PlayerStrategy::Feedback(_) => Vec::with_capacity(grid.steps() * k_dim),
            _ => Vec::new(),
        })
        .collect();

    let mut initial = Vec::with_capacity(n * d);
    for i in 0..n {
        initial.extend_from_slice(noise.initial(i));
    }
    let mut clouds = Vec::with_capacity(grid.nodes());
    clouds.push(ParticleCloud::new(d, initial)?);
    let mut stepper = Stepper::new(bundle);
    let common = noise.common_increments();

    for k in 0..grid.steps() {
        let t = grid.time(k);
        let cloud = &clouds[k];
        let mut next = vec![0.0; n * d];
        let db = &common[k * m0..(k + 1) * m0];
        for i in 0..n {
            let x = cloud.point(i);
            let pn = noise.player(i);
            let dw = &pn.w[k * m..(k + 1) * m];
            let q = match (&profile.players[i], &open[i]) {
                (PlayerStrategy::Feedback(policy), _) => {
                    let obs = Observation {
                        t,
                        step: k,
                        state: x,
                        cloud: cloud.view(),
                        signal: noise.environment.signal(k),
                    };
                    policy.act(&obs, &bundle.actions, stepper.action_mut());
                    feedback_actions[i].extend_from_slice(&stepper.action);
                    None
                }
                (_, Some(q)) => Some(q.step(k)),
                _ => unreachable!("open control materialised for every non-feedback player"),
            };
            let out = &mut next[i * d..(i + 1) * d];
            stepper.advance(bundle, t, dt, x, cloud.view(), q, dw, db, out);
            if blown_up(out) {
                return Err(Error::BlowUp { step: k + 1, player: i });
            }
        }
        clouds.push(ParticleCloud::new(d, next)?);
    }

    let controls = open
        .into_iter()
        .zip(feedback_actions)
        .map(|(o, acts)| match o {
            Some(q) => q.into_owned(),
            None => RelaxedControlPath::strict_unchecked(grid, k_dim, acts),
        })
        .collect();
    Ok(ParticleTrajectories {
        flow: MeasureFlow::new(grid, clouds)?,
        controls,
        environment: noise.environment.clone(),
    })
}

/// States of the k-modified system, in which every coefficient sees the
/// empirical measure of the other `n - 1` states only.
#[derive(Clone, Debug)]
pub struct KModified {
    pub k: usize,
    /// All `n` modified states `Y^{-k,i}` at every node.
    pub states: MeasureFlow,
    /// The empirical flow of `Y^{-k,i}`, `i != k`.
    pub reduced_flow: MeasureFlow,
}

impl KModified {
    pub fn state_path(&self, i: usize) -> PathSample {
        path_of(&self.states, i)
    }
}

/// Simulate the k-modified system on the same noise, driving each player
/// with the control it used in the unmodified run `base`.
pub fn simulate_k_modified(
    bundle: &CoefficientBundle,
    base: &ParticleTrajectories,
    k: usize,
    noise: &NoiseBundle,
) -> Result<KModified> {
    let n = noise.players();
    if n < 2 {
        return Err(crate::error::invalid("k-modified system", "needs at least two players"));
    }
    if k >= n {
        return Err(crate::error::invalid("k-modified system", format!("player {k} out of range")));
    }
    if base.players() != n || base.grid() != noise.grid() {
        return Err(Error::CountMismatch {
            left: base.players(),
            right: n,
        });
    }
    let grid = noise.grid();
    let (d, m, m0) = (bundle.dims.d, bundle.dims.m, bundle.dims.m0);
    let dt = grid.dt();
    let mut initial = Vec::with_capacity(n * d);
    for i in 0..n {
        initial.extend_from_slice(noise.initial(i));
    }
    let mut all = Vec::with_capacity(grid.nodes());
    let mut reduced = Vec::with_capacity(grid.nodes());
    let drop_k = |pts: &[f64]| -> Vec<f64> {
        pts.chunks_exact(d)
            .enumerate()
            .filter(|(i, _)| *i != k)
            .flat_map(|(_, p)| p.iter().copied())
            .collect()
    };
    reduced.push(ParticleCloud::new(d, drop_k(&initial))?);
    all.push(ParticleCloud::new(d, initial)?);
    let mut stepper = Stepper::new(bundle);
    let common = noise.common_increments();
    for step in 0..grid.steps() {
        let t = grid.time(step);
        let cur = &all[step];
        let cloud = &reduced[step];
        let db = &common[step * m0..(step + 1) * m0];
        let mut next = vec![0.0; n * d];
        for i in 0..n {
            let pn = noise.player(i);
            let out = &mut next[i * d..(i + 1) * d];
            stepper.advance(
                bundle,
                t,
                dt,
                cur.point(i),
                cloud.view(),
                Some(base.controls[i].step(step)),
                &pn.w[step * m..(step + 1) * m],
                db,
                out,
            );
            if blown_up(out) {
                return Err(Error::BlowUp { step: step + 1, player: i });
            }
        }
        reduced.push(ParticleCloud::new(d, drop_k(&next))?);
        all.push(ParticleCloud::new(d, next)?);
    }
    Ok(KModified {
        k,
        states: MeasureFlow::new(grid, all)?,
        reduced_flow: MeasureFlow::new(grid, reduced)?,
    })
}

/// Control of a single agent facing a frozen flow.
#[derive(Clone, Copy, Debug)]
pub enum AgentControl<'a> {
    Open(&'a RelaxedControlPath),
    Feedback(&'a FeedbackPolicy),
}

/// One agent against a frozen flow: returns its state path and the
/// (strict, for feedback) control it used.
pub fn simulate_vs_flow(
    bundle: &CoefficientBundle,
    control: AgentControl<'_>,
    flow: &MeasureFlow,
    noise: PlayerNoise<'_>,
    env: &Environment,
) -> Result<(PathSample, RelaxedControlPath)> {
    let grid = flow.grid();
    if let AgentControl::Open(q) = control {
        if q.grid() != grid {
            return Err(Error::GridMismatch);
        }
    }
    let (d, m, m0) = (bundle.dims.d, bundle.dims.m, bundle.dims.m0);
    let k_dim = bundle.action_dim();
    let dt = grid.dt();
    let mut values = vec![0.0; grid.nodes() * d];
    values[..d].copy_from_slice(noise.xi);
    let mut actions = Vec::new();
    let mut stepper = Stepper::new(bundle);
    for k in 0..grid.steps() {
        let t = grid.time(k);
        let (head, tail) = values.split_at_mut((k + 1) * d);
        let x = &head[k * d..];
        let cloud = flow.cloud(k).view();
        let q = match control {
            AgentControl::Open(q) => Some(q.step(k)),
            AgentControl::Feedback(policy) => {
                let obs = Observation {
                    t,
                    step: k,
                    state: x,
                    cloud,
                    signal: env.signal(k),
                };
                policy.act(&obs, &bundle.actions, stepper.action_mut());
                actions.extend_from_slice(&stepper.action);
                None
            }
        };
        let out = &mut tail[..d];
        stepper.advance(
            bundle,
            t,
            dt,
            x,
            cloud,
            q,
            &noise.w[k * m..(k + 1) * m],
            &noise.common[k * m0..(k + 1) * m0],
            out,
        );
        if blown_up(out) {
            return Err(Error::BlowUp { step: k + 1, player: 0 });
        }
    }
    let q = match control {
        AgentControl::Open(q) => q.clone(),
        AgentControl::Feedback(_) => RelaxedControlPath::strict_unchecked(grid, k_dim, actions),
    };
    Ok((PathSample::new_unchecked(grid, d, values), q))
}

/// Path of player `i` after switching to `policy` while every other path
/// stays as in `base`. Valid when the dynamics ignore the cloud and no
/// other player reacts to the cloud; the deviating player sees `base`'s
/// clouds with its own particle replaced. Returns the deviating path and
/// its actions (`steps x action_dim`).
pub(crate) fn simulate_deviation(
    bundle: &CoefficientBundle,
    base: &ParticleTrajectories,
    i: usize,
    policy: &FeedbackPolicy,
    noise: &NoiseBundle,
    stepper: &mut Stepper,
    values: &mut Vec<f64>,
    actions: &mut Vec<f64>,
) -> Result<()> {
    let grid = base.grid();
    let (d, m, m0) = (bundle.dims.d, bundle.dims.m, bundle.dims.m0);
    let dt = grid.dt();
    let pn = noise.player(i);
    values.clear();
    values.resize(grid.nodes() * d, 0.0);
    values[..d].copy_from_slice(pn.xi);
    actions.clear();
    let mut mean = vec![0.0; d];
    for k in 0..grid.steps() {
        let t = grid.time(k);
        let (head, tail) = values.split_at_mut((k + 1) * d);
        let x = &head[k * d..];
        let base_cloud = base.flow.cloud(k);
        swapped_mean(base_cloud, i, x, &mut mean);
        let cloud = CloudView::Swapped {
            base: base_cloud,
            index: i,
            point: x,
            mean: &mean,
        };
        let obs = Observation {
            t,
            step: k,
            state: x,
            cloud,
            signal: base.environment.signal(k),
        };
        policy.act(&obs, &bundle.actions, stepper.action_mut());
        actions.extend_from_slice(&stepper.action);
        let out = &mut tail[..d];
        stepper.advance(
            bundle,
            t,
            dt,
            x,
            cloud,
            None,
            &pn.w[k * m..(k + 1) * m],
            &pn.common[k * m0..(k + 1) * m0],
            out,
        );
        if blown_up(out) {
            return Err(Error::BlowUp { step: k + 1, player: i });
        }
    }
    Ok(())
}
