use std::sync::Arc;

use crate::error::Result;
use crate::measures::CloudView;
use crate::model::{ActionSet, CoefficientBundle, DiffusionFn, Dims, InitialFn};

/// Two-period example with `T = 2`, `lambda = delta_0`, `A = [-1, 1]`,
/// `b = a`, constant volatility `sigma`, no common noise, `f = 0` and
/// `g(x, nu) = x * mean(nu)`. Exponents `(p, p', p_sigma) = (2, 3, 0)`.
pub fn scenario_example33(sigma: f64) -> Result<CoefficientBundle> {
    CoefficientBundle::builder("example33", Dims { d: 1, m: 1, m0: 1 }, 2.0)
        .actions(ActionSet::interval(-1.0, 1.0)?)
        .exponents(2.0, 3.0, 0.0)
        .drift(|_, _, _, a, out| out[0] = a[0])
        .scalar_diffusion(sigma)
        .terminal(|x, cloud| x[0] * cloud.mean()[0])
        .cloud_free_dynamics(true)
        .build()
}

/// Scalar game with drift `a + mean(cloud)`, unit volatility,
/// `A = [-1, 1]`, `f = -|a|^3`, `g = 0`, standard normal initial law and
/// `T = 1`. Every particle feels the cloud mean, so removing one player
/// from the empirical measure moves everybody.
pub fn scenario_mean_coupled(sigma: f64) -> Result<CoefficientBundle> {
    CoefficientBundle::builder("mean_coupled", Dims { d: 1, m: 1, m0: 1 }, 1.0)
        .actions(ActionSet::interval(-1.0, 1.0)?)
        .exponents(2.0, 3.0, 0.0)
        .drift(|_, _, cloud, a, out| out[0] = a[0] + cloud.mean()[0])
        .scalar_diffusion(sigma)
        .running(|_, _, _, a| -a[0].abs().powi(3))
        .initial(|rng, out| out[0] = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng))
        .build()
}

/// Uncontrolled dynamics `dX = b(t, X, mu) dt + sigma dW + sigma_0 dB`.
#[derive(Clone)]
pub struct NoControl {
    pub name: String,
    pub dims: Dims,
    pub horizon: f64,
    pub drift: Arc<dyn Fn(f64, &[f64], CloudView<'_>, &mut [f64]) + Send + Sync>,
    pub diffusion: DiffusionFn,
    pub common_diffusion: DiffusionFn,
    pub initial: InitialFn,
    /// The drift and volatilities ignore the cloud.
    pub cloud_free: bool,
}

impl NoControl {
    /// Zero drift, zero volatilities, `lambda = delta_0`.
    pub fn new(name: impl Into<String>, dims: Dims, horizon: f64) -> Self {
        Self {
            name: name.into(),
            dims,
            horizon,
            drift: Arc::new(|_, _, _, out: &mut [f64]| out.fill(0.0)),
            diffusion: Arc::new(|_, _, _, out: &mut [f64]| out.fill(0.0)),
            common_diffusion: Arc::new(|_, _, _, out: &mut [f64]| out.fill(0.0)),
            initial: Arc::new(|_, out: &mut [f64]| out.fill(0.0)),
            cloud_free: false,
        }
    }

    pub fn unit_diffusion(mut self) -> Self {
        let Dims { d, m, .. } = self.dims;
        self.diffusion = Arc::new(move |_, _, _, out: &mut [f64]| {
            out.fill(0.0);
            for i in 0..d.min(m) {
                out[i * m + i] = 1.0;
            }
        });
        self
    }
}

/// Weakly interacting diffusion viewed as a game with a single action and
/// no rewards.
pub fn scenario_no_control(parts: NoControl) -> Result<CoefficientBundle> {
    let drift = parts.drift.clone();
    let mut builder = CoefficientBundle::builder(parts.name, parts.dims, parts.horizon)
        .actions(ActionSet::singleton(vec![0.0])?)
        .drift(move |t, x, cloud, _, out| drift(t, x, cloud, out))
        .cloud_free_dynamics(parts.cloud_free);
    let diffusion = parts.diffusion;
    let common = parts.common_diffusion;
    let initial = parts.initial;
    builder = builder
        .diffusion(move |t, x, c, out| diffusion(t, x, c, out))
        .common_diffusion(move |t, x, c, out| common(t, x, c, out))
        .initial(move |rng, out| initial(rng, out));
    builder.build()
}
