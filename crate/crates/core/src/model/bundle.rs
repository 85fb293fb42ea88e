use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::measures::CloudView;
use crate::model::ActionSet;
use crate::rng::SimRng;

/// `b(t, x, cloud, a)` written into the output slice (length `d`).
pub type DriftFn = Arc<dyn Fn(f64, &[f64], CloudView<'_>, &[f64], &mut [f64]) + Send + Sync>;
/// `sigma(t, x, cloud)` written row-major into a `d x m` output slice.
pub type DiffusionFn = Arc<dyn Fn(f64, &[f64], CloudView<'_>, &mut [f64]) + Send + Sync>;
/// Running reward `f(t, x, cloud, a)`.
pub type RunningFn = Arc<dyn Fn(f64, &[f64], CloudView<'_>, &[f64]) -> f64 + Send + Sync>;
/// Terminal reward `g(x, cloud)`.
pub type TerminalFn = Arc<dyn Fn(&[f64], CloudView<'_>) -> f64 + Send + Sync>;
/// Draw an initial state into the output slice.
pub type InitialFn = Arc<dyn Fn(&mut SimRng, &mut [f64]) + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub p: f64,
    pub p_prime: f64,
    pub p_sigma: f64,
}

impl Exponents {
    pub fn new(p: f64, p_prime: f64, p_sigma: f64) -> Result<Self> {
        let e = Self { p, p_prime, p_sigma };
        e.check()?;
        Ok(e)
    }

    fn check(&self) -> Result<()> {
        let Self { p, p_prime, p_sigma } = *self;
        let ok = p_prime > p && p >= 1.0 && p >= p_sigma && p_prime >= 2.0 && (0.0..=2.0).contains(&p_sigma);
        if !ok || !p_prime.is_finite() {
            return Err(invalid(
                "exponents",
                format!("need p' > p >= max(1, p_sigma), p' >= 2 >= p_sigma >= 0; got ({p}, {p_prime}, {p_sigma})"),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// State dimension.
    pub d: usize,
    /// Idiosyncratic noise dimension.
    pub m: usize,
    /// Common noise dimension.
    pub m0: usize,
}

/// Model data of the game: dynamics, rewards, action set, exponents,
/// horizon and initial law. Coefficients must be pure functions.
#[derive(Clone)]
pub struct CoefficientBundle {
    pub name: String,
    pub dims: Dims,
    pub actions: ActionSet,
    pub exponents: Exponents,
    pub horizon: f64,
    pub drift: DriftFn,
    pub diffusion: DiffusionFn,
    pub common_diffusion: DiffusionFn,
    pub running: RunningFn,
    pub terminal: TerminalFn,
    pub initial: InitialFn,
    /// Declares that `b`, `sigma` and `sigma_0` never read the cloud. When a
    /// single player deviates, the others' paths are then unchanged as long
    /// as their controls do not read the cloud either, which lets the
    /// deviation be simulated alone.
    pub cloud_free_dynamics: bool,
}

impl fmt::Debug for CoefficientBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientBundle")
            .field("name", &self.name)
            .field("dims", &self.dims)
            .field("actions", &self.actions)
            .field("exponents", &self.exponents)
            .field("horizon", &self.horizon)
            .field("cloud_free_dynamics", &self.cloud_free_dynamics)
            .finish_non_exhaustive()
    }
}

impl CoefficientBundle {
    /// Start a bundle with zero coefficients, the singleton action set `{0}`,
    /// initial law `delta_0` and exponents `(2, 3, 0)`.
    pub fn builder(name: impl Into<String>, dims: Dims, horizon: f64) -> BundleBuilder {
        BundleBuilder {
            bundle: CoefficientBundle {
                name: name.into(),
                dims,
                actions: ActionSet::Finite { atoms: vec![vec![0.0]] },
                exponents: Exponents { p: 2.0, p_prime: 3.0, p_sigma: 0.0 },
                horizon,
                drift: Arc::new(|_, _, _, _, out: &mut [f64]| out.fill(0.0)),
                diffusion: Arc::new(|_, _, _, out: &mut [f64]| out.fill(0.0)),
                common_diffusion: Arc::new(|_, _, _, out: &mut [f64]| out.fill(0.0)),
                running: Arc::new(|_, _, _, _| 0.0),
                terminal: Arc::new(|_, _| 0.0),
                initial: Arc::new(|_, out: &mut [f64]| out.fill(0.0)),
                cloud_free_dynamics: false,
            },
        }
    }

    pub fn action_dim(&self) -> usize {
        self.actions.dim()
    }
}

pub struct BundleBuilder {
    bundle: CoefficientBundle,
}

impl BundleBuilder {
    pub fn actions(mut self, actions: ActionSet) -> Self {
        self.bundle.actions = actions;
        self
    }

    pub fn exponents(mut self, p: f64, p_prime: f64, p_sigma: f64) -> Self {
        self.bundle.exponents = Exponents { p, p_prime, p_sigma };
        self
    }

    pub fn drift(
        mut self,
        f: impl Fn(f64, &[f64], CloudView<'_>, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.bundle.drift = Arc::new(f);
        self
    }

    pub fn diffusion(mut self, f: impl Fn(f64, &[f64], CloudView<'_>, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.bundle.diffusion = Arc::new(f);
        self
    }

    pub fn common_diffusion(
        mut self,
        f: impl Fn(f64, &[f64], CloudView<'_>, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.bundle.common_diffusion = Arc::new(f);
        self
    }

    pub fn running(mut self, f: impl Fn(f64, &[f64], CloudView<'_>, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.bundle.running = Arc::new(f);
        self
    }

    pub fn terminal(mut self, f: impl Fn(&[f64], CloudView<'_>) -> f64 + Send + Sync + 'static) -> Self {
        self.bundle.terminal = Arc::new(f);
        self
    }

    pub fn initial(mut self, f: impl Fn(&mut SimRng, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.bundle.initial = Arc::new(f);
        self
    }

    /// Constant diffusion: `sigma` on the diagonal of the `d x m` matrix.
    pub fn scalar_diffusion(self, sigma: f64) -> Self {
        let Dims { d, m, .. } = self.bundle.dims;
        self.diffusion(move |_, _, _, out| {
            out.fill(0.0);
            for i in 0..d.min(m) {
                out[i * m + i] = sigma;
            }
        })
    }

    pub fn cloud_free_dynamics(mut self, yes: bool) -> Self {
        self.bundle.cloud_free_dynamics = yes;
        self
    }

    pub fn build(self) -> Result<CoefficientBundle> {
        let b = self.bundle;
        b.exponents.check()?;
        if b.dims.d == 0 {
            return Err(invalid("bundle", "state dimension must be positive"));
        }
        if !(b.horizon.is_finite() && b.horizon > 0.0) {
            return Err(invalid("bundle", "horizon must be positive"));
        }
        let actions = b.actions.clone().validated()?;
        Ok(CoefficientBundle { actions, ..b })
    }
}
