use rand::Rng;
use rand_distr::StandardNormal;

use crate::controls::Environment;
use crate::error::{invalid, Result};
use crate::grid::TimeGrid;
use crate::measures::PathSample;
use crate::model::CoefficientBundle;
use crate::rng::{derive_seed, stream};

/// Brownian increments for one player plus its initial state.
#[derive(Clone, Copy, Debug)]
pub struct PlayerNoise<'a> {
    /// Idiosyncratic increments, `steps x m`.
    pub w: &'a [f64],
    /// Common increments, `steps x m0`.
    pub common: &'a [f64],
    pub xi: &'a [f64],
    /// Seed reserved for the player's own extra randomisation.
    pub seed: u64,
}

/// Realised noise of an n-player run: common and idiosyncratic Brownian
/// increments on the grid, i.i.d. initial states, and the environment.
#[derive(Clone, Debug)]
pub struct NoiseBundle {
    grid: TimeGrid,
    n: usize,
    d: usize,
    m: usize,
    m0: usize,
    seed: u64,
    common: Vec<f64>,
    idio: Vec<f64>,
    initials: Vec<f64>,
    pub environment: Environment,
}

fn fill_increments(rng: &mut crate::rng::SimRng, sd: f64, out: &mut [f64]) {
    for v in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = sd * z;
    }
}

/// Draw noise for `n` players on `steps` steps. Every player and the common
/// noise read their own derived stream, so player `i`'s noise does not
/// depend on `n`.
pub fn sample_noise(bundle: &CoefficientBundle, n: usize, steps: usize, seed: u64) -> Result<NoiseBundle> {
    sample_noise_with(bundle, n, steps, seed, false)
}

/// As [`sample_noise`]; with `antithetic`, player `2j + 1` receives the
/// negated increments of player `2j`.
pub fn sample_noise_with(
    bundle: &CoefficientBundle,
    n: usize,
    steps: usize,
    seed: u64,
    antithetic: bool,
) -> Result<NoiseBundle> {
    if n == 0 {
        return Err(invalid("noise", "need at least one player"));
    }
    let grid = TimeGrid::new(bundle.horizon, steps)?;
    let crate::model::Dims { d, m, m0 } = bundle.dims;
    let sd = grid.dt().sqrt();
    let mut common = vec![0.0; steps * m0];
    fill_increments(&mut stream(seed, "common", &[]), sd, &mut common);
    let mut idio = vec![0.0; n * steps * m];
    let mut initials = vec![0.0; n * d];
    let block = steps * m;
    for i in 0..n {
        let (done, rest) = idio.split_at_mut(i * block);
        let out = &mut rest[..block];
        if antithetic && i % 2 == 1 {
            for (o, v) in out.iter_mut().zip(&done[(i - 1) * block..]) {
                *o = -v;
            }
        } else {
            fill_increments(&mut stream(seed, "idiosyncratic", &[i as u64]), sd, out);
        }
        (bundle.initial)(&mut stream(seed, "initial", &[i as u64]), &mut initials[i * d..(i + 1) * d]);
    }
    if initials.iter().any(|v| !v.is_finite()) {
        return Err(invalid("initial law", "sampler returned a non-finite state"));
    }
    Ok(NoiseBundle {
        grid,
        n,
        d,
        m,
        m0,
        seed,
        common,
        idio,
        initials,
        environment: Environment::none(),
    })
}

impl NoiseBundle {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn players(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.d, self.m, self.m0)
    }

    pub fn with_environment(mut self, env: Environment) -> Self {
        self.environment = env;
        self
    }

    pub fn player(&self, i: usize) -> PlayerNoise<'_> {
        let block = self.grid.steps() * self.m;
        PlayerNoise {
            w: &self.idio[i * block..(i + 1) * block],
            common: &self.common,
            xi: &self.initials[i * self.d..(i + 1) * self.d],
            seed: derive_seed(self.seed, "player", &[i as u64]),
        }
    }

    pub fn common_increments(&self) -> &[f64] {
        &self.common
    }

    pub fn initial(&self, i: usize) -> &[f64] {
        &self.initials[i * self.d..(i + 1) * self.d]
    }

    /// Cumulative path `W^i` on the grid.
    pub fn idiosyncratic_path(&self, i: usize) -> PathSample {
        cumulate(self.grid, self.m, self.player(i).w)
    }

    /// Cumulative path `B` on the grid.
    pub fn common_path(&self) -> PathSample {
        cumulate(self.grid, self.m0, &self.common)
    }

    /// Relabel players: new player `j` gets old player `perm[j]`'s noise.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let block = self.grid.steps() * self.m;
        let mut idio = Vec::with_capacity(self.idio.len());
        let mut initials = Vec::with_capacity(self.initials.len());
        for &j in perm {
            idio.extend_from_slice(&self.idio[j * block..(j + 1) * block]);
            initials.extend_from_slice(self.initial(j));
        }
        Self {
            idio,
            initials,
            ..self.clone()
        }
    }
}

pub(crate) fn cumulate(grid: TimeGrid, dim: usize, increments: &[f64]) -> PathSample {
    let mut values = vec![0.0; grid.nodes() * dim];
    for k in 0..grid.steps() {
        for c in 0..dim {
            values[(k + 1) * dim + c] = values[k * dim + c] + increments[k * dim + c];
        }
    }
    PathSample::new_unchecked(grid, dim.max(1), if dim == 0 { vec![0.0; grid.nodes()] } else { values })
}
