use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;
use crate::measures::cloud::norm;
use crate::model::ActionSet;

const WEIGHT_TOL: f64 = 1e-12;

/// Finitely supported probability measure on actions for one time step.
#[derive(Clone, Copy, Debug)]
pub struct StepMeasure<'a> {
    pub dim: usize,
    pub atoms: &'a [f64],
    pub weights: &'a [f64],
}

impl<'a> StepMeasure<'a> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, j: usize) -> &'a [f64] {
        &self.atoms[j * self.dim..(j + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'a [f64], f64)> + 'a {
        let (atoms, weights, dim) = (self.atoms, self.weights, self.dim);
        atoms.chunks_exact(dim).zip(weights.iter().copied())
    }

    /// `int |a|^p q(da)`.
    pub fn moment(&self, p: f64) -> f64 {
        self.iter().map(|(a, w)| w * norm(a).powf(p)).sum()
    }

    pub fn mean(&self, out: &mut [f64]) {
        out.fill(0.0);
        for (a, w) in self.iter() {
            for (o, v) in out.iter_mut().zip(a) {
                *o += w * v;
            }
        }
    }
}

/// Relaxed control on a uniform grid: one finitely supported probability
/// measure on the action set per time step, held constant on
/// `[t_k, t_{k+1})`. A strict control has a single atom in every step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelaxedControlPath {
    grid: TimeGrid,
    dim: usize,
    offsets: Vec<usize>,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl RelaxedControlPath {
    /// Build from per-step `(atoms, weights)` with atoms flattened row-major.
    pub fn new(grid: TimeGrid, dim: usize, steps: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        if steps.len() != grid.steps() {
            return Err(Error::CountMismatch {
                left: steps.len(),
                right: grid.steps(),
            });
        }
        let mut out = Self {
            grid,
            dim,
            offsets: vec![0],
            atoms: Vec::new(),
            weights: Vec::new(),
        };
        for (atoms, weights) in steps {
            if weights.is_empty() || atoms.len() != weights.len() * dim {
                return Err(invalid("relaxed control", "atoms and weights disagree"));
            }
            if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || atoms.iter().any(|a| !a.is_finite()) {
                return Err(invalid("relaxed control", "weights must be nonnegative and atoms finite"));
            }
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > WEIGHT_TOL * weights.len().max(1) as f64 {
                return Err(invalid("relaxed control", format!("step weights sum to {total}")));
            }
            out.atoms.extend(atoms);
            out.weights.extend(weights);
            out.offsets.push(out.weights.len());
        }
        Ok(out)
    }

    /// Strict control from one action per step (flattened, `steps x dim`).
    pub fn strict(grid: TimeGrid, dim: usize, actions: Vec<f64>) -> Result<Self> {
        if dim == 0 || actions.len() != grid.steps() * dim {
            return Err(invalid("strict control", "need one action per step"));
        }
        if actions.iter().any(|a| !a.is_finite()) {
            return Err(invalid("strict control", "actions must be finite"));
        }
        Ok(Self::strict_unchecked(grid, dim, actions))
    }

    pub(crate) fn strict_unchecked(grid: TimeGrid, dim: usize, actions: Vec<f64>) -> Self {
        let steps = grid.steps();
        Self {
            grid,
            dim,
            offsets: (0..=steps).collect(),
            atoms: actions,
            weights: vec![1.0; steps],
        }
    }

    pub fn constant(grid: TimeGrid, action: &[f64]) -> Self {
        let actions = action.iter().copied().cycle().take(grid.steps() * action.len()).collect();
        Self::strict_unchecked(grid, action.len(), actions)
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn step(&self, k: usize) -> StepMeasure<'_> {
        let (lo, hi) = (self.offsets[k], self.offsets[k + 1]);
        StepMeasure {
            dim: self.dim,
            atoms: &self.atoms[lo * self.dim..hi * self.dim],
            weights: &self.weights[lo..hi],
        }
    }

    pub fn total_atoms(&self) -> usize {
        self.weights.len()
    }

    pub fn is_strict(&self) -> bool {
        self.weights.len() == self.steps()
    }

    /// The action of step `k` for strict controls.
    pub fn action(&self, k: usize) -> Option<&[f64]> {
        let s = self.step(k);
        (s.len() == 1).then(|| s.atom(0))
    }

    /// `int_0^T int_A |a|^p q_t(da) dt` with the step measure held on each interval.
    pub fn moment(&self, p: f64) -> f64 {
        let dt = self.grid.dt();
        (0..self.steps()).map(|k| dt * self.step(k).moment(p)).sum()
    }

    pub fn is_within(&self, actions: &ActionSet) -> bool {
        self.atoms.chunks_exact(self.dim).all(|a| actions.contains(a))
    }

    /// Same measure-valued path on a grid with every step split `factor` times.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.refine(factor)?;
        let mut offsets = vec![0];
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for k in 0..self.steps() {
            let s = self.step(k);
            for _ in 0..factor {
                atoms.extend_from_slice(s.atoms);
                weights.extend_from_slice(s.weights);
                offsets.push(weights.len());
            }
        }
        Ok(Self {
            grid,
            dim: self.dim,
            offsets,
            atoms,
            weights,
        })
    }

    /// Push every atom through the radial truncation `a -> a` for
    /// `|a| <= k`, `a -> k a / |a|` otherwise. Weights are unchanged.
    pub fn truncate_actions(&self, k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(invalid("truncation level", "must be positive"));
        }
        let mut out = self.clone();
        for a in out.atoms.chunks_exact_mut(self.dim) {
            let r = norm(a);
            if r > k {
                a.iter_mut().for_each(|v| *v *= k / r);
            }
        }
        Ok(out)
    }
}
