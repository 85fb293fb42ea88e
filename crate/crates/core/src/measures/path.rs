use serde::Serialize;

use crate::controls::RelaxedControlPath;
use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;
use crate::measures::cloud::dist;
use crate::measures::control::{control_distance, ControlMetric};
use crate::measures::{assignment, simplex};

/// Path sampled at the nodes of a uniform grid, values stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSample {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl PathSample {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != grid.nodes() * dim {
            return Err(invalid("path", format!("need {} values of dimension {dim}", grid.nodes())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("path", "values must be finite"));
        }
        Ok(Self { grid, dim, values })
    }

    pub(crate) fn new_unchecked(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.nodes() * dim);
        Self { grid, dim, values }
    }

    pub fn from_fn(grid: TimeGrid, dim: usize, f: impl Fn(f64, &mut [f64])) -> Result<Self> {
        let mut values = vec![0.0; grid.nodes() * dim];
        for (k, chunk) in values.chunks_exact_mut(dim).enumerate() {
            f(grid.time(k), chunk);
        }
        Self::new(grid, dim, values)
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        Self::new_unchecked(grid, dim, vec![0.0; grid.nodes() * dim])
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn terminal(&self) -> &[f64] {
        self.value(self.grid.steps())
    }

    /// `sup_{s <= t} |x_s|` over grid nodes.
    pub fn truncated_sup_norm(&self, t: f64) -> f64 {
        let last = self.grid.node_at_or_before(t);
        self.values[..(last + 1) * self.dim]
            .chunks_exact(self.dim)
            .map(crate::measures::cloud::norm)
            .fold(0.0, f64::max)
    }
}

/// `max_{t_k <= t} |x_{t_k} - y_{t_k}|`.
pub fn truncated_sup_distance(x: &PathSample, y: &PathSample, t: f64) -> Result<f64> {
    if x.grid != y.grid {
        return Err(Error::GridMismatch);
    }
    if x.dim != y.dim {
        return Err(Error::DimensionMismatch {
            expected: x.dim,
            found: y.dim,
        });
    }
    if !(0.0..=x.grid.horizon() * (1.0 + 1e-12)).contains(&t) {
        return Err(invalid("time", format!("{t} outside [0, T]")));
    }
    Ok(sup_distance_upto(x, y, x.grid.node_at_or_before(t)))
}

fn sup_distance_upto(x: &PathSample, y: &PathSample, last: usize) -> f64 {
    let n = (last + 1) * x.dim;
    if x.dim == 1 {
        x.values[..n]
            .iter()
            .zip(&y.values[..n])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    } else {
        x.values[..n]
            .chunks_exact(x.dim)
            .zip(y.values[..n].chunks_exact(x.dim))
            .map(|(a, b)| dist(a, b))
            .fold(0.0, f64::max)
    }
}

/// One `(w, q, x)` element of the canonical path space: noise path,
/// relaxed control and state path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathTriple {
    pub w: PathSample,
    pub q: RelaxedControlPath,
    pub x: PathSample,
}

/// Equal-weight empirical measure on triples sharing one grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalPathMeasure {
    triples: Vec<PathTriple>,
}

impl EmpiricalPathMeasure {
    pub fn new(triples: Vec<PathTriple>) -> Result<Self> {
        let Some(first) = triples.first() else {
            return Err(Error::Empty("empirical path measure"));
        };
        let grid = first.x.grid();
        for t in &triples {
            if t.w.grid() != grid || t.q.grid() != grid || t.x.grid() != grid {
                return Err(Error::GridMismatch);
            }
            if t.w.dim() != first.w.dim() || t.x.dim() != first.x.dim() || t.q.dim() != first.q.dim() {
                return Err(invalid("empirical path measure", "triples disagree on dimensions"));
            }
        }
        Ok(Self { triples })
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[PathTriple] {
        &self.triples
    }

    pub fn grid(&self) -> TimeGrid {
        self.triples[0].x.grid()
    }
}

/// Metric on triples: `||w - w'||_T + d_V(q, q') + ||x - x'||_T`, with
/// `d_V` taken with exponent `control_p` in the given mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathMetric {
    pub control_p: f64,
    pub control: ControlMetric,
}

impl PathMetric {
    pub fn diagonal(control_p: f64) -> Self {
        Self {
            control_p,
            control: ControlMetric::Diagonal,
        }
    }
}

pub fn triple_distance(metric: PathMetric, a: &PathTriple, b: &PathTriple) -> Result<f64> {
    let steps = a.x.grid().steps();
    if a.x.grid() != b.x.grid() || a.w.grid() != b.w.grid() {
        return Err(Error::GridMismatch);
    }
    let dw = sup_distance_upto(&a.w, &b.w, steps);
    let dx = sup_distance_upto(&a.x, &b.x, steps);
    let dv = control_distance(metric.control_p, &a.q, &b.q, metric.control)?;
    Ok(dw + dv + dx)
}

/// Exact `p`-Wasserstein distance between two equal-size empirical path
/// measures under the triple metric, solved as an assignment problem.
pub fn path_measure_distance(p: f64, mu1: &EmpiricalPathMeasure, mu2: &EmpiricalPathMeasure) -> Result<f64> {
    let control_p = p;
    path_measure_distance_with(p, PathMetric::diagonal(control_p), mu1, mu2)
}

pub fn path_measure_distance_with(
    p: f64,
    metric: PathMetric,
    mu1: &EmpiricalPathMeasure,
    mu2: &EmpiricalPathMeasure,
) -> Result<f64> {
    if mu1.len() != mu2.len() {
        return Err(Error::CountMismatch {
            left: mu1.len(),
            right: mu2.len(),
        });
    }
    if mu1.grid() != mu2.grid() {
        return Err(Error::GridMismatch);
    }
    let n = mu1.len();
    if n > assignment::MAX_ASSIGNMENT {
        return Err(Error::AtomBudget {
            atoms: n,
            budget: assignment::MAX_ASSIGNMENT,
        });
    }
    let cost = triple_costs(p, metric, mu1.triples(), mu2.triples())?;
    let (_, total) = assignment::solve(n, &cost);
    Ok((total.max(0.0) / n as f64).powf(1.0 / p))
}

fn triple_costs(p: f64, metric: PathMetric, a: &[PathTriple], b: &[PathTriple]) -> Result<Vec<f64>> {
    let mut cost = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            cost.push(triple_distance(metric, x, y)?.powf(p));
        }
    }
    Ok(cost)
}

/// Exact `p`-Wasserstein distance between empirical path measures of any
/// sizes (equal weights within each), via the transport simplex. Returns
/// the distance to the power `p`.
pub fn path_transport_cost(p: f64, metric: PathMetric, a: &[PathTriple], b: &[PathTriple]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("empirical path measure"));
    }
    let cost = triple_costs(p, metric, a, b)?;
    if a.len() == b.len() {
        let (_, total) = assignment::solve(a.len(), &cost);
        return Ok(total.max(0.0) / a.len() as f64);
    }
    let wa = vec![1.0 / a.len() as f64; a.len()];
    let wb = vec![1.0 / b.len() as f64; b.len()];
    Ok(simplex::solve(&wa, &wb, &cost)?.cost.max(0.0))
}
