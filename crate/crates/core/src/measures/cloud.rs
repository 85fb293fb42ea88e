use crate::error::{Error, Result};
use crate::measures::{assignment, simplex};

/// Equal-weight empirical measure on `R^d`, stored as a flat row-major
/// array of points. The mean is computed once at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCloud {
    dim: usize,
    points: Vec<f64>,
    mean: Vec<f64>,
}

impl ParticleCloud {
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        if points.is_empty() {
            return Err(Error::Empty("particle cloud"));
        }
        if points.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: points.len() % dim,
            });
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(crate::error::invalid("particle cloud", "points must be finite"));
        }
        let mean = mean_of(dim, &points);
        Ok(Self { dim, points, mean })
    }

    pub fn from_scalars(values: Vec<f64>) -> Result<Self> {
        Self::new(1, values)
    }

    pub fn dirac(point: &[f64]) -> Result<Self> {
        Self::new(point.len(), point.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// `(1/n) sum_i |x_i|^p`.
    pub fn moment(&self, p: f64) -> f64 {
        self.iter().map(|x| norm(x).powf(p)).sum::<f64>() / self.len() as f64
    }

    pub fn view(&self) -> CloudView<'_> {
        CloudView::Full(self)
    }

    pub fn map(&self, f: impl Fn(&[f64], &mut [f64])) -> Result<Self> {
        let mut out = vec![0.0; self.points.len()];
        for (src, dst) in self.iter().zip(out.chunks_exact_mut(self.dim)) {
            f(src, dst);
        }
        Self::new(self.dim, out)
    }
}

/// A cloud as seen by a coefficient: either a stored cloud or a stored
/// cloud with one particle replaced (used when a single player deviates
/// and nobody else reacts).
#[derive(Clone, Copy, Debug)]
pub enum CloudView<'a> {
    Full(&'a ParticleCloud),
    Swapped {
        base: &'a ParticleCloud,
        index: usize,
        point: &'a [f64],
        mean: &'a [f64],
    },
}

impl<'a> CloudView<'a> {
    pub fn len(&self) -> usize {
        match self {
            CloudView::Full(c) => c.len(),
            CloudView::Swapped { base, .. } => base.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        match self {
            CloudView::Full(c) => c.dim(),
            CloudView::Swapped { base, .. } => base.dim(),
        }
    }

    pub fn point(&self, i: usize) -> &'a [f64] {
        match *self {
            CloudView::Full(c) => c.point(i),
            CloudView::Swapped { base, index, point, .. } => {
                if i == index {
                    point
                } else {
                    base.point(i)
                }
            }
        }
    }

    pub fn mean(&self) -> &'a [f64] {
        match *self {
            CloudView::Full(c) => c.mean(),
            CloudView::Swapped { mean, .. } => mean,
        }
    }

    pub fn to_cloud(&self) -> ParticleCloud {
        match *self {
            CloudView::Full(c) => c.clone(),
            CloudView::Swapped { base, index, point, mean } => {
                let mut points = base.points.clone();
                points[index * base.dim..(index + 1) * base.dim].copy_from_slice(point);
                ParticleCloud {
                    dim: base.dim,
                    points,
                    mean: mean.to_vec(),
                }
            }
        }
    }
}

/// Mean of `base` after replacing particle `index` by `point`, written to `out`.
pub fn swapped_mean(base: &ParticleCloud, index: usize, point: &[f64], out: &mut [f64]) {
    let n = base.len() as f64;
    let old = base.point(index);
    for c in 0..base.dim {
        out[c] = base.mean[c] + (point[c] - old[c]) / n;
    }
}

fn mean_of(dim: usize, points: &[f64]) -> Vec<f64> {
    let mut mean = vec![0.0; dim];
    for x in points.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    let n = (points.len() / dim) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    if x.len() == 1 {
        x[0].abs()
    } else {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    if x.len() == 1 {
        (x[0] - y[0]).abs()
    } else {
        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

/// Largest total atom count solved with the general transport simplex.
pub const MAX_LP_ATOMS: usize = 64;

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(crate::error::invalid("exponent", format!("p must be >= 1, got {p}")));
    }
    Ok(())
}

/// Largest scalar cloud still solved by assignment.
pub const SMALL_SCALAR: usize = 64;

/// Exact p-Wasserstein distance between two equal-weight clouds.
///
/// Equal counts are solved as an assignment problem (up to
/// [`assignment::MAX_ASSIGNMENT`] points); scalar clouds with more than
/// [`SMALL_SCALAR`] points use the exact sorted matching instead. Unequal
/// counts are exact for scalar clouds via quantile functions and for small
/// multivariate clouds via the transport simplex.
pub fn wasserstein_clouds(p: f64, a: &ParticleCloud, b: &ParticleCloud) -> Result<f64> {
    check_p(p)?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (n, m) = (a.len(), b.len());
    if n == m {
        if n == 1 {
            return Ok(dist(a.point(0), b.point(0)));
        }
        if a.dim() == 1 && n > SMALL_SCALAR {
            return wasserstein_1d(p, a.points(), b.points());
        }
        if n <= assignment::MAX_ASSIGNMENT {
            let cost = cost_matrix(p, a, b);
            let (_, total) = assignment::solve(n, &cost);
            return Ok((total.max(0.0) / n as f64).powf(1.0 / p));
        }
        return Err(Error::AtomBudget {
            atoms: n,
            budget: assignment::MAX_ASSIGNMENT,
        });
    }
    if a.dim() == 1 {
        return Ok(quantile_distance(p, a.points(), b.points()));
    }
    if n + m > MAX_LP_ATOMS {
        return Err(Error::AtomBudget {
            atoms: n + m,
            budget: MAX_LP_ATOMS,
        });
    }
    let wa = vec![1.0 / n as f64; n];
    let wb = vec![1.0 / m as f64; m];
    let mut cost = Vec::with_capacity(n * m);
    for x in a.iter() {
        for y in b.iter() {
            cost.push(dist(x, y).powf(p));
        }
    }
    let plan = simplex::solve(&wa, &wb, &cost)?;
    Ok(plan.cost.max(0.0).powf(1.0 / p))
}

fn cost_matrix(p: f64, a: &ParticleCloud, b: &ParticleCloud) -> Vec<f64> {
    let mut cost = Vec::with_capacity(a.len() * b.len());
    for x in a.iter() {
        for y in b.iter() {
            let d = dist(x, y);
            cost.push(if p == 1.0 { d } else { d.powf(p) });
        }
    }
    cost
}

/// p-Wasserstein distance between two equal-length scalar samples by
/// quantile matching. Inputs are expected sorted; unsorted input is sorted
/// on a copy first, which costs an allocation and `O(n log n)`.
pub fn wasserstein_1d(p: f64, a: &[f64], b: &[f64]) -> Result<f64> {
    check_p(p)?;
    if a.len() != b.len() {
        return Err(Error::CountMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty("sample"));
    }
    let a = sorted(a);
    let b = sorted(b);
    let total: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs().powf(p)).sum();
    Ok((total / a.len() as f64).powf(1.0 / p))
}

fn sorted(v: &[f64]) -> std::borrow::Cow<'_, [f64]> {
    if v.windows(2).all(|w| w[0] <= w[1]) {
        std::borrow::Cow::Borrowed(v)
    } else {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        std::borrow::Cow::Owned(s)
    }
}

/// Exact p-Wasserstein distance between two scalar empirical measures of
/// possibly different sizes: integrate `|F^-1(u) - G^-1(u)|^p` over the
/// common refinement of the two quantile step functions.
fn quantile_distance(p: f64, a: &[f64], b: &[f64]) -> f64 {
    let a = sorted(a);
    let b = sorted(b);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut total = 0.0;
    let mut u = 0.0f64;
    while i < n && j < m {
        // Next breakpoints (i+1)/n and (j+1)/m compared exactly in integers.
        let lhs = (i + 1) * m;
        let rhs = (j + 1) * n;
        let next = if lhs <= rhs {
            (i + 1) as f64 / n as f64
        } else {
            (j + 1) as f64 / m as f64
        };
        total += (next - u) * (a[i] - b[j]).abs().powf(p);
        u = next;
        if lhs <= rhs {
            i += 1;
        }
        if rhs <= lhs {
            j += 1;
        }
    }
    total.max(0.0).powf(1.0 / p)
}

/// p-Wasserstein distance to the p-th power between two finitely supported
/// weighted measures on `R^dim` (weights need equal totals).
pub fn transport_cost_weighted(
    p: f64,
    dim: usize,
    atoms_a: &[f64],
    weights_a: &[f64],
    atoms_b: &[f64],
    weights_b: &[f64],
) -> Result<f64> {
    let n = weights_a.len();
    let m = weights_b.len();
    if n == 1 || m == 1 {
        // Every coupling with a single-atom marginal is the product coupling.
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..m {
                let w = if n == 1 { weights_b[j] } else { weights_a[i] };
                let d = dist(&atoms_a[i * dim..(i + 1) * dim], &atoms_b[j * dim..(j + 1) * dim]);
                total += w * d.powf(p);
            }
        }
        return Ok(total);
    }
    let mut cost = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            let d = dist(&atoms_a[i * dim..(i + 1) * dim], &atoms_b[j * dim..(j + 1) * dim]);
            cost.push(d.powf(p));
        }
    }
    Ok(simplex::solve(weights_a, weights_b, &cost)?.cost.max(0.0))
}
