use crate::controls::{RelaxedControlPath, StepMeasure};
use crate::error::{Error, Result};
use crate::measures::cloud::{dist, transport_cost_weighted, MAX_LP_ATOMS};
use crate::measures::simplex;

/// How `d_V` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMetric {
    /// Optimal transport on the full time-action product (small inputs only).
    Exact,
    /// Transport restricted to couplings that never move mass in time: an
    /// upper bound on the exact value, and equal to it for strict controls
    /// that differ by a constant.
    #[default]
    Diagonal,
}

/// `d_V(q1, q2)` where `d_V^p = inf int (|t - t'|^p + |a - a'|^p) dgamma`
/// over couplings of the two measures `q_t(da) dt` on `[0, T] x A`.
///
/// The exact mode places time atoms at the left grid points and is limited
/// to [`MAX_LP_ATOMS`] atoms in total.
pub fn control_distance(p: f64, q1: &RelaxedControlPath, q2: &RelaxedControlPath, mode: ControlMetric) -> Result<f64> {
    if q1.grid() != q2.grid() {
        return Err(Error::GridMismatch);
    }
    if q1.dim() != q2.dim() {
        return Err(Error::DimensionMismatch {
            expected: q1.dim(),
            found: q2.dim(),
        });
    }
    let value = match mode {
        ControlMetric::Diagonal => diagonal_cost(p, q1, q2)?,
        ControlMetric::Exact => exact_cost(p, q1, q2)?,
    };
    Ok(value.max(0.0).powf(1.0 / p))
}

fn diagonal_cost(p: f64, q1: &RelaxedControlPath, q2: &RelaxedControlPath) -> Result<f64> {
    let dt = q1.grid().dt();
    let mut total = 0.0;
    for k in 0..q1.steps() {
        total += dt * step_cost(p, q1.step(k), q2.step(k))?;
    }
    Ok(total)
}

/// `W_p^p` between two step measures.
pub(crate) fn step_cost(p: f64, a: StepMeasure<'_>, b: StepMeasure<'_>) -> Result<f64> {
    if a.len() == 1 && b.len() == 1 {
        let d = dist(a.atoms, b.atoms);
        return Ok(if p == 1.0 { d } else { d.powf(p) });
    }
    if a.dim == 1 {
        return Ok(weighted_quantile_cost(p, a, b));
    }
    transport_cost_weighted(p, a.dim, a.atoms, a.weights, b.atoms, b.weights)
}

/// Exact `W_p^p` between weighted scalar measures through their quantile
/// functions.
fn weighted_quantile_cost(p: f64, a: StepMeasure<'_>, b: StepMeasure<'_>) -> f64 {
    let sorted = |s: StepMeasure<'_>| {
        let mut v: Vec<(f64, f64)> = s.iter().map(|(x, w)| (x[0], w)).filter(|(_, w)| *w > 0.0).collect();
        v.sort_by(|x, y| x.0.total_cmp(&y.0));
        v
    };
    let (a, b) = (sorted(a), sorted(b));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut total = 0.0;
    loop {
        let m = ra.min(rb);
        total += m * (a[i].0 - b[j].0).abs().powf(p);
        ra -= m;
        rb -= m;
        let adv_a = ra <= 1e-15;
        let adv_b = rb <= 1e-15;
        if adv_a {
            i += 1;
            if i == a.len() {
                break;
            }
            ra += a[i].1;
        }
        if adv_b {
            j += 1;
            if j == b.len() {
                break;
            }
            rb += b[j].1;
        }
    }
    total
}

fn exact_cost(p: f64, q1: &RelaxedControlPath, q2: &RelaxedControlPath) -> Result<f64> {
    let atoms = q1.total_atoms() + q2.total_atoms();
    if atoms > MAX_LP_ATOMS {
        return Err(Error::AtomBudget {
            atoms,
            budget: MAX_LP_ATOMS,
        });
    }
    let grid = q1.grid();
    let dt = grid.dt();
    let flatten = |q: &RelaxedControlPath| {
        let mut times = Vec::new();
        let mut acts = Vec::new();
        let mut mass = Vec::new();
        for k in 0..q.steps() {
            for (a, w) in q.step(k).iter() {
                times.push(grid.time(k));
                acts.push(a.to_vec());
                mass.push(dt * w);
            }
        }
        (times, acts, mass)
    };
    let (t1, a1, m1) = flatten(q1);
    let (t2, a2, m2) = flatten(q2);
    let mut cost = Vec::with_capacity(t1.len() * t2.len());
    for i in 0..t1.len() {
        for j in 0..t2.len() {
            cost.push((t1[i] - t2[j]).abs().powf(p) + dist(&a1[i], &a2[j]).powf(p));
        }
    }
    // Rescale both marginals to the same total so that rounding in the
    // weights cannot unbalance the problem.
    let s1: f64 = m1.iter().sum();
    let s2: f64 = m2.iter().sum();
    let m2: Vec<f64> = m2.iter().map(|m| m * s1 / s2).collect();
    Ok(simplex::solve(&m1, &m2, &cost)?.cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;

    #[test]
    fn constant_diracs() {
        let g = TimeGrid::new(2.0, 4).unwrap();
        let q1 = RelaxedControlPath::constant(g, &[1.0]);
        let q2 = RelaxedControlPath::constant(g, &[-0.5]);
        for mode in [ControlMetric::Exact, ControlMetric::Diagonal] {
            let d = control_distance(2.0, &q1, &q2, mode).unwrap();
            assert!((d - (2.0f64 * 1.5 * 1.5).sqrt()).abs() < 1e-12, "{mode:?}");
            assert_eq!(control_distance(2.0, &q1, &q1, mode).unwrap(), 0.0);
        }
    }

    #[test]
    fn weighted_quantiles_match_simplex() {
        let g = TimeGrid::new(1.0, 1).unwrap();
        let q1 = RelaxedControlPath::new(g, 1, vec![(vec![-1.0, 0.2, 0.9], vec![0.2, 0.5, 0.3])]).unwrap();
        let q2 = RelaxedControlPath::new(g, 1, vec![(vec![0.0, 1.0], vec![0.6, 0.4])]).unwrap();
        let q = weighted_quantile_cost(2.0, q1.step(0), q2.step(0));
        let s = q1.step(0);
        let t = q2.step(0);
        let lp = transport_cost_weighted(2.0, 1, s.atoms, s.weights, t.atoms, t.weights).unwrap();
        assert!((q - lp).abs() < 1e-14);
    }

    #[test]
    fn exact_mode_respects_budget() {
        let g = TimeGrid::new(1.0, 40).unwrap();
        let q = RelaxedControlPath::constant(g, &[0.0]);
        assert!(matches!(
            control_distance(2.0, &q, &q, ControlMetric::Exact),
            Err(Error::AtomBudget { .. })
        ));
    }
}
