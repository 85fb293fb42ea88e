use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::measures::cloud::dist;
use crate::rng::SimRng;

/// Closed action set in `R^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionSet {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Finite { atoms: Vec<Vec<f64>> },
}

impl ActionSet {
    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::Box {
            lower: vec![lower],
            upper: vec![upper],
        }
        .validated()
    }

    pub fn singleton(atom: Vec<f64>) -> Result<Self> {
        Self::Finite { atoms: vec![atom] }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match &self {
            ActionSet::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(invalid("action set", "box bounds must be nonempty and of equal length"));
                }
                if lower.iter().chain(upper).any(|v| !v.is_finite()) {
                    return Err(invalid("action set", "box bounds must be finite"));
                }
                if lower.iter().zip(upper).any(|(l, u)| l > u) {
                    return Err(invalid("action set", "box requires lower <= upper"));
                }
            }
            ActionSet::Ball { center, radius } => {
                if center.is_empty() || center.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("action set", "ball center must be finite and nonempty"));
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(invalid("action set", "ball radius must be positive"));
                }
            }
            ActionSet::Finite { atoms } => {
                let Some(first) = atoms.first() else {
                    return Err(invalid("action set", "finite set needs at least one atom"));
                };
                if first.is_empty() || atoms.iter().any(|a| a.len() != first.len()) {
                    return Err(invalid("action set", "atoms must share one positive dimension"));
                }
                if atoms.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(invalid("action set", "atoms must be finite"));
                }
            }
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        match self {
            ActionSet::Box { lower, .. } => lower.len(),
            ActionSet::Ball { center, .. } => center.len(),
            ActionSet::Finite { atoms } => atoms[0].len(),
        }
    }

    pub fn is_singleton(&self) -> bool {
        match self {
            ActionSet::Box { lower, upper } => lower == upper,
            ActionSet::Ball { .. } => false,
            ActionSet::Finite { atoms } => atoms.iter().all(|a| a == &atoms[0]),
        }
    }

    pub fn contains(&self, a: &[f64]) -> bool {
        const TOL: f64 = 1e-12;
        if a.len() != self.dim() {
            return false;
        }
        match self {
            ActionSet::Box { lower, upper } => a
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - TOL && *v <= u + TOL),
            ActionSet::Ball { center, radius } => dist(a, center) <= radius + TOL,
            ActionSet::Finite { atoms } => atoms.iter().any(|b| dist(a, b) <= TOL),
        }
    }

    /// Map `a` into the set in place: clamp for boxes, radial projection for
    /// balls, nearest atom (first on ties) for finite sets.
    pub fn project(&self, a: &mut [f64]) {
        match self {
            ActionSet::Box { lower, upper } => {
                for ((v, l), u) in a.iter_mut().zip(lower).zip(upper) {
                    *v = v.clamp(*l, *u);
                }
            }
            ActionSet::Ball { center, radius } => {
                let r = dist(a, center);
                if r > *radius {
                    for (v, c) in a.iter_mut().zip(center) {
                        *v = c + (*v - c) * radius / r;
                    }
                }
            }
            ActionSet::Finite { atoms } => {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (i, b) in atoms.iter().enumerate() {
                    let d = dist(a, b);
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                a.copy_from_slice(&atoms[best]);
            }
        }
    }

    /// Uniform draw: uniform on boxes and balls, uniform over atoms.
    pub fn sample(&self, rng: &mut SimRng, out: &mut [f64]) {
        match self {
            ActionSet::Box { lower, upper } => {
                for ((v, l), u) in out.iter_mut().zip(lower).zip(upper) {
                    *v = if l == u { *l } else { rng.random_range(*l..=*u) };
                }
            }
            ActionSet::Ball { center, radius } => {
                // Rejection from the bounding cube.
                loop {
                    for v in out.iter_mut() {
                        *v = rng.random_range(-1.0..=1.0);
                    }
                    let r2: f64 = out.iter().map(|v| v * v).sum();
                    if r2 <= 1.0 {
                        break;
                    }
                }
                for (v, c) in out.iter_mut().zip(center) {
                    *v = c + *v * radius;
                }
            }
            ActionSet::Finite { atoms } => {
                let i = rng.random_range(0..atoms.len());
                out.copy_from_slice(&atoms[i]);
            }
        }
    }

    /// Deterministic candidate points covering the set, about `per_axis`
    /// points per coordinate. Used for pointwise maximisation.
    pub fn candidates(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let per_axis = per_axis.max(2);
        match self {
            ActionSet::Finite { atoms } => atoms.clone(),
            ActionSet::Box { lower, upper } => lattice(lower, upper, per_axis),
            ActionSet::Ball { center, radius } => {
                let lower: Vec<f64> = center.iter().map(|c| c - radius).collect();
                let upper: Vec<f64> = center.iter().map(|c| c + radius).collect();
                lattice(&lower, &upper, per_axis)
                    .into_iter()
                    .filter(|a| dist(a, center) <= *radius + 1e-12)
                    .collect()
            }
        }
    }

    /// Largest norm of an element of the set.
    pub fn max_norm(&self) -> f64 {
        match self {
            ActionSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            ActionSet::Ball { center, radius } => crate::measures::cloud::norm(center) + radius,
            ActionSet::Finite { atoms } => atoms
                .iter()
                .map(|a| crate::measures::cloud::norm(a))
                .fold(0.0, f64::max),
        }
    }
}

fn lattice(lower: &[f64], upper: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let dim = lower.len();
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        let point: Vec<f64> = (0..dim)
            .map(|c| {
                if lower[c] == upper[c] {
                    lower[c]
                } else {
                    lower[c] + (upper[c] - lower[c]) * idx[c] as f64 / (per_axis - 1) as f64
                }
            })
            .collect();
        out.push(point);
        let mut c = 0;
        loop {
            if c == dim {
                return out;
            }
            idx[c] += 1;
            if idx[c] < per_axis {
                break;
            }
            idx[c] = 0;
            c += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn projection_lands_inside() {
        let b = ActionSet::interval(-1.0, 1.0).unwrap();
        let mut a = [3.0];
        b.project(&mut a);
        assert_eq!(a, [1.0]);
        let ball = ActionSet::Ball { center: vec![0.0, 0.0], radius: 2.0 }.validated().unwrap();
        let mut a = [3.0, 4.0];
        ball.project(&mut a);
        assert!((a[0] - 1.2).abs() < 1e-12 && (a[1] - 1.6).abs() < 1e-12);
        let fin = ActionSet::Finite { atoms: vec![vec![-1.0], vec![0.0], vec![1.0]] };
        let mut a = [0.4];
        fin.project(&mut a);
        assert_eq!(a, [0.0]);
    }

    #[test]
    fn samples_stay_inside() {
        let mut rng = SimRng::seed_from_u64(1);
        let sets = [
            ActionSet::interval(-1.0, 2.0).unwrap(),
            ActionSet::Ball { center: vec![1.0, -1.0], radius: 0.5 },
            ActionSet::Finite { atoms: vec![vec![0.0, 1.0], vec![2.0, 2.0]] },
        ];
        for s in &sets {
            let mut a = vec![0.0; s.dim()];
            for _ in 0..200 {
                s.sample(&mut rng, &mut a);
                assert!(s.contains(&a));
            }
        }
    }

    #[test]
    fn invalid_sets_are_rejected() {
        assert!(ActionSet::interval(1.0, -1.0).is_err());
        assert!(ActionSet::Ball { center: vec![0.0], radius: 0.0 }.validated().is_err());
        assert!(ActionSet::Finite { atoms: vec![] }.validated().is_err());
        assert!(ActionSet::Finite { atoms: vec![vec![0.0], vec![1.0, 2.0]] }.validated().is_err());
    }

    #[test]
    fn lattice_covers_corners() {
        let b = ActionSet::Box { lower: vec![0.0, -1.0], upper: vec![1.0, 1.0] };
        let c = b.candidates(3);
        assert_eq!(c.len(), 9);
        assert!(c.contains(&vec![1.0, 1.0]));
        assert!(c.contains(&vec![0.0, -1.0]));
    }
}
