use rand::seq::SliceRandom;
use rand::Rng;

use crate::controls::RelaxedControlPath;
use crate::error::Result;
use crate::rng::stream;

/// Replace a relaxed control by a strict one on a grid refined by
/// `refinement`. Inside each original step the sub-step actions are drawn
/// by systematic sampling from that step's measure, so every atom's
/// frequency is within `1 / refinement` of its weight, and then shuffled.
pub fn chattering(q: &RelaxedControlPath, refinement: usize, seed: u64) -> Result<RelaxedControlPath> {
    let grid = q.grid().refine(refinement)?;
    let dim = q.dim();
    let mut actions = Vec::with_capacity(grid.steps() * dim);
    let mut picks = Vec::with_capacity(refinement);
    for k in 0..q.steps() {
        let step = q.step(k);
        let mut rng = stream(seed, "chattering", &[k as u64]);
        picks.clear();
        if step.len() == 1 {
            picks.resize(refinement, 0usize);
        } else {
            let u: f64 = rng.random();
            let mut atom = 0;
            let mut cum = step.weights[0];
            for j in 0..refinement {
                let level = (j as f64 + u) / refinement as f64;
                while level > cum && atom + 1 < step.len() {
                    atom += 1;
                    cum += step.weights[atom];
                }
                picks.push(atom);
            }
            picks.shuffle(&mut rng);
        }
        for &j in &picks {
            actions.extend_from_slice(step.atom(j));
        }
    }
    RelaxedControlPath::strict(grid, dim, actions)
}
