use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::measures::ParticleCloud;

/// Particle cloud at every grid node, representing `t -> mu_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureFlow {
    grid: TimeGrid,
    clouds: Vec<ParticleCloud>,
}

impl MeasureFlow {
    pub fn new(grid: TimeGrid, clouds: Vec<ParticleCloud>) -> Result<Self> {
        if clouds.len() != grid.nodes() {
            return Err(Error::CountMismatch {
                left: clouds.len(),
                right: grid.nodes(),
            });
        }
        let dim = clouds[0].dim();
        if let Some(c) = clouds.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: c.dim(),
            });
        }
        Ok(Self { grid, clouds })
    }

    /// Flow with the same cloud at every node.
    pub fn constant(grid: TimeGrid, cloud: ParticleCloud) -> Self {
        Self {
            grid,
            clouds: vec![cloud; grid.nodes()],
        }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.clouds[0].dim()
    }

    pub fn cloud(&self, k: usize) -> &ParticleCloud {
        &self.clouds[k]
    }

    pub fn clouds(&self) -> &[ParticleCloud] {
        &self.clouds
    }

    pub fn terminal(&self) -> &ParticleCloud {
        &self.clouds[self.grid.steps()]
    }

    /// Cloud means at every node, `nodes x dim`.
    pub fn mean_path(&self) -> Vec<f64> {
        self.clouds.iter().flat_map(|c| c.mean().iter().copied()).collect()
    }

    pub fn into_clouds(self) -> Vec<ParticleCloud> {
        self.clouds
    }
}
