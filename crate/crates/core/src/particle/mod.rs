//! Euler-Maruyama simulation of the n-player system, the k-modified system
//! and a single agent facing a frozen measure flow.

mod flow;
mod noise;
mod simulate;

pub use flow::MeasureFlow;
pub use noise::{sample_noise, sample_noise_with, NoiseBundle, PlayerNoise};
pub use simulate::{
    simulate_k_modified, simulate_nplayer, simulate_vs_flow, AgentControl, KModified, ParticleTrajectories, BLOW_UP,
};

pub(crate) use simulate::{simulate_deviation, Stepper};
