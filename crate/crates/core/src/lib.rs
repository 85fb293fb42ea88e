//! Simulation and verification toolkit for symmetric n-player stochastic
//! differential games with mean-field interaction and their mean field
//! game limits.
//!
//! The crate is organised bottom-up: [`measures`] provides exact optimal
//! transport distances, [`model`] the game data, [`controls`] relaxed
//! controls and policies, [`particle`] the Euler-Maruyama engine, [`game`]
//! values and Nash gaps, [`mfg`] the fixed-point solver and closed-form
//! solutions, and [`experiments`] the packaged convergence studies.

pub mod controls;
pub mod experiments;
pub mod error;
pub mod game;
pub mod grid;
pub mod measures;
pub mod mfg;
pub mod model;
pub mod particle;
pub mod rng;

pub use error::{Error, Result};
pub use grid::TimeGrid;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
