//! Optimal-transport distances between particle clouds, relaxed controls,
//! paths and empirical measures on path space.

pub mod assignment;
pub mod cloud;
pub mod control;
pub mod path;
pub mod simplex;

pub use cloud::{swapped_mean, wasserstein_1d, wasserstein_clouds, CloudView, ParticleCloud};
pub use control::{control_distance, ControlMetric};
pub use path::{
    path_measure_distance, path_measure_distance_with, path_transport_cost, triple_distance,
    truncated_sup_distance, EmpiricalPathMeasure, PathMetric, PathSample, PathTriple,
};
