//! Desk-scale experiments: coupling rates of the k-modified system,
//! pathwise propagation of chaos around a solution, distance of n-player
//! empirical measures to a solution, and moment tables.

mod rate;
mod runs;

pub use rate::{least_squares, RateRow, RateTable};
pub use runs::{
    run_chaos_rate, run_limit_experiment, run_moment_table, run_pathwise_propagation, LimitReport, LimitRow,
    ProfileFamily,
};
