//! Objectives, player values, best responses within policy classes,
//! class-relative Nash gaps and the converse construction of approximate
//! equilibria from a mean field game solution.

mod converse;
mod search;
mod value;

pub use converse::{
    converse_equilibrium, converse_profile, player_triples, solution_triples, ConverseReport, DISTANCE_REPLICATIONS,
};
pub use search::{
    best_response, best_response_vs_flow, nash_gap, nash_gap_for, value_vs_flow, NashGapReport, Search, SearchMethod,
};
pub use value::{estimate_value, estimate_values, objective_gamma, player_gamma, MonteCarlo, ValueEstimate};

pub(crate) use value::per_group;
