//! Game data: action sets, coefficient bundles, ready-made scenarios and
//! randomized checks of the standing assumptions.

mod actions;
mod bundle;
mod scenarios;
mod validate;

pub use actions::ActionSet;
pub use bundle::{
    BundleBuilder, CoefficientBundle, DiffusionFn, Dims, DriftFn, Exponents, InitialFn, RunningFn, TerminalFn,
};
pub use scenarios::{scenario_example33, scenario_mean_coupled, scenario_no_control, NoControl};
pub use validate::{validate_coefficients, Check, Condition, Constants, Probe, ValidationReport, Verdict, Witness};
