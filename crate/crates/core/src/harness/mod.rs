//! Manufactured cases, convergence studies and their reports.

mod cases;
mod report;
mod study;

pub use cases::*;
pub use report::{compute_eoc, EnvironmentStamp, LevelRow, StudyReport};
pub use study::{
    ancestor_map, nested_difference, nested_spaces, projection_stability_ratio, run_study, NormQuantity, NormSpec,
    ReferenceCheck, StudyConfig,
};
