//! Constitutive laws, sampling checks of their structural assumptions, and
//! nonlinear solvers for monotone and generalized Smagorinski fluids.

mod assumptions;
mod model;
mod solvers;
mod study;

pub use assumptions::{check_assumptions, AssumptionCheck, AssumptionReport, SamplePlan, Verdict, Witness};
pub use model::{eval_stress, StressKind, StressModel, StressModelSpec, EPS_REG};
pub use solvers::{
    energy_derivative, energy_difference, nonlinear_residual, smagorinski_energy, solve_bulicek,
    solve_smagorinski, solve_smagorinski_convection, ConvectionStability, NonlinearOptions, NonlinearSolution,
    NonlinearSolveTrace, NONLINEAR_ORDER,
};
pub use study::{manufactured_forcing, smagorinski_error_study, strain_errors, StrainErrors};
