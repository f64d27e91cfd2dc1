//! Linear Stokes: assembly, saddle-point solvers, Stokes projection,
//! discrete inf-sup constant and approximate Green functions.

mod assembly;
mod green;
mod infsup;
mod projection;
mod solve;

pub use assembly::{
    assemble_convection, assemble_divergence, assemble_divergence_full, assemble_rhs_constraint, assemble_rhs_divergence_form,
    assemble_rhs_measure, assemble_rhs_volume, assemble_stokes, assemble_stokes_with, assemble_velocity_block, assemble_velocity_block_full,
    pressure_mass, pressure_moments, rhs_divergence_form_local, skew_trilinear, write_coo, StokesSystem, ViscousForm,
};
pub use green::{approximate_green, green_rhs, BandAverage, GreenOptions, GreenReport, GreenSample};
pub use infsup::{discrete_infsup, discrete_infsup_dense, InfSupMethod, InfSupReport};
pub use projection::{stokes_projection, ExactSolution};
pub use solve::{solve_saddle, solve_saddle_from, Backend, SolverOptions, SolverStats, StokesSolution};
