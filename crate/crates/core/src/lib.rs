//! Taylor-Hood finite elements for the Stokes problem and for two classes of
//! non-Newtonian fluids on convex polyhedra, measured in Muckenhoupt-weighted
//! norms.
//!
//! Module map:
//! - [`mesh`]: tetrahedral meshes, red refinement, quadrature, point location;
//! - [`weights`]: weight fields, A_q characteristic estimates, maximal
//!   operators, zero-mean decomposition;
//! - [`fem`]: P2/P1 spaces, interpolation, weighted norms, regularized delta;
//! - [`stokes`]: saddle-point assembly and solvers, Stokes projection, inf-sup
//!   constant, approximate Green functions;
//! - [`nonnewtonian`]: stress models, assumption checks, Picard/Kacanov
//!   solvers for the Bulicek and generalized Smagorinski models;
//! - [`harness`]: manufactured cases, convergence studies, reports.

pub mod error;
pub mod fem;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod nonnewtonian;
pub mod stokes;
pub mod weights;

pub use error::{Error, Result};
