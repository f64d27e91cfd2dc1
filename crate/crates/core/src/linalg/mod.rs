//! Sparse storage, Krylov solvers, geometric multigrid and sparse LU.

mod direct;
mod krylov;
mod multigrid;
pub mod sparse;

pub use direct::SparseLu;
pub use krylov::{gmres, minres, pcg, KrylovStats};
pub use multigrid::{prolongation, Multigrid};
