//! Problem drivers: finite-k transmission, perfect conductivity by degree
//! of freedom condensation, and the three-cell decomposition.

mod cells;
mod finite_k;
mod perfect;

use thiserror::Error;

use crate::assembly::{AssemblyError, DEFAULT_TOL};

pub use cells::{solve_cell_problems, CellSolutions};
pub use finite_k::solve_finite_k;
pub use perfect::{reconstruct_from_decomposition, solve_perfect_constrained, PerfectSolution, Route};

/// Relative tolerance on the net inclusion fluxes of a perfect solution.
pub const FLUX_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("solver: flux system singular (det = {det:e}); the gap is probably unresolved")]
    SingularSystem { det: f64 },
    #[error("solver: finite-k problem needs a mesh with inclusion interiors")]
    MissingInteriors,
    #[error("solver: net flux {flux:e} through inclusion {inclusion} exceeds tolerance {limit:e}")]
    FluxImbalance { inclusion: usize, flux: f64, limit: f64 },
    #[error("solver: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub maxit: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, maxit: 500_000 }
    }
}
