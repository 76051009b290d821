//! P1 assembly of the weighted elliptic operator, a Jacobi-preconditioned
//! conjugate gradient solver and residual boundary fluxes.

mod coefficient;
mod field;
pub(crate) mod flux;
mod pcg;
mod sparse;
pub(crate) mod stiffness;

use thiserror::Error;

use crate::mesh::BoundaryTag;

pub use coefficient::{CoefficientField, MatrixFn};
pub use field::ScalarField;
pub use flux::{boundary_flux, residual};
pub use pcg::{solve_constrained, solve_spd, Dof, Gauge, ReducedSystem, SolveStats, DEFAULT_TOL};
pub use sparse::CsrMatrix;
pub use stiffness::{assemble_stiffness, quadrature_weight, SparseOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("coefficient: ellipticity violated at ({x:e}, {y:e})")]
    EllipticityViolated { x: f64, y: f64 },
    #[error("solver: not converged after {maxit} iterations (relative residual {residual:e})")]
    NotConverged { maxit: usize, residual: f64 },
    #[error("solver: no Dirichlet data and no gauge; constants are in the kernel")]
    NullspaceError,
    #[error("flux: no boundary edges tagged {0}")]
    TagMissing(BoundaryTag),
    #[error("solver: {0}")]
    Dimension(String),
}
