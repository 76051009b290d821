use std::sync::Arc;

use super::{SolveOptions, SolverError};
use crate::assembly::{assemble_stiffness, solve_spd, CoefficientField, Gauge, ScalarField};
use crate::geometry::{BoundaryData, Configuration};
use crate::mesh::{BoundaryTag, Mesh};

/// Transmission problem with conductivity `k * coeff` in the inclusions and
/// `coeff` in the matrix, Dirichlet data `phi` on the outer boundary.
pub fn solve_finite_k(
    config: &Configuration,
    mesh: &Arc<Mesh>,
    phi: &BoundaryData,
    k: f64,
    coeff: &CoefficientField,
    opts: SolveOptions,
) -> Result<ScalarField, SolverError> {
    if !mesh.has_interiors() {
        return Err(SolverError::MissingInteriors);
    }
    let field = CoefficientField::Transmission {
        k,
        inclusion: Box::new(coeff.clone()),
        matrix: Box::new(coeff.clone()),
    };
    let op = assemble_stiffness(mesh, &field, config.ambient_dim)?;
    let bc: Vec<(usize, f64)> =
        mesh.tagged_nodes(BoundaryTag::Outer).into_iter().map(|i| (i, phi.eval(mesh.nodes[i]))).collect();
    let (u, _) = solve_spd(&op, &bc, Gauge::None, opts.tol, opts.maxit)?;
    Ok(ScalarField::new(mesh.clone(), u))
}
