use std::sync::Arc;

use super::{CellSolutions, SolveOptions, SolverError, FLUX_TOL};
use crate::assembly::{
    flux::flux_from_residual, stiffness::assemble_matrix_region, CoefficientField, Dof, Gauge, ReducedSystem,
    ScalarField, SparseOperator,
};
use crate::functionals::FluxReport;
use crate::geometry::{BoundaryData, Configuration};
use crate::mesh::{BoundaryTag, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Constrained,
    Decomposition,
}

/// Solution of the perfect conductivity problem: constant `c1`, `c2` on the
/// inclusions and zero net flux through each inclusion boundary.
#[derive(Debug, Clone)]
pub struct PerfectSolution {
    pub u: ScalarField,
    pub c1: f64,
    pub c2: f64,
    pub route: Route,
    /// Net flux of `u` through INC1 and INC2.
    pub flux_residuals: [f64; 2],
}

fn inclusion_fluxes(op: &SparseOperator, u: &ScalarField) -> [f64; 2] {
    let r = op.apply(&u.values);
    [
        flux_from_residual(&r, &u.mesh.tagged_nodes(BoundaryTag::Inc1), BoundaryTag::Inc1),
        flux_from_residual(&r, &u.mesh.tagged_nodes(BoundaryTag::Inc2), BoundaryTag::Inc2),
    ]
}

/// Size of the load the outer data induces, the scale for flux residuals.
fn load_scale(op: &SparseOperator, mesh: &Mesh, phi: &BoundaryData) -> f64 {
    let mut g = vec![0.0; mesh.nodes.len()];
    for i in mesh.tagged_nodes(BoundaryTag::Outer) {
        g[i] = phi.eval(mesh.nodes[i]);
    }
    op.apply(&g).iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_fluxes(fluxes: [f64; 2], scale: f64) -> Result<(), SolverError> {
    let limit = FLUX_TOL * scale.max(f64::MIN_POSITIVE);
    for (k, f) in fluxes.iter().enumerate() {
        if f.abs() > limit {
            return Err(SolverError::FluxImbalance { inclusion: k + 1, flux: *f, limit });
        }
    }
    Ok(())
}

/// Minimises the energy over fields that are constant on each inclusion by
/// merging every node of an inclusion into one unknown.
pub fn solve_perfect_constrained(
    config: &Configuration,
    mesh: &Arc<Mesh>,
    phi: &BoundaryData,
    coeff: &CoefficientField,
    opts: SolveOptions,
) -> Result<PerfectSolution, SolverError> {
    let op = assemble_matrix_region(mesh, coeff, config.ambient_dim)?;
    let n = mesh.nodes.len();
    let mut dofs: Vec<Option<Dof>> = vec![None; n];
    for i in mesh.tagged_nodes(BoundaryTag::Outer) {
        dofs[i] = Some(Dof::Fixed(phi.eval(mesh.nodes[i])));
    }
    for i in mesh.inclusion_nodes(1) {
        dofs[i] = Some(Dof::Free(0));
    }
    for i in mesh.inclusion_nodes(2) {
        dofs[i] = Some(Dof::Free(1));
    }
    let mut next = 2;
    let dofs: Vec<Dof> = dofs
        .into_iter()
        .map(|d| {
            d.unwrap_or_else(|| {
                next += 1;
                Dof::Free(next - 1)
            })
        })
        .collect();
    let fixed: Vec<f64> = dofs.iter().map(|d| if let Dof::Fixed(v) = d { *v } else { 0.0 }).collect();
    let system = ReducedSystem::new(&op, &dofs)?;
    let (values, _) = system.solve(&op, &fixed, None, Gauge::None, opts.tol, opts.maxit)?;
    let u = ScalarField::new(mesh.clone(), values);
    let c1 = u.values[mesh.tagged_nodes(BoundaryTag::Inc1)[0]];
    let c2 = u.values[mesh.tagged_nodes(BoundaryTag::Inc2)[0]];
    let flux_residuals = inclusion_fluxes(&op, &u);
    check_fluxes(flux_residuals, load_scale(&op, mesh, phi))?;
    Ok(PerfectSolution { u, c1, c2, route: Route::Constrained, flux_residuals })
}

/// `u = C1 v1 + C2 v2 + v3` with the constants from the flux report.
pub fn reconstruct_from_decomposition(cells: &CellSolutions, report: &FluxReport) -> Result<PerfectSolution, SolverError> {
    if cells.v1.values.len() != cells.operator.dim() {
        return Err(SolverError::Mismatch("cells and operator sizes differ".into()));
    }
    let (c1, c2) = (report.c1, report.c2);
    let values: Vec<f64> = (0..cells.v1.values.len())
        .map(|i| c1 * cells.v1.values[i] + c2 * cells.v2.values[i] + cells.v3.values[i])
        .collect();
    let u = ScalarField::new(cells.v1.mesh.clone(), values);
    let flux_residuals = inclusion_fluxes(&cells.operator, &u);
    check_fluxes(flux_residuals, load_scale(&cells.operator, &u.mesh, &cells.phi))?;
    Ok(PerfectSolution { u, c1, c2, route: Route::Decomposition, flux_residuals })
}
