use super::{AssemblyError, ScalarField, SparseOperator};
use crate::mesh::BoundaryTag;

/// Stiffness residual `K u` at every node.
pub fn residual(op: &SparseOperator, values: &[f64]) -> Vec<f64> {
    op.apply(values)
}

/// Consistent (residual) flux of `field` through the boundary `tag`,
/// with the normal pointing out of the inclusion on INC tags and out of
/// the domain on OUTER and AXIS.
pub fn boundary_flux(op: &SparseOperator, field: &ScalarField, tag: BoundaryTag) -> Result<f64, AssemblyError> {
    let nodes = field.mesh.tagged_nodes(tag);
    if nodes.is_empty() {
        return Err(AssemblyError::TagMissing(tag));
    }
    let r = residual(op, &field.values);
    Ok(flux_from_residual(&r, &nodes, tag))
}

pub(crate) fn flux_from_residual(r: &[f64], nodes: &[usize], tag: BoundaryTag) -> f64 {
    let s: f64 = nodes.iter().map(|&i| r[i]).sum();
    match tag {
        BoundaryTag::Inc1 | BoundaryTag::Inc2 => -s,
        BoundaryTag::Outer | BoundaryTag::Axis => s,
    }
}
