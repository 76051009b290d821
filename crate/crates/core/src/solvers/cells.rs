use std::sync::Arc;

use rayon::prelude::*;

use super::{SolveOptions, SolverError};
use crate::assembly::{stiffness::assemble_matrix_region, CoefficientField, Dof, Gauge, ReducedSystem, ScalarField, SparseOperator};
use crate::geometry::{BoundaryData, Configuration};
use crate::mesh::{BoundaryTag, Mesh};

/// Cell solutions of the decomposition `u = C1 v1 + C2 v2 + v3`, plus the
/// auxiliary `rho` (0 on the inclusions, 1 on the outer boundary).
#[derive(Debug, Clone)]
pub struct CellSolutions {
    pub v1: ScalarField,
    pub v2: ScalarField,
    pub v3: ScalarField,
    pub rho: ScalarField,
    /// Unconstrained matrix-region operator shared by all four solves.
    pub operator: Arc<SparseOperator>,
    pub phi: BoundaryData,
    pub iterations: [usize; 4],
}

impl CellSolutions {
    /// Largest excursion of v1, v2, rho outside [0, 1].
    pub fn max_principle_violation(&self) -> f64 {
        [&self.v1, &self.v2, &self.rho]
            .iter()
            .flat_map(|f| f.values.iter())
            .fold(0.0f64, |m, &v| m.max(-v).max(v - 1.0))
    }
}

pub fn solve_cell_problems(
    config: &Configuration,
    mesh: &Arc<Mesh>,
    phi: &BoundaryData,
    coeff: &CoefficientField,
    opts: SolveOptions,
) -> Result<CellSolutions, SolverError> {
    let op = Arc::new(assemble_matrix_region(mesh, coeff, config.ambient_dim)?);
    let n = mesh.nodes.len();
    let inc1 = mesh.inclusion_nodes(1);
    let inc2 = mesh.inclusion_nodes(2);
    let outer = mesh.tagged_nodes(BoundaryTag::Outer);

    // fixed set shared by all four problems
    let mut fixed = vec![false; n];
    for &i in inc1.iter().chain(&inc2).chain(&outer) {
        fixed[i] = true;
    }
    let mut next = 0;
    let dofs: Vec<Dof> = fixed
        .iter()
        .map(|&f| {
            if f {
                Dof::Fixed(0.0)
            } else {
                next += 1;
                Dof::Free(next - 1)
            }
        })
        .collect();
    let system = ReducedSystem::new(&op, &dofs)?;

    let data = |on1: f64, on2: f64, outer_val: &dyn Fn(usize) -> f64| {
        let mut v = vec![0.0; n];
        for &i in &outer {
            v[i] = outer_val(i);
        }
        for &i in &inc1 {
            v[i] = on1;
        }
        for &i in &inc2 {
            v[i] = on2;
        }
        v
    };
    let boundary = [
        data(1.0, 0.0, &|_| 0.0),
        data(0.0, 1.0, &|_| 0.0),
        data(0.0, 0.0, &|i| phi.eval(mesh.nodes[i])),
        data(0.0, 0.0, &|_| 1.0),
    ];
    let solved: Vec<_> = boundary
        .par_iter()
        .map(|fixed_vals| system.solve(&op, fixed_vals, None, Gauge::None, opts.tol, opts.maxit))
        .collect::<Result<_, _>>()?;
    let mut it = solved.into_iter();
    let mut next_field = || {
        let (v, s) = it.next().unwrap();
        (ScalarField::new(mesh.clone(), v), s.iterations)
    };
    let (v1, i1) = next_field();
    let (v2, i2) = next_field();
    let (v3, i3) = next_field();
    let (rho, i4) = next_field();
    Ok(CellSolutions { v1, v2, v3, rho, operator: op, phi: phi.clone(), iterations: [i1, i2, i3, i4] })
}
