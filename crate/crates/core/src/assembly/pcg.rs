use super::{AssemblyError, CsrMatrix, SparseOperator};

/// Default relative residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Role of a mesh node in a constrained solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dof {
    /// Unknown number `k`; several nodes may share one unknown.
    Free(usize),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    None,
    /// Pure Neumann problem made unique by a zero nodal mean.
    MeanZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Operator restricted to free unknowns: `P^T K P` with the coupling to
/// fixed nodes kept for right-hand sides. Building it once lets several
/// solves with the same constraint pattern share assembly and
/// preconditioner.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    dof_of: Vec<Option<usize>>,
    pub matrix: CsrMatrix,
    inv_diag: Vec<f64>,
}

impl ReducedSystem {
    pub fn new(op: &SparseOperator, dofs: &[Dof]) -> Result<Self, AssemblyError> {
        let n = op.dim();
        if dofs.len() != n {
            return Err(AssemblyError::Dimension(format!("{} dof entries for {n} nodes", dofs.len())));
        }
        let dof_of: Vec<Option<usize>> = dofs
            .iter()
            .map(|d| match d {
                Dof::Free(k) => Some(*k),
                Dof::Fixed(_) => None,
            })
            .collect();
        let n_free = dof_of.iter().flatten().max().map_or(0, |m| m + 1);
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n_free];
        for i in 0..n {
            if let Some(a) = dof_of[i] {
                for (j, _) in op.matrix.row(i) {
                    if let Some(b) = dof_of[j] {
                        rows[a].push(b);
                    }
                }
            }
        }
        let mut matrix = CsrMatrix::from_pattern(rows);
        for i in 0..n {
            if let Some(a) = dof_of[i] {
                for (j, v) in op.matrix.row(i) {
                    if let Some(b) = dof_of[j] {
                        matrix.add(a, b, v);
                    }
                }
            }
        }
        let diag = matrix.diagonal();
        if let Some(k) = diag.iter().position(|d| !(*d > 0.0)) {
            return Err(AssemblyError::Dimension(format!("free unknown {k} has no stiffness")));
        }
        let inv_diag = diag.iter().map(|d| 1.0 / d).collect();
        Ok(Self { dof_of, matrix, inv_diag })
    }

    pub fn num_free(&self) -> usize {
        self.matrix.n
    }

    /// Solves with nodal values `fixed` on fixed nodes (entries on free
    /// nodes are ignored) plus an optional nodal load; returns nodal values.
    pub fn solve(
        &self,
        op: &SparseOperator,
        fixed: &[f64],
        load: Option<&[f64]>,
        gauge: Gauge,
        tol: f64,
        maxit: usize,
    ) -> Result<(Vec<f64>, SolveStats), AssemblyError> {
        let n = self.dof_of.len();
        let has_fixed = self.dof_of.iter().any(|d| d.is_none());
        if !has_fixed && gauge == Gauge::None {
            return Err(AssemblyError::NullspaceError);
        }
        let mut b = vec![0.0; self.num_free()];
        for i in 0..n {
            if let Some(a) = self.dof_of[i] {
                let mut s = load.map_or(0.0, |f| f[i]);
                for (j, v) in op.matrix.row(i) {
                    if self.dof_of[j].is_none() {
                        s -= v * fixed[j];
                    }
                }
                b[a] += s;
            }
        }
        let project = !has_fixed && gauge == Gauge::MeanZero;
        let (x, stats) = pcg(&self.matrix, &self.inv_diag, &b, project, tol, maxit)?;
        let mut u = vec![0.0; n];
        for i in 0..n {
            u[i] = match self.dof_of[i] {
                Some(a) => x[a],
                None => fixed[i],
            };
        }
        Ok((u, stats))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len().max(1) as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
/// Convergence is declared on the recomputed true residual.
pub(crate) fn pcg(
    a: &CsrMatrix,
    inv_diag: &[f64],
    b: &[f64],
    project: bool,
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveStats), AssemblyError> {
    let n = b.len();
    let mut b = b.to_vec();
    if project {
        remove_mean(&mut b);
    }
    let bnorm = dot(&b, &b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveStats { iterations: 0, relative_residual: 0.0 }));
    }
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut rel = 1.0;
    for it in 1..=maxit {
        a.mul_vec_into(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(AssemblyError::NotConverged { maxit: it, residual: rel });
        }
        let alpha = rz / pq;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        if project {
            remove_mean(&mut r);
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= tol {
            // confirm against the true residual, restart if it drifted
            a.mul_vec_into(&x, &mut q);
            for k in 0..n {
                r[k] = b[k] - q[k];
            }
            if project {
                remove_mean(&mut r);
            }
            rel = dot(&r, &r).sqrt() / bnorm;
            if rel <= tol {
                if project {
                    remove_mean(&mut x);
                }
                return Ok((x, SolveStats { iterations: it, relative_residual: rel }));
            }
            for k in 0..n {
                z[k] = r[k] * inv_diag[k];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(AssemblyError::NotConverged { maxit, residual: rel })
}

/// Dirichlet solve: nodes listed in `dirichlet` are fixed, all others free.
pub fn solve_spd(
    op: &SparseOperator,
    dirichlet: &[(usize, f64)],
    gauge: Gauge,
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveStats), AssemblyError> {
    let n = op.dim();
    let mut fixed = vec![0.0; n];
    let mut is_fixed = vec![false; n];
    for &(i, v) in dirichlet {
        fixed[i] = v;
        is_fixed[i] = true;
    }
    let mut next = 0;
    let dofs: Vec<Dof> = (0..n)
        .map(|i| {
            if is_fixed[i] {
                Dof::Fixed(fixed[i])
            } else {
                next += 1;
                Dof::Free(next - 1)
            }
        })
        .collect();
    if dirichlet.is_empty() && gauge == Gauge::None {
        return Err(AssemblyError::NullspaceError);
    }
    let system = ReducedSystem::new(op, &dofs)?;
    system.solve(op, &fixed, None, gauge, tol, maxit)
}

/// General constrained solve with shared and fixed unknowns.
pub fn solve_constrained(
    op: &SparseOperator,
    dofs: &[Dof],
    gauge: Gauge,
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveStats), AssemblyError> {
    let fixed: Vec<f64> = dofs
        .iter()
        .map(|d| match d {
            Dof::Fixed(v) => *v,
            Dof::Free(_) => 0.0,
        })
        .collect();
    let system = ReducedSystem::new(op, dofs)?;
    system.solve(op, &fixed, None, gauge, tol, maxit)
}
