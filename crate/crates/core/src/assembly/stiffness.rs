use rayon::prelude::*;

use super::{AssemblyError, CoefficientField, CsrMatrix};
use crate::geometry::Point;
use crate::mesh::{Mesh, Region};

/// Stiffness matrix over all mesh nodes. Nodes not touched by an assembled
/// element have empty rows.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub matrix: CsrMatrix,
    pub ambient_dim: usize,
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.matrix.n
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x)
    }

    /// Quadratic form `x^T K x`.
    pub fn energy_form(&self, x: &[f64]) -> f64 {
        self.apply(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// Axisymmetric weight `y^(n-2)` of the meridian reduction.
pub fn quadrature_weight(ambient_dim: usize, y: f64) -> f64 {
    if ambient_dim <= 2 {
        1.0
    } else {
        y.abs().powi(ambient_dim as i32 - 2)
    }
}

// barycentric points and weights (summing to 1)
const EDGE_MIDPOINTS: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

const A1: f64 = 0.059_715_871_789_770;
const B1: f64 = 0.470_142_064_105_115;
const A2: f64 = 0.797_426_985_353_087;
const B2: f64 = 0.101_286_507_323_456;
const W1: f64 = 0.132_394_152_788_506;
const W2: f64 = 0.125_939_180_544_827;
const DEGREE5: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([A1, B1, B1], W1),
    ([B1, A1, B1], W1),
    ([B1, B1, A1], W1),
    ([A2, B2, B2], W2),
    ([B2, A2, B2], W2),
    ([B2, B2, A2], W2),
];

/// Gradients of the three hat functions and the (positive) element area.
pub(crate) fn hat_gradients(p: [Point; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let inv = 1.0 / det;
    let g = [
        [(p[1][1] - p[2][1]) * inv, (p[2][0] - p[1][0]) * inv],
        [(p[2][1] - p[0][1]) * inv, (p[0][0] - p[2][0]) * inv],
        [(p[0][1] - p[1][1]) * inv, (p[1][0] - p[0][0]) * inv],
    ];
    (g, 0.5 * det.abs())
}

/// `∫_e w(x) A(x) dx` for element `e`.
pub(crate) fn element_tensor(
    mesh: &Mesh,
    e: usize,
    coeff: &CoefficientField,
    ambient_dim: usize,
) -> Result<[[f64; 2]; 2], AssemblyError> {
    let el = mesh.elements[e];
    let p = el.map(|i| mesh.nodes[i]);
    let region: Region = mesh.element_region[e];
    let (_, area) = hat_gradients(p);
    if ambient_dim <= 2 && coeff.is_piecewise_constant() {
        let a = coeff.eval(region, mesh.centroid(e))?;
        return Ok(a.map(|row| row.map(|v| v * area)));
    }
    let rule: &[([f64; 3], f64)] = if ambient_dim <= 4 { &EDGE_MIDPOINTS } else { &DEGREE5 };
    let mut m = [[0.0; 2]; 2];
    for (bary, w) in rule {
        let x = [
            bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
            bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
        ];
        let a = coeff.eval(region, x)?;
        let s = w * area * quadrature_weight(ambient_dim, x[1]);
        for r in 0..2 {
            for c in 0..2 {
                m[r][c] += s * a[r][c];
            }
        }
    }
    Ok(m)
}

pub(crate) fn element_matrix(
    mesh: &Mesh,
    e: usize,
    coeff: &CoefficientField,
    ambient_dim: usize,
) -> Result<[[f64; 3]; 3], AssemblyError> {
    let p = mesh.elements[e].map(|i| mesh.nodes[i]);
    let (g, _) = hat_gradients(p);
    let m = element_tensor(mesh, e, coeff, ambient_dim)?;
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        let mg = [m[0][0] * g[i][0] + m[0][1] * g[i][1], m[1][0] * g[i][0] + m[1][1] * g[i][1]];
        for j in 0..3 {
            k[j][i] = g[j][0] * mg[0] + g[j][1] * mg[1];
        }
    }
    // exact symmetry regardless of rounding in the products
    for i in 0..3 {
        for j in 0..i {
            let s = 0.5 * (k[i][j] + k[j][i]);
            k[i][j] = s;
            k[j][i] = s;
        }
    }
    Ok(k)
}

/// Assembles over every element.
pub fn assemble_stiffness(
    mesh: &Mesh,
    coeff: &CoefficientField,
    ambient_dim: usize,
) -> Result<SparseOperator, AssemblyError> {
    assemble_stiffness_on(mesh, coeff, ambient_dim, |_| true)
}

/// Assembles over elements whose region passes `filter`. Element matrices
/// are computed in parallel and summed in element order, so the result does
/// not depend on the thread count.
pub fn assemble_stiffness_on(
    mesh: &Mesh,
    coeff: &CoefficientField,
    ambient_dim: usize,
    filter: impl Fn(Region) -> bool + Sync,
) -> Result<SparseOperator, AssemblyError> {
    if ambient_dim < 2 {
        return Err(AssemblyError::Dimension(format!("ambient_dim must be >= 2, got {ambient_dim}")));
    }
    let active: Vec<usize> = (0..mesh.elements.len()).filter(|&e| filter(mesh.element_region[e])).collect();
    let locals: Vec<[[f64; 3]; 3]> = active
        .par_iter()
        .map(|&e| element_matrix(mesh, e, coeff, ambient_dim))
        .collect::<Result<_, _>>()?;

    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); mesh.nodes.len()];
    for &e in &active {
        let el = mesh.elements[e];
        for &i in &el {
            rows[i].extend_from_slice(&el);
        }
    }
    let mut matrix = CsrMatrix::from_pattern(rows);
    for (&e, k) in active.iter().zip(&locals) {
        let el = mesh.elements[e];
        for a in 0..3 {
            for b in 0..3 {
                matrix.add(el[a], el[b], k[a][b]);
            }
        }
    }
    Ok(SparseOperator { matrix, ambient_dim })
}

/// Matrix-region operator (GAP and BULK elements only).
pub(crate) fn assemble_matrix_region(
    mesh: &Mesh,
    coeff: &CoefficientField,
    ambient_dim: usize,
) -> Result<SparseOperator, AssemblyError> {
    assemble_stiffness_on(mesh, coeff, ambient_dim, Region::is_matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures::square;

    fn row_sum_defect(op: &SparseOperator) -> f64 {
        let ones = vec![1.0; op.dim()];
        let scale = op.matrix.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        op.apply(&ones).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale
    }

    #[test]
    fn constants_in_kernel_and_symmetric() {
        let mesh = square(6);
        let op = assemble_stiffness(&mesh, &CoefficientField::Identity, 2).unwrap();
        assert!(row_sum_defect(&op) < 1e-14);
        assert_eq!(op.matrix.asymmetry(), 0.0);
    }

    #[test]
    fn coefficient_scaling_is_exact() {
        let mesh = square(5);
        let a = assemble_stiffness(&mesh, &CoefficientField::Identity, 2).unwrap();
        let b = assemble_stiffness(&mesh, &CoefficientField::Identity.scaled(2.0), 2).unwrap();
        for (x, y) in a.matrix.values.iter().zip(&b.matrix.values) {
            assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn weighted_rows_vanish() {
        let mut mesh = square(6);
        for p in &mut mesh.nodes {
            p[1] = 0.5 * (p[1] + 1.0);
        }
        for n in [3, 4, 6] {
            let op = assemble_stiffness(&mesh, &CoefficientField::Identity, n).unwrap();
            assert!(row_sum_defect(&op) < 1e-14, "n = {n}");
        }
    }

    #[test]
    fn weighted_energy_of_linear_field() {
        // ∫_0^1 ∫_0^1 y^(n-2) |∇x|^2 = 1/(n-1), exact for every rule used
        let mut mesh = square(4);
        for p in &mut mesh.nodes {
            p[0] = 0.5 * (p[0] + 1.0);
            p[1] = 0.5 * (p[1] + 1.0);
        }
        let x: Vec<f64> = mesh.nodes.iter().map(|p| p[0]).collect();
        for n in [2, 3, 4, 5, 6] {
            let op = assemble_stiffness(&mesh, &CoefficientField::Identity, n).unwrap();
            let e = op.energy_form(&x);
            assert!((e - 1.0 / (n as f64 - 1.0)).abs() < 1e-13, "n = {n}: {e}");
        }
    }

    #[test]
    fn matrix_coefficient_is_elliptic_checked() {
        let mesh = square(3);
        let bad = CoefficientField::MatrixValued {
            field: std::sync::Arc::new(|p| [[1.0 + p[0], 0.0], [0.0, 1.0]]),
            lambda: 0.5,
            big_lambda: 2.0,
        };
        assert!(matches!(
            assemble_stiffness(&mesh, &bad, 2),
            Err(AssemblyError::EllipticityViolated { .. })
        ));
    }
}
