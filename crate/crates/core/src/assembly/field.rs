use std::sync::Arc;

use super::stiffness::hat_gradients;
use crate::geometry::Point;
use crate::mesh::Mesh;

/// Nodal values of a P1 function bound to a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Self {
        assert_eq!(mesh.nodes.len(), values.len(), "field length must equal node count");
        Self { mesh, values }
    }

    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(Point) -> f64) -> Self {
        let values = mesh.nodes.iter().map(|&p| f(p)).collect();
        Self { mesh, values }
    }

    /// Constant gradient on element `e`.
    pub fn gradient(&self, e: usize) -> [f64; 2] {
        let el = self.mesh.elements[e];
        let (g, _) = hat_gradients(el.map(|i| self.mesh.nodes[i]));
        let mut out = [0.0; 2];
        for k in 0..3 {
            out[0] += self.values[el[k]] * g[k][0];
            out[1] += self.values[el[k]] * g[k][1];
        }
        out
    }

    /// Linear interpolation at `p`; `None` outside the mesh.
    pub fn eval(&self, p: Point) -> Option<f64> {
        for el in &self.mesh.elements {
            let [a, b, c] = el.map(|i| self.mesh.nodes[i]);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
            let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
            let l0 = 1.0 - l1 - l2;
            let tol = -1e-12;
            if l0 >= tol && l1 >= tol && l2 >= tol {
                return Some(l0 * self.values[el[0]] + l1 * self.values[el[1]] + l2 * self.values[el[2]]);
            }
        }
        None
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest nodal difference to another field on the same mesh.
    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> ScalarField {
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        ScalarField { mesh: self.mesh.clone(), values }
    }
}
