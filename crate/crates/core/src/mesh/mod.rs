//! Conforming triangulations of the matrix region.

mod generate;
mod io;
mod quality;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::geometry::{GeometryError, Point};

pub use generate::{generate_mesh, MeshParams, DEFAULT_NODE_BUDGET};
pub use io::{read_mesh, write_mesh};
pub use quality::{mesh_quality, QualityReport};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh: node budget {budget} exceeded (needs about {needed})")]
    BudgetExceeded { needed: usize, budget: usize },
    #[error("mesh: minimum angle {min_angle:.3} deg below threshold {threshold:.3} deg")]
    QualityFailure { min_angle: f64, threshold: f64 },
    #[error("mesh: invalid parameter {0}")]
    InvalidParams(String),
    #[error("mesh: triangulation failed: {0}")]
    Triangulation(String),
    #[error("mesh dump, line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Outer,
    Inc1,
    Inc2,
    Axis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    Gap,
    Bulk,
    Inc1Int,
    Inc2Int,
}

impl Region {
    pub fn is_matrix(self) -> bool {
        matches!(self, Region::Gap | Region::Bulk)
    }

    pub fn is_inclusion(self) -> bool {
        !self.is_matrix()
    }
}

macro_rules! text_enum {
    ($ty:ty, $what:literal, $($var:path => $s:literal),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($var => $s),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($s => Ok($var),)+
                    other => Err(format!("unknown {} {other:?}", $what)),
                }
            }
        }
    };
}

text_enum!(BoundaryTag, "boundary tag", BoundaryTag::Outer => "OUTER", BoundaryTag::Inc1 => "INC1",
    BoundaryTag::Inc2 => "INC2", BoundaryTag::Axis => "AXIS");
text_enum!(Region, "region", Region::Gap => "GAP", Region::Bulk => "BULK",
    Region::Inc1Int => "INC1_INT", Region::Inc2Int => "INC2_INT");

/// A P1 triangulation. Inclusion boundaries are tagged `INC1`/`INC2` even
/// when the interiors are meshed, in which case they are interfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub elements: Vec<[usize; 3]>,
    pub element_region: Vec<Region>,
    pub boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    pub gap_layers: usize,
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Meridian half-plane mesh of an axisymmetric problem.
    pub fn is_meridian(&self) -> bool {
        self.boundary_edges.iter().any(|(_, t)| *t == BoundaryTag::Axis)
    }

    pub fn has_interiors(&self) -> bool {
        self.element_region.iter().any(|r| r.is_inclusion())
    }

    /// Sorted, deduplicated nodes of all edges carrying `tag`.
    pub fn tagged_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|(_, t)| *t == tag)
            .flat_map(|(e, _)| e.iter().copied())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Every node of inclusion `which` (1 or 2): boundary plus meshed interior.
    pub fn inclusion_nodes(&self, which: usize) -> Vec<usize> {
        let (tag, region) = match which {
            1 => (BoundaryTag::Inc1, Region::Inc1Int),
            2 => (BoundaryTag::Inc2, Region::Inc2Int),
            _ => panic!("inclusion index must be 1 or 2"),
        };
        let mut v = self.tagged_nodes(tag);
        for (el, r) in self.elements.iter().zip(&self.element_region) {
            if *r == region {
                v.extend_from_slice(el);
            }
        }
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn element_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.elements[e];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn centroid(&self, e: usize) -> Point {
        let [a, b, c] = self.elements[e];
        let (p, q, r) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    /// Matrix-region edges used by exactly one matrix element.
    pub fn matrix_boundary_edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = Vec::with_capacity(3 * self.elements.len());
        for (el, r) in self.elements.iter().zip(&self.element_region) {
            if r.is_matrix() {
                for k in 0..3 {
                    let (a, b) = (el[k], el[(k + 1) % 3]);
                    edges.push([a.min(b), a.max(b)]);
                }
            }
        }
        edges.sort_unstable();
        let mut out = Vec::new();
        let mut i = 0;
        while i < edges.len() {
            let mut j = i + 1;
            while j < edges.len() && edges[j] == edges[i] {
                j += 1;
            }
            if j - i == 1 {
                out.push(edges[i]);
            }
            i = j;
        }
        out
    }

    /// Number of element layers on the symmetry axis between the closest
    /// points of the two inclusions.
    pub fn measure_gap_layers(&self) -> usize {
        let inc1 = self.tagged_nodes(BoundaryTag::Inc1);
        let inc2 = self.tagged_nodes(BoundaryTag::Inc2);
        let on_axis = |i: &usize| self.nodes[*i][1] == 0.0;
        let left = inc1.iter().filter(|i| on_axis(i)).map(|&i| self.nodes[i][0]).fold(f64::MIN, f64::max);
        let right = inc2.iter().filter(|i| on_axis(i)).map(|&i| self.nodes[i][0]).fold(f64::MAX, f64::min);
        if left == f64::MIN || right == f64::MAX || left >= right {
            return 0;
        }
        let inside = self
            .nodes
            .iter()
            .filter(|p| p[1] == 0.0 && p[0] > left && p[0] < right)
            .count();
        inside + 1
    }
}

/// Structured annulus `inner < |x| < outer` with the inner circle tagged
/// `INC1` and the outer circle `OUTER`, for oracle checks.
pub fn annulus_mesh(inner: f64, outer: f64, radial: usize, angular: usize) -> Result<Mesh, MeshError> {
    if !(inner > 0.0 && outer > inner) || radial == 0 || angular < 3 {
        return Err(MeshError::InvalidParams("annulus needs 0 < inner < outer, radial >= 1, angular >= 3".into()));
    }
    let id = |i: usize, j: usize| i * angular + j % angular;
    let mut nodes = Vec::with_capacity((radial + 1) * angular);
    for i in 0..=radial {
        let r = inner + (outer - inner) * i as f64 / radial as f64;
        for j in 0..angular {
            let t = 2.0 * std::f64::consts::PI * j as f64 / angular as f64;
            nodes.push([r * t.cos(), r * t.sin()]);
        }
    }
    let mut elements = Vec::with_capacity(2 * radial * angular);
    for i in 0..radial {
        for j in 0..angular {
            elements.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            elements.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut boundary_edges = Vec::with_capacity(2 * angular);
    for j in 0..angular {
        boundary_edges.push(([id(0, j), id(0, j + 1)], BoundaryTag::Inc1));
        boundary_edges.push(([id(radial, j), id(radial, j + 1)], BoundaryTag::Outer));
    }
    let element_region = vec![Region::Bulk; elements.len()];
    Ok(Mesh { nodes, elements, element_region, boundary_edges, gap_layers: 0 })
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Structured triangulation of the square [-1,1]^2 with all boundary
    /// edges tagged OUTER.
    pub fn square(n: usize) -> Mesh {
        let mut nodes = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                nodes.push([-1.0 + 2.0 * i as f64 / n as f64, -1.0 + 2.0 * j as f64 / n as f64]);
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut elements = Vec::new();
        for j in 0..n {
            for i in 0..n {
                elements.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                elements.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let element_region = vec![Region::Bulk; elements.len()];
        let mut mesh = Mesh { nodes, elements, element_region, boundary_edges: Vec::new(), gap_layers: 0 };
        mesh.boundary_edges = mesh.matrix_boundary_edges().into_iter().map(|e| (e, BoundaryTag::Outer)).collect();
        mesh
    }
}
