//! Mesh generation: a structured strip across the gap, spliced to a
//! constrained Delaunay bulk triangulation of the rest of the matrix.
//!
//! Only the fundamental region `y >= 0` (and `x <= 0` for mirror-symmetric
//! configurations) is triangulated; the remaining parts are exact mirror
//! images, so symmetric problems have bit-symmetric meshes.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::{signed_area, BoundaryTag, Mesh, MeshError, Region};
use crate::geometry::{Configuration, InclusionBody, Point};

pub const DEFAULT_NODE_BUDGET: usize = 500_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MeshParams {
    /// Target edge length away from the inclusions.
    pub h_bulk: f64,
    /// Minimum number of element layers across the gap (rounded up to even).
    pub gap_layers_min: usize,
    /// Growth factor between neighbouring cells along boundaries and the strip.
    pub grading_ratio: f64,
    pub include_interiors: bool,
    /// Along-gap to across-gap cell size ratio inside the strip.
    pub strip_aspect: f64,
    /// Minimum interior angle accepted by the quality gate, in degrees.
    pub min_angle_deg: f64,
    pub node_budget: usize,
}

impl Default for MeshParams {
    fn default() -> Self {
        Self {
            h_bulk: 0.25,
            gap_layers_min: 8,
            grading_ratio: 1.2,
            include_interiors: false,
            strip_aspect: 1.0,
            min_angle_deg: 20.0,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

impl MeshParams {
    pub fn validate(&self) -> Result<(), MeshError> {
        let bad = |m: &str| Err(MeshError::InvalidParams(m.to_string()));
        if !(self.h_bulk > 0.0 && self.h_bulk.is_finite()) {
            return bad("h_bulk must be positive");
        }
        if self.gap_layers_min < 4 {
            return bad("gap_layers_min must be at least 4");
        }
        if !(self.grading_ratio > 1.0 && self.grading_ratio <= 2.0) {
            return bad("grading_ratio must lie in (1, 2]");
        }
        if !(self.strip_aspect > 0.0 && self.strip_aspect <= 4.0) {
            return bad("strip_aspect must lie in (0, 4]");
        }
        if !(self.min_angle_deg >= 0.0 && self.min_angle_deg < 60.0) {
            return bad("min_angle_deg must lie in [0, 60)");
        }
        if self.node_budget == 0 {
            return bad("node_budget must be positive");
        }
        Ok(())
    }

    /// Even layer count actually used.
    pub fn layers(&self) -> usize {
        self.gap_layers_min.max(4).div_ceil(2) * 2
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Label {
    /// 0 for none, otherwise the inclusion whose boundary carries the node
    inc: u8,
    outer: bool,
}

#[derive(Default)]
struct Builder {
    nodes: Vec<Point>,
    labels: Vec<Label>,
    index: HashMap<(u64, u64), usize>,
    elements: Vec<[usize; 3]>,
    regions: Vec<Region>,
}

fn key(p: Point) -> (u64, u64) {
    // +0.0 and -0.0 must coincide
    ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits())
}

impl Builder {
    fn node(&mut self, p: Point) -> usize {
        let p = [p[0] + 0.0, p[1] + 0.0];
        if let Some(&i) = self.index.get(&key(p)) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(p);
        self.labels.push(Label::default());
        self.index.insert(key(p), i);
        i
    }

    fn label_inc(&mut self, i: usize, which: u8) {
        self.labels[i].inc = which;
    }

    fn label_outer(&mut self, i: usize) {
        self.labels[i].outer = true;
    }

    fn triangle(&mut self, a: usize, b: usize, c: usize, region: Region) {
        let area = signed_area(self.nodes[a], self.nodes[b], self.nodes[c]);
        if area > 0.0 {
            self.elements.push([a, b, c]);
        } else {
            self.elements.push([a, c, b]);
        }
        self.regions.push(region);
    }

    /// Appends the mirror image under `p -> map(p)`.
    fn mirror(&mut self, map: impl Fn(Point) -> Point, swap_inclusions: bool) {
        let n = self.nodes.len();
        let mut image = Vec::with_capacity(n);
        for i in 0..n {
            let j = self.node(map(self.nodes[i]));
            let mut l = self.labels[i];
            if swap_inclusions && l.inc != 0 {
                l.inc = 3 - l.inc;
            }
            if j != i || !swap_inclusions {
                self.labels[j] = l;
            }
            image.push(j);
        }
        let m = self.elements.len();
        for e in 0..m {
            let [a, b, c] = self.elements[e];
            let r = match (self.regions[e], swap_inclusions) {
                (Region::Inc1Int, true) => Region::Inc2Int,
                (Region::Inc2Int, true) => Region::Inc1Int,
                (r, _) => r,
            };
            // reflection reverses orientation
            self.elements.push([image[a], image[c], image[b]]);
            self.regions.push(r);
        }
    }
}

/// Stations `0 = y_0 < ... < y_s` of the strip; the step follows the
/// local gap thickness and is limited by the grading ratio.
fn strip_stations(config: &Configuration, params: &MeshParams, layers: usize, h_near: f64) -> Result<Vec<f64>, MeshError> {
    let l = layers as f64;
    let cap = 0.5 * config.graph_limit();
    let size = |y: f64| params.strip_aspect * config.gap_thickness(y) / l;
    let mut ys = vec![0.0];
    let mut prev = size(0.0);
    let mut y = 0.0;
    loop {
        let s = size(y);
        if ys.len() > 1 && s >= h_near {
            break;
        }
        let step = s.min(params.grading_ratio * prev);
        if y + 1.5 * step >= cap {
            ys.push(cap);
            break;
        }
        y += step;
        ys.push(y);
        prev = step;
        if ys.len() * (layers + 1) > params.node_budget {
            return Err(MeshError::BudgetExceeded { needed: ys.len() * (layers + 1), budget: params.node_budget });
        }
    }
    Ok(ys)
}

/// Positions along a segment of length `len` whose spacing follows
/// `min(h_a + (r-1)s, h_b + (r-1)(len-s), h_max)`.
fn graded_positions(len: f64, h_a: f64, h_b: f64, h_max: f64, r: f64) -> Vec<f64> {
    let h = |s: f64| (h_a + (r - 1.0) * s).min(h_b + (r - 1.0) * (len - s)).min(h_max).max(1e-300);
    let mut s = vec![0.0];
    let mut x = 0.0;
    while x < len {
        x += h(x);
        s.push(x);
    }
    let n = s.len() - 1;
    let last_step = s[n] - s[n - 1];
    let end = if n > 1 && s[n] - len > 0.5 * last_step { n - 1 } else { n };
    let scale = len / s[end];
    let mut out: Vec<f64> = s[..=end].iter().map(|v| v * scale).collect();
    out[end] = len;
    out
}

fn segment_points(a: Point, b: Point, h_a: f64, h_b: f64, h_max: f64, r: f64) -> Vec<Point> {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let pos = graded_positions(len, h_a, h_b, h_max, r);
    let n = pos.len() - 1;
    pos.iter()
        .enumerate()
        .map(|(k, s)| {
            if k == 0 {
                a
            } else if k == n {
                b
            } else {
                let t = s / len;
                let mut p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                // keep points on coordinate lines exactly on them
                if a[0] == b[0] {
                    p[0] = a[0];
                }
                if a[1] == b[1] {
                    p[1] = a[1];
                }
                p
            }
        })
        .collect()
}

/// Points on `curve(t)` for `t` from `t0` to `t1`, graded in arc length.
fn curve_points(curve: impl Fn(f64) -> Point, t0: f64, t1: f64, h_a: f64, h_b: f64, h_max: f64, r: f64) -> Vec<Point> {
    const SAMPLES: usize = 16384;
    let ts: Vec<f64> = (0..=SAMPLES).map(|k| t0 + (t1 - t0) * k as f64 / SAMPLES as f64).collect();
    let mut cum = vec![0.0; SAMPLES + 1];
    let mut prev = curve(t0);
    for k in 1..=SAMPLES {
        let p = curve(ts[k]);
        cum[k] = cum[k - 1] + (p[0] - prev[0]).hypot(p[1] - prev[1]);
        prev = p;
    }
    let len = cum[SAMPLES];
    let pos = graded_positions(len, h_a, h_b, h_max, r);
    pos.iter()
        .map(|&s| {
            let k = cum.partition_point(|&c| c < s).clamp(1, SAMPLES);
            let w = if cum[k] > cum[k - 1] { (s - cum[k - 1]) / (cum[k] - cum[k - 1]) } else { 0.0 };
            curve(ts[k - 1] + w * (ts[k] - ts[k - 1]))
        })
        .collect()
}

fn push_unique(poly: &mut Vec<Point>, p: Point) {
    if poly.last() != Some(&p) && poly.first() != Some(&p) {
        poly.push(p);
    }
}

/// Constrained Delaunay triangulation of the polygon `poly`, refined to
/// the angle limit and maximum area; returns the kept triangles.
fn triangulate(poly: &[Point], h_max: f64, angle_deg: f64, budget: usize) -> Result<Vec<[Point; 3]>, MeshError> {
    let vertices: Vec<Point2<f64>> = poly.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let n = vertices.len();
    let edges: Vec<[usize; 2]> = (0..n).map(|i| [i, (i + 1) % n]).collect();
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(vertices, edges)
        .map_err(|e| MeshError::Triangulation(format!("{e:?}")))?;
    if cdt.num_vertices() != n {
        return Err(MeshError::Triangulation("duplicate boundary vertices".into()));
    }
    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(angle_deg))
        .with_max_allowed_area(0.5 * 3f64.sqrt() / 2.0 * h_max * h_max)
        .with_max_additional_vertices(budget)
        .keep_constraint_edges()
        .exclude_outer_faces(true);
    let result = cdt.refine(params);
    if !result.refinement_complete {
        return Err(MeshError::BudgetExceeded { needed: cdt.num_vertices(), budget });
    }
    let excluded: HashSet<_> = result.excluded_faces.iter().copied().collect();
    let mut out = Vec::with_capacity(cdt.num_inner_faces());
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix()) {
            continue;
        }
        let p = face.positions();
        out.push([[p[0].x, p[0].y], [p[1].x, p[1].y], [p[2].x, p[2].y]]);
    }
    Ok(out)
}

/// Upper boundary arc of an inclusion from its back point on the axis to
/// height `y_top`, graded from `h_arc` at the back to `h_top`.
fn inclusion_arc(body: &InclusionBody, top: Point, y_top: f64, h_top: f64, h_arc: f64, r: f64) -> Vec<Point> {
    let theta_top = body.shape.theta_at_height(y_top);
    let mut pts = curve_points(|t| body.boundary_point(t), PI, theta_top, h_arc, h_top, h_arc, r);
    let back = body.boundary_point(PI);
    pts[0] = [back[0], 0.0];
    let n = pts.len() - 1;
    pts[n] = top;
    pts
}

pub fn generate_mesh(config: &Configuration, params: &MeshParams) -> Result<Mesh, MeshError> {
    params.validate()?;
    let angle_limits = [25.0, 28.0, 30.0];
    let mut worst = f64::MAX;
    for &angle in &angle_limits {
        let mesh = build(config, params, angle)?;
        let q = super::mesh_quality(&mesh);
        if q.min_angle_deg >= params.min_angle_deg {
            return Ok(mesh);
        }
        worst = worst.min(q.min_angle_deg);
    }
    Err(MeshError::QualityFailure { min_angle: worst, threshold: params.min_angle_deg })
}

fn build(config: &Configuration, params: &MeshParams, angle: f64) -> Result<Mesh, MeshError> {
    let layers = params.layers();
    let meridian = config.is_axisymmetric();
    let sym = config.symmetric;
    let r = params.grading_ratio;
    let kappa = config.inclusion1.shape.max_curvature().max(config.inclusion2.shape.max_curvature());
    let h_arc = params.h_bulk.min(0.25 / kappa);
    let h_near = 0.5 * h_arc;

    let stations = strip_stations(config, params, layers, h_near)?;
    let y_top = *stations.last().unwrap();
    let cols = if sym { layers / 2 + 1 } else { layers + 1 };
    let copies = if sym { 2 } else { 1 } * if meridian { 1 } else { 2 };
    if stations.len() * cols * copies > params.node_budget {
        return Err(MeshError::BudgetExceeded { needed: stations.len() * cols * copies, budget: params.node_budget });
    }

    let mut b = Builder::default();

    // gap strip
    let l = layers as f64;
    let grid: Vec<Vec<usize>> = stations
        .iter()
        .map(|&y| {
            let x0 = config.left_boundary_x(y);
            let x1 = config.right_boundary_x(y);
            let t = config.gap_thickness(y);
            (0..cols)
                .map(|i| {
                    let x = if i == 0 {
                        x0
                    } else if i == layers {
                        x1
                    } else if sym && i == layers / 2 {
                        0.0
                    } else {
                        x0 + (i as f64 / l) * t
                    };
                    b.node([x, y])
                })
                .collect()
        })
        .collect();
    for row in &grid {
        b.label_inc(row[0], 1);
        if !sym {
            b.label_inc(row[layers], 2);
        }
    }
    for j in 0..stations.len() - 1 {
        for i in 0..cols - 1 {
            let (p00, p10, p01, p11) = (grid[j][i], grid[j][i + 1], grid[j + 1][i], grid[j + 1][i + 1]);
            // split along the shorter diagonal
            let d1 = dist(b.nodes[p00], b.nodes[p11]);
            let d2 = dist(b.nodes[p10], b.nodes[p01]);
            if d1 <= d2 {
                b.triangle(p00, p10, p11, Region::Gap);
                b.triangle(p00, p11, p01, Region::Gap);
            } else {
                b.triangle(p00, p10, p01, Region::Gap);
                b.triangle(p10, p11, p01, Region::Gap);
            }
        }
    }

    // fundamental bulk polygon
    let top = &grid[stations.len() - 1];
    let h_top = config.gap_thickness(y_top) / l;
    let cx = config.outer.center[0];
    let radius = config.outer.radius;
    let n_outer = 4 * ((2.0 * PI * radius / params.h_bulk / 4.0).ceil() as usize).max(2);
    let outer_point = |k: usize| -> Point {
        if k == 0 {
            [cx + radius, 0.0]
        } else if 4 * k == n_outer {
            [cx, radius]
        } else if 2 * k == n_outer {
            [cx - radius, 0.0]
        } else {
            let t = 2.0 * PI * k as f64 / n_outer as f64;
            [cx + radius * t.cos(), radius * t.sin()]
        }
    };

    let arc1 = inclusion_arc(&config.inclusion1, b.nodes[top[0]], y_top, h_top, h_arc, r);
    let back1 = arc1[0];
    let mut poly: Vec<Point> = Vec::new();
    let mut outer_pts: Vec<Point> = Vec::new();
    for p in segment_points([cx - radius, 0.0], back1, params.h_bulk, h_arc, params.h_bulk, r) {
        push_unique(&mut poly, p);
    }
    for &p in &arc1 {
        push_unique(&mut poly, p);
    }
    for &i in top {
        push_unique(&mut poly, b.nodes[i]);
    }
    let arc2 = if sym {
        for p in segment_points([0.0, y_top], [0.0, radius], h_top, params.h_bulk, params.h_bulk, r) {
            push_unique(&mut poly, p);
        }
        for k in n_outer / 4..=n_outer / 2 {
            outer_pts.push(outer_point(k));
        }
        Vec::new()
    } else {
        let mut arc2 = inclusion_arc(&config.inclusion2, b.nodes[top[layers]], y_top, h_top, h_arc, r);
        arc2.reverse();
        for &p in &arc2 {
            push_unique(&mut poly, p);
        }
        let back2 = *arc2.last().unwrap();
        for p in segment_points(back2, [cx + radius, 0.0], h_arc, params.h_bulk, params.h_bulk, r) {
            push_unique(&mut poly, p);
        }
        for k in 0..=n_outer / 2 {
            outer_pts.push(outer_point(k));
        }
        arc2
    };
    for &p in &outer_pts {
        push_unique(&mut poly, p);
    }

    let budget = params.node_budget;
    for tri in triangulate(&poly, params.h_bulk, angle, budget)? {
        let [a, bb, c] = tri.map(|p| b.node(p));
        b.triangle(a, bb, c, Region::Bulk);
    }
    for &p in &arc1 {
        let i = b.node(p);
        b.label_inc(i, 1);
    }
    for &p in &arc2 {
        let i = b.node(p);
        b.label_inc(i, 2);
    }
    for &p in &outer_pts {
        let i = b.node(p);
        b.label_outer(i);
    }

    if params.include_interiors {
        let h0 = params.strip_aspect * config.epsilon / l;
        let column: Vec<Point> = grid.iter().rev().map(|row| b.nodes[row[0]]).collect();
        let mut poly1: Vec<Point> = Vec::new();
        for &p in arc1.iter().chain(&column) {
            push_unique(&mut poly1, p);
        }
        for p in segment_points(*column.last().unwrap(), back1, h0, h_arc, h_arc, r) {
            push_unique(&mut poly1, p);
        }
        for tri in triangulate(&poly1, h_arc, angle, budget)? {
            let [a, bb, c] = tri.map(|p| b.node(p));
            b.triangle(a, bb, c, Region::Inc1Int);
        }
        if !sym {
            let column: Vec<Point> = grid.iter().map(|row| b.nodes[row[layers]]).collect();
            let mut poly2: Vec<Point> = Vec::new();
            let back2 = *arc2.last().unwrap();
            for p in segment_points(back2, column[0], h_arc, h0, h_arc, r) {
                push_unique(&mut poly2, p);
            }
            for &p in column.iter().chain(arc2.iter()) {
                push_unique(&mut poly2, p);
            }
            for tri in triangulate(&poly2, h_arc, angle, budget)? {
                let [a, bb, c] = tri.map(|p| b.node(p));
                b.triangle(a, bb, c, Region::Inc2Int);
            }
        }
    }

    if sym {
        b.mirror(|p| [-p[0], p[1]], true);
    }
    if !meridian {
        b.mirror(|p| [p[0], -p[1]], false);
    }
    if b.nodes.len() > budget {
        return Err(MeshError::BudgetExceeded { needed: b.nodes.len(), budget });
    }

    finish(b, meridian, layers)
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn finish(b: Builder, meridian: bool, layers: usize) -> Result<Mesh, MeshError> {
    // drop nodes no element references, keeping first-seen order
    let mut used = vec![false; b.nodes.len()];
    for e in &b.elements {
        for &i in e {
            used[i] = true;
        }
    }
    let mut remap = vec![usize::MAX; b.nodes.len()];
    let mut nodes = Vec::new();
    let mut labels = Vec::new();
    for i in 0..b.nodes.len() {
        if used[i] {
            remap[i] = nodes.len();
            nodes.push(b.nodes[i]);
            labels.push(b.labels[i]);
        }
    }
    let elements: Vec<[usize; 3]> = b.elements.iter().map(|e| e.map(|i| remap[i])).collect();
    let mut mesh = Mesh { nodes, elements, element_region: b.regions, boundary_edges: Vec::new(), gap_layers: 0 };

    let mut tagged = Vec::new();
    for e in mesh.matrix_boundary_edges() {
        let (la, lb) = (labels[e[0]], labels[e[1]]);
        let (pa, pb) = (mesh.nodes[e[0]], mesh.nodes[e[1]]);
        let tag = if la.inc != 0 && la.inc == lb.inc {
            if la.inc == 1 {
                BoundaryTag::Inc1
            } else {
                BoundaryTag::Inc2
            }
        } else if meridian && pa[1] == 0.0 && pb[1] == 0.0 {
            BoundaryTag::Axis
        } else if la.outer && lb.outer {
            BoundaryTag::Outer
        } else {
            return Err(MeshError::Triangulation(format!("unclassified boundary edge {pa:?} - {pb:?}")));
        };
        tagged.push((e, tag));
    }
    mesh.boundary_edges = tagged;
    mesh.gap_layers = mesh.measure_gap_layers();
    if mesh.gap_layers < layers {
        return Err(MeshError::Triangulation(format!("gap layers {} below {layers}", mesh.gap_layers)));
    }
    Ok(mesh)
}
