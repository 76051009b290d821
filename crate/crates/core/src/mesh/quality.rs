use super::{Mesh, Region};

/// Elements with a smaller minimum angle are reported as slivers.
pub const SLIVER_ANGLE_DEG: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub min_angle_deg: f64,
    pub max_angle_deg: f64,
    /// Counts of longest-edge / shortest-altitude ratios in the bins
    /// [1,2), [2,4), [4,8), [8,16), [16,inf).
    pub aspect_histogram: [usize; 5],
    pub gap_layers: usize,
    pub nodes: usize,
    pub elements: usize,
    pub slivers: usize,
    /// Minimum angle over elements outside the gap strip.
    pub min_angle_bulk_deg: f64,
}

impl QualityReport {
    pub fn has_slivers(&self) -> bool {
        self.slivers > 0
    }
}

fn angles(p: [[f64; 2]; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let a = p[k];
        let b = p[(k + 1) % 3];
        let c = p[(k + 2) % 3];
        let u = [b[0] - a[0], b[1] - a[1]];
        let v = [c[0] - a[0], c[1] - a[1]];
        let cross = (u[0] * v[1] - u[1] * v[0]).abs();
        let dot = u[0] * v[0] + u[1] * v[1];
        out[k] = cross.atan2(dot).to_degrees();
    }
    out
}

pub fn mesh_quality(mesh: &Mesh) -> QualityReport {
    let mut report = QualityReport {
        min_angle_deg: 180.0,
        max_angle_deg: 0.0,
        aspect_histogram: [0; 5],
        gap_layers: mesh.measure_gap_layers(),
        nodes: mesh.nodes.len(),
        elements: mesh.elements.len(),
        slivers: 0,
        min_angle_bulk_deg: 180.0,
    };
    for (e, el) in mesh.elements.iter().enumerate() {
        let p = [mesh.nodes[el[0]], mesh.nodes[el[1]], mesh.nodes[el[2]]];
        let ang = angles(p);
        let lo = ang.iter().copied().fold(180.0, f64::min);
        let hi = ang.iter().copied().fold(0.0, f64::max);
        report.min_angle_deg = report.min_angle_deg.min(lo);
        report.max_angle_deg = report.max_angle_deg.max(hi);
        if mesh.element_region[e] != Region::Gap {
            report.min_angle_bulk_deg = report.min_angle_bulk_deg.min(lo);
        }
        if lo < SLIVER_ANGLE_DEG {
            report.slivers += 1;
        }
        let longest = (0..3)
            .map(|k| {
                let a = p[k];
                let b = p[(k + 1) % 3];
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .fold(0.0, f64::max);
        let altitude = 2.0 * mesh.element_area(e).abs() / longest;
        let ratio = longest / altitude;
        let bin = if ratio < 2.0 {
            0
        } else if ratio < 4.0 {
            1
        } else if ratio < 8.0 {
            2
        } else if ratio < 16.0 {
            3
        } else {
            4
        };
        report.aspect_histogram[bin] += 1;
    }
    report
}
