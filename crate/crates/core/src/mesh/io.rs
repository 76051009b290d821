use std::io::{BufRead, Write};

use super::{BoundaryTag, Mesh, MeshError, Region};

/// Writes the text dump. Coordinates use the shortest round-trip decimal
/// form, so reading the dump back reproduces every bit.
pub fn write_mesh<W: Write>(mesh: &Mesh, mut w: W) -> std::io::Result<()> {
    writeln!(w, "nodes {} elements {}", mesh.nodes.len(), mesh.elements.len())?;
    for (i, p) in mesh.nodes.iter().enumerate() {
        writeln!(w, "{i} {:?} {:?}", p[0], p[1])?;
    }
    for (i, (e, r)) in mesh.elements.iter().zip(&mesh.element_region).enumerate() {
        writeln!(w, "{i} {} {} {} {r}", e[0], e[1], e[2])?;
    }
    for (e, t) in &mesh.boundary_edges {
        writeln!(w, "{} {} {t}", e[0], e[1])?;
    }
    Ok(())
}

pub fn read_mesh<R: BufRead>(r: R) -> Result<Mesh, MeshError> {
    let mut lines = r.lines().enumerate();
    let err = |line: usize, message: String| MeshError::Parse { line: line + 1, message };

    let (ln, header) = lines.next().ok_or_else(|| err(0, "empty input".into()))?;
    let header = header?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 || h[0] != "nodes" || h[2] != "elements" {
        return Err(err(ln, format!("bad header {header:?}")));
    }
    let n: usize = h[1].parse().map_err(|_| err(ln, "bad node count".into()))?;
    let m: usize = h[3].parse().map_err(|_| err(ln, "bad element count".into()))?;

    fn field<T: std::str::FromStr>(tok: Option<&str>, ln: usize, what: &str) -> Result<T, MeshError> {
        tok.and_then(|t| t.parse().ok())
            .ok_or_else(|| MeshError::Parse { line: ln + 1, message: format!("bad {what}") })
    }

    let mut nodes = Vec::with_capacity(n);
    for k in 0..n {
        let (ln, line) = lines.next().ok_or_else(|| err(ln + k, "truncated node list".into()))?;
        let line = line?;
        let mut t = line.split_whitespace();
        let id: usize = field(t.next(), ln, "node id")?;
        if id != k {
            return Err(err(ln, format!("node id {id} out of order")));
        }
        nodes.push([field(t.next(), ln, "x")?, field(t.next(), ln, "y")?]);
    }
    let mut elements = Vec::with_capacity(m);
    let mut element_region = Vec::with_capacity(m);
    for k in 0..m {
        let (ln, line) = lines.next().ok_or_else(|| err(0, "truncated element list".into()))?;
        let line = line?;
        let mut t = line.split_whitespace();
        let id: usize = field(t.next(), ln, "element id")?;
        if id != k {
            return Err(err(ln, format!("element id {id} out of order")));
        }
        let e = [field(t.next(), ln, "node")?, field(t.next(), ln, "node")?, field(t.next(), ln, "node")?];
        if e.iter().any(|&i| i >= n) {
            return Err(err(ln, "node index out of range".into()));
        }
        elements.push(e);
        let r: Region = t.next().unwrap_or("").parse().map_err(|e: String| err(ln, e))?;
        element_region.push(r);
    }
    let mut boundary_edges = Vec::new();
    for (ln, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut t = line.split_whitespace();
        let e = [field(t.next(), ln, "edge node")?, field(t.next(), ln, "edge node")?];
        if e.iter().any(|&i| i >= n) {
            return Err(err(ln, "node index out of range".into()));
        }
        let tag: BoundaryTag = t.next().unwrap_or("").parse().map_err(|e: String| err(ln, e))?;
        boundary_edges.push((e, tag));
    }
    let mut mesh = Mesh { nodes, elements, element_region, boundary_edges, gap_layers: 0 };
    mesh.gap_layers = mesh.measure_gap_layers();
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures::square;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut mesh = square(3);
        mesh.nodes[5] = [0.1 + 0.2, -1.0 / 3.0];
        let mut buf = Vec::new();
        write_mesh(&mesh, &mut buf).unwrap();
        let back = read_mesh(&buf[..]).unwrap();
        assert_eq!(back, mesh);
        assert_eq!(back.nodes[5][0].to_bits(), (0.1f64 + 0.2).to_bits());
    }

    #[test]
    fn rejects_bad_region() {
        let text = "nodes 3 elements 1\n0 0 0\n1 1 0\n2 0 1\n0 0 1 2 NOPE\n";
        assert!(matches!(read_mesh(text.as_bytes()), Err(MeshError::Parse { line: 5, .. })));
    }
}
