//! Plain-text mesh format.
//!
//! ```text
//! vertices N triangles M boundary B
//! x y                 (N lines)
//! v0 v1 v2 region     (M lines)
//! va vb tag           (B lines, tag is D or N)
//! ```

use std::fmt::Write as _;

use super::{BoundaryKind, Mesh, Point};
use crate::error::{Error, Result};

pub fn write_mesh(mesh: &Mesh) -> String {
    let boundary = mesh.boundary_edges();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "vertices {} triangles {} boundary {}",
        mesh.num_vertices(),
        mesh.num_triangles(),
        boundary.len()
    );
    for p in mesh.vertices() {
        let _ = writeln!(out, "{} {}", p.x, p.y);
    }
    for t in mesh.triangles() {
        let [a, b, c] = t.vertices;
        let _ = writeln!(out, "{a} {b} {c} {}", t.region);
    }
    for (a, b, kind) in boundary {
        let tag = match kind {
            BoundaryKind::Dirichlet => 'D',
            BoundaryKind::Neumann => 'N',
        };
        let _ = writeln!(out, "{a} {b} {tag}");
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what}")))
}

pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 6 || h[0] != "vertices" || h[2] != "triangles" || h[4] != "boundary" {
        return Err(parse_err(hline + 1, "expected `vertices N triangles M boundary B`"));
    }
    let n: usize = field(Some(h[1]), hline + 1, "vertex count")?;
    let m: usize = field(Some(h[3]), hline + 1, "triangle count")?;
    let b: usize = field(Some(h[5]), hline + 1, "boundary count")?;

    let mut next =
        |what: &str| lines.next().ok_or_else(|| parse_err(0, format!("unexpected end of input, expected {what}")));

    let mut vertices = Vec::with_capacity(n);
    for _ in 0..n {
        let (i, l) = next("vertex")?;
        let mut tok = l.split_whitespace();
        let x = field(tok.next(), i + 1, "x")?;
        let y = field(tok.next(), i + 1, "y")?;
        vertices.push(Point::new(x, y));
    }
    let mut cells = Vec::with_capacity(m);
    for _ in 0..m {
        let (i, l) = next("triangle")?;
        let mut tok = l.split_whitespace();
        let v0 = field(tok.next(), i + 1, "v0")?;
        let v1 = field(tok.next(), i + 1, "v1")?;
        let v2 = field(tok.next(), i + 1, "v2")?;
        let region = field(tok.next(), i + 1, "region")?;
        cells.push(([v0, v1, v2], region));
    }
    let mut boundary = Vec::with_capacity(b);
    for _ in 0..b {
        let (i, l) = next("boundary edge")?;
        let mut tok = l.split_whitespace();
        let va = field(tok.next(), i + 1, "va")?;
        let vb = field(tok.next(), i + 1, "vb")?;
        let kind = match tok.next() {
            Some("D") => BoundaryKind::Dirichlet,
            Some("N") => BoundaryKind::Neumann,
            _ => return Err(parse_err(i + 1, "boundary tag must be D or N")),
        };
        boundary.push((va, vb, kind));
    }
    Mesh::new(vertices, cells, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "vertices 4 triangles 2 boundary 4
0 0
1 0
1 1
0 1
0 1 2 0
0 2 3 0
0 1 D
1 2 D
2 3 N
3 0 N
";

    #[test]
    fn reads_and_writes_square() {
        let m = read_mesh(SQUARE).unwrap();
        assert_eq!(m.num_triangles(), 2);
        let text = write_mesh(&m);
        assert!(text.starts_with("vertices 4 triangles 2 boundary 4\n0 0\n1 0\n"));
        let again = read_mesh(&text).unwrap();
        assert_eq!(write_mesh(&again), text);
    }

    #[test]
    fn bad_header_and_tag() {
        assert!(matches!(read_mesh("verts 1"), Err(Error::Parse { .. })));
        let bad = SQUARE.replace("3 0 N", "3 0 X");
        assert!(matches!(read_mesh(&bad), Err(Error::Parse { line: 11, .. })));
    }
}
