//! Conforming triangulations with a globally oriented edge table.
//!
//! Every edge `F` carries a fixed start point `s_F` and end point `e_F` with
//! `s_F - e_F = |F| t_F` and normal `n_F = (t_2, -t_1)`. The orientation is
//! chosen so that `n_F` is the outward normal of the neighbour `K_F^-`, which
//! is the lower-numbered triangle on interior edges and the only triangle on
//! boundary edges.

mod io;
mod refine;

pub use io::{read_mesh, write_mesh};
pub use refine::{bisect, bisect_with_limit, bisect_with_parents, uniform_refine, DEFAULT_CLOSURE_LIMIT};

use std::collections::HashMap;

use nalgebra::Vector2;

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Interior,
    Dirichlet,
    Neumann,
}

impl From<BoundaryKind> for EdgeKind {
    fn from(kind: BoundaryKind) -> Self {
        match kind {
            BoundaryKind::Dirichlet => EdgeKind::Dirichlet,
            BoundaryKind::Neumann => EdgeKind::Neumann,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triangle {
    /// Counter-clockwise vertex ids.
    pub vertices: [usize; 3],
    pub region: u32,
    /// Local index of the newest vertex; the refinement edge is opposite to it.
    pub refinement_vertex: usize,
}

impl Triangle {
    pub fn refinement_edge(&self) -> (usize, usize) {
        let r = self.refinement_vertex;
        (self.vertices[(r + 1) % 3], self.vertices[(r + 2) % 3])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Initial point `s_F`.
    pub start: usize,
    /// Terminal point `e_F`.
    pub end: usize,
    pub tangent: Vector2<f64>,
    pub normal: Vector2<f64>,
    pub length: f64,
    pub kind: EdgeKind,
    pub minus: usize,
    pub plus: Option<usize>,
    /// Vertex of `K_F^-` opposite to the edge.
    pub opposite_minus: usize,
    pub opposite_plus: Option<usize>,
}

impl Edge {
    pub fn is_interior(&self) -> bool {
        self.kind == EdgeKind::Interior
    }

    pub fn midpoint(&self, mesh: &Mesh) -> Point {
        (mesh.vertex(self.start) + mesh.vertex(self.end)) * 0.5
    }
}

/// Immutable conforming triangulation.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<Triangle>,
    edges: Vec<Edge>,
    /// `triangle_edges[t][i]` is the edge opposite local vertex `i`.
    triangle_edges: Vec<[usize; 3]>,
    areas: Vec<f64>,
    edge_lookup: HashMap<(usize, usize), usize>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn signed_area(p: &Point, q: &Point, r: &Point) -> f64 {
    0.5 * ((q.x - p.x) * (r.y - p.y) - (r.x - p.x) * (q.y - p.y))
}

impl Mesh {
    /// Builds a mesh from raw vertex, triangle and boundary lists.
    ///
    /// Clockwise triangles are reoriented. The refinement edge of every
    /// triangle is initialised to its longest edge.
    pub fn new(
        vertices: Vec<Point>,
        cells: Vec<([usize; 3], u32)>,
        boundary: Vec<(usize, usize, BoundaryKind)>,
    ) -> Result<Mesh> {
        let mut triangles = Vec::with_capacity(cells.len());
        for (t, (v, region)) in cells.into_iter().enumerate() {
            if v.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            let mut longest = 0;
            let mut best = -1.0;
            for i in 0..3 {
                let len = (vertices[v[(i + 1) % 3]] - vertices[v[(i + 2) % 3]]).norm_squared();
                if len > best * (1.0 + 1e-12) {
                    best = len;
                    longest = i;
                }
            }
            triangles.push(Triangle { vertices: v, region, refinement_vertex: longest });
        }
        let mut tags = HashMap::with_capacity(boundary.len());
        for (a, b, kind) in boundary {
            if a >= vertices.len() || b >= vertices.len() || a == b {
                return Err(Error::InvalidMesh(format!("boundary edge ({a}, {b}) is invalid")));
            }
            tags.insert(key(a, b), kind);
        }
        Self::from_parts(vertices, triangles, &tags)
    }

    pub(crate) fn from_parts(
        vertices: Vec<Point>,
        mut triangles: Vec<Triangle>,
        tags: &HashMap<(usize, usize), BoundaryKind>,
    ) -> Result<Mesh> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        if let Some(i) = vertices.iter().position(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidMesh(format!("vertex {i} has non-finite coordinates")));
        }

        let mut areas = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter_mut().enumerate() {
            let [a, b, c] = tri.vertices;
            if a == b || b == c || a == c {
                return Err(Error::DegenerateTriangle(t));
            }
            let mut area = signed_area(&vertices[a], &vertices[b], &vertices[c]);
            // Relative to the longest edge, so tiny but well-shaped triangles pass.
            let longest = [(a, b), (b, c), (c, a)]
                .iter()
                .map(|&(p, q)| (vertices[p] - vertices[q]).norm_squared())
                .fold(0.0, f64::max);
            if area.abs() <= 1e-14 * longest {
                return Err(Error::DegenerateTriangle(t));
            }
            if area < 0.0 {
                tri.vertices.swap(1, 2);
                tri.refinement_vertex = match tri.refinement_vertex {
                    1 => 2,
                    2 => 1,
                    r => r,
                };
                area = -area;
            }
            areas.push(area);
        }

        let mut edges: Vec<Edge> = Vec::with_capacity(triangles.len() * 3 / 2 + 4);
        let mut edge_lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(edges.capacity());
        let mut triangle_edges = vec![[usize::MAX; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            let v = tri.vertices;
            for i in 0..3 {
                let (a, b) = (v[(i + 1) % 3], v[(i + 2) % 3]);
                match edge_lookup.get(&key(a, b)) {
                    Some(&e) => {
                        let edge = &mut edges[e];
                        if edge.plus.is_some() {
                            return Err(Error::NonConforming(format!(
                                "edge ({a}, {b}) is shared by more than two triangles"
                            )));
                        }
                        edge.plus = Some(t);
                        edge.opposite_plus = Some(v[i]);
                        edge.kind = EdgeKind::Interior;
                        triangle_edges[t][i] = e;
                    }
                    None => {
                        // K_F^- traverses the edge from e_F to s_F counter-clockwise.
                        let (start, end) = (b, a);
                        let d = vertices[start] - vertices[end];
                        let length = d.norm();
                        let tangent = d / length;
                        let normal = Vector2::new(tangent.y, -tangent.x);
                        let e = edges.len();
                        edges.push(Edge {
                            start,
                            end,
                            tangent,
                            normal,
                            length,
                            kind: EdgeKind::Dirichlet,
                            minus: t,
                            plus: None,
                            opposite_minus: v[i],
                            opposite_plus: None,
                        });
                        edge_lookup.insert(key(a, b), e);
                        triangle_edges[t][i] = e;
                    }
                }
            }
        }

        let mut boundary_edges = Vec::new();
        for (e, edge) in edges.iter_mut().enumerate() {
            if edge.plus.is_some() {
                if tags.contains_key(&key(edge.start, edge.end)) {
                    return Err(Error::InvalidMesh(format!(
                        "interior edge ({}, {}) carries a boundary tag",
                        edge.start, edge.end
                    )));
                }
                continue;
            }
            match tags.get(&key(edge.start, edge.end)) {
                Some(&kind) => edge.kind = kind.into(),
                None => return Err(Error::UntaggedBoundary(edge.start, edge.end)),
            }
            boundary_edges.push(e);
        }
        if tags.len() != boundary_edges.len() {
            return Err(Error::InvalidMesh("boundary tag given for an edge that is not in the mesh".into()));
        }
        check_hanging_nodes(&vertices, &edges, &boundary_edges)?;

        Ok(Mesh { vertices, triangles, edges, triangle_edges, areas, edge_lookup })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex(&self, i: usize) -> Point {
        self.vertices[i]
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangle(&self, t: usize) -> &Triangle {
        &self.triangles[t]
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge ids of a triangle; entry `i` is opposite local vertex `i`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let v = self.triangles[t].vertices;
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]]
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.corners(t);
        (a + b + c) / 3.0
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        (a - b).norm().max((b - c).norm()).max((c - a).norm())
    }

    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&key(a, b)).copied()
    }

    /// `+1` when `n_F` is the outward normal of triangle `t`, `-1` otherwise.
    pub fn edge_sign(&self, t: usize, e: usize) -> f64 {
        if self.edges[e].minus == t {
            1.0
        } else {
            -1.0
        }
    }

    /// The triangles sharing an edge: `{K-}` on the boundary, `{K-, K+}` inside.
    pub fn edge_patch(&self, e: usize) -> Result<Vec<usize>> {
        let edge = self.edges.get(e).ok_or(Error::InvalidEdge(e))?;
        let mut patch = vec![edge.minus];
        patch.extend(edge.plus);
        Ok(patch)
    }

    /// Triangles incident to each vertex, in increasing id order.
    pub fn vertex_patches(&self) -> Vec<Vec<usize>> {
        let mut patches = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in &tri.vertices {
                patches[v].push(t);
            }
        }
        patches
    }

    /// Vertices lying on a Dirichlet edge.
    pub fn dirichlet_vertices(&self) -> Vec<bool> {
        let mut flag = vec![false; self.vertices.len()];
        for edge in self.edges.iter().filter(|e| e.kind == EdgeKind::Dirichlet) {
            flag[edge.start] = true;
            flag[edge.end] = true;
        }
        flag
    }

    /// Interior edges whose two neighbours carry different region tags.
    pub fn interface_edges(&self) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.plus.is_some_and(|p| self.triangles[p].region != self.triangles[e.minus].region))
            .map(|(i, _)| i)
            .collect()
    }

    /// Boundary edges as `(a, b, kind)` in edge id order.
    pub fn boundary_edges(&self) -> Vec<(usize, usize, BoundaryKind)> {
        self.edges
            .iter()
            .filter_map(|e| match e.kind {
                EdgeKind::Interior => None,
                EdgeKind::Dirichlet => Some((e.start, e.end, BoundaryKind::Dirichlet)),
                EdgeKind::Neumann => Some((e.start, e.end, BoundaryKind::Neumann)),
            })
            .collect()
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let p = self.corners(t);
                (0..3)
                    .map(|i| {
                        let u = p[(i + 1) % 3] - p[i];
                        let w = p[(i + 2) % 3] - p[i];
                        (u.dot(&w) / (u.norm() * w.norm())).clamp(-1.0, 1.0).acos()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Applies a coordinate map to every vertex, keeping the topology.
    pub fn map_coordinates(&self, f: impl Fn(Point) -> Point) -> Result<Mesh> {
        let vertices = self.vertices.iter().map(|&p| f(p)).collect();
        let tags = self.boundary_edges().into_iter().map(|(a, b, k)| (key(a, b), k)).collect();
        Self::from_parts(vertices, self.triangles.clone(), &tags)
    }
}

/// Rejects vertices lying strictly inside a single-sided edge.
fn check_hanging_nodes(vertices: &[Point], edges: &[Edge], boundary: &[usize]) -> Result<()> {
    let mut candidates: Vec<usize> = boundary.iter().flat_map(|&e| [edges[e].start, edges[e].end]).collect();
    candidates.sort_unstable();
    candidates.dedup();
    for &e in boundary {
        let edge = &edges[e];
        let (a, b) = (vertices[edge.start], vertices[edge.end]);
        let (lo, hi) = (a.inf(&b), a.sup(&b));
        let tol = 1e-12 * edge.length;
        for &v in &candidates {
            if v == edge.start || v == edge.end {
                continue;
            }
            let p = vertices[v];
            if p.x < lo.x - tol || p.x > hi.x + tol || p.y < lo.y - tol || p.y > hi.y + tol {
                continue;
            }
            let cross = (b - a).perp(&(p - a));
            if cross.abs() <= tol * edge.length {
                return Err(Error::NonConforming(format!("vertex {v} hangs on edge ({}, {})", edge.start, edge.end)));
            }
        }
    }
    Ok(())
}
