//! Newest-vertex bisection with conformity closure.

use std::collections::HashMap;

use super::{key, BoundaryKind, Mesh, Triangle};
use crate::error::{Error, Result};

pub const DEFAULT_CLOSURE_LIMIT: usize = 100;

/// Bisects the marked triangles and closes the result to a conforming mesh.
pub fn bisect(mesh: &Mesh, marked: &[usize]) -> Result<Mesh> {
    bisect_with_limit(mesh, marked, DEFAULT_CLOSURE_LIMIT)
}

/// Every triangle is bisected once.
pub fn uniform_refine(mesh: &Mesh) -> Result<Mesh> {
    let all: Vec<usize> = (0..mesh.num_triangles()).collect();
    bisect(mesh, &all)
}

pub fn bisect_with_limit(mesh: &Mesh, marked: &[usize], depth_limit: usize) -> Result<Mesh> {
    bisect_with_parents(mesh, marked, depth_limit).map(|(m, _)| m)
}

/// Like [`bisect_with_limit`], also returning the endpoints of the parent edge of
/// every new vertex, in vertex-id order. Old vertices keep their ids.
pub fn bisect_with_parents(mesh: &Mesh, marked: &[usize], depth_limit: usize) -> Result<(Mesh, Vec<(usize, usize)>)> {
    if marked.is_empty() {
        return Err(Error::EmptyMarking);
    }
    let refinement_edge = |t: usize| {
        let (a, b) = mesh.triangle(t).refinement_edge();
        mesh.find_edge(a, b).expect("refinement edge belongs to the mesh")
    };

    let mut edge_marked = vec![false; mesh.num_edges()];
    for &t in marked {
        if t >= mesh.num_triangles() {
            return Err(Error::InvalidTriangle(t));
        }
        edge_marked[refinement_edge(t)] = true;
    }

    // A triangle with any marked edge must also split its refinement edge.
    let mut rounds = 0;
    loop {
        let mut changed = false;
        for t in 0..mesh.num_triangles() {
            let r = refinement_edge(t);
            if !edge_marked[r] && mesh.triangle_edges(t).iter().any(|&e| edge_marked[e]) {
                edge_marked[r] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        rounds += 1;
        if rounds > depth_limit {
            return Err(Error::ClosureDepth(depth_limit));
        }
    }

    let mut vertices = mesh.vertices().to_vec();
    let mut midpoint = HashMap::new();
    let mut parents = Vec::new();
    for (e, edge) in mesh.edges().iter().enumerate() {
        if edge_marked[e] {
            midpoint.insert(key(edge.start, edge.end), vertices.len());
            parents.push((edge.start, edge.end));
            vertices.push((mesh.vertex(edge.start) + mesh.vertex(edge.end)) * 0.5);
        }
    }

    let mut triangles = Vec::with_capacity(mesh.num_triangles() * 2);
    for tri in mesh.triangles() {
        split(tri.clone(), &midpoint, &mut triangles);
    }

    let mut tags: HashMap<(usize, usize), BoundaryKind> = HashMap::new();
    for (a, b, kind) in mesh.boundary_edges() {
        match midpoint.get(&key(a, b)) {
            Some(&m) => {
                tags.insert(key(a, m), kind);
                tags.insert(key(m, b), kind);
            }
            None => {
                tags.insert(key(a, b), kind);
            }
        }
    }

    Ok((Mesh::from_parts(vertices, triangles, &tags)?, parents))
}

fn split(tri: Triangle, midpoint: &HashMap<(usize, usize), usize>, out: &mut Vec<Triangle>) {
    let r = tri.refinement_vertex;
    let a = tri.vertices[r];
    let b = tri.vertices[(r + 1) % 3];
    let c = tri.vertices[(r + 2) % 3];
    match midpoint.get(&key(b, c)) {
        None => out.push(tri),
        Some(&m) => {
            let region = tri.region;
            split(Triangle { vertices: [a, b, m], region, refinement_vertex: 2 }, midpoint, out);
            split(Triangle { vertices: [a, m, c], region, refinement_vertex: 1 }, midpoint, out);
        }
    }
}
