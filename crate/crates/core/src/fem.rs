//! Conforming P1 finite elements for `-div(A grad u) = f` with mixed boundary conditions.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::geometry::{barycentric_gradients, quad_form, sym_eigenvalues};
use crate::mesh::{EdgeKind, Mesh, Point};
use crate::quadrature::{gauss_legendre, graded_pieces, triangle_area, TriangleRule};
use crate::sparse::{pcg, CsrMatrix};

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> Vector2<f64> + Send + Sync>;

/// Levels of geometric grading toward a singular vertex in [`energy_error`].
pub const SINGULAR_LEVELS: usize = 8;
/// Shrink factor per grading level.
pub const SINGULAR_RATIO: f64 = 0.15;

/// Piecewise constant SPD diffusion tensor, one matrix per triangle.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    tensors: Vec<Matrix2<f64>>,
    inverses: Vec<Matrix2<f64>>,
    lambda_min: Vec<f64>,
    lambda_max: Vec<f64>,
    regions: Vec<u32>,
}

/// Checks symmetry and positive definiteness of a region tensor.
pub fn validate_tensor(region: u32, a: &Matrix2<f64>) -> Result<(f64, f64)> {
    let scale = a.abs().max();
    if !a.iter().all(|v| v.is_finite()) || (a[(0, 1)] - a[(1, 0)]).abs() > 1e-14 * scale {
        return Err(Error::NotSpd(region));
    }
    let (lo, hi) = sym_eigenvalues(a);
    if lo <= 0.0 {
        return Err(Error::NotSpd(region));
    }
    Ok((lo, hi))
}

impl CoefficientField {
    pub fn from_regions(mesh: &Mesh, regions: &BTreeMap<u32, Matrix2<f64>>) -> Result<Self> {
        let mut cache = BTreeMap::new();
        for (&r, a) in regions {
            let (lo, hi) = validate_tensor(r, a)?;
            let inv = a.try_inverse().ok_or(Error::NotSpd(r))?;
            cache.insert(r, (*a, inv, lo, hi));
        }
        let n = mesh.num_triangles();
        let mut field = CoefficientField {
            tensors: Vec::with_capacity(n),
            inverses: Vec::with_capacity(n),
            lambda_min: Vec::with_capacity(n),
            lambda_max: Vec::with_capacity(n),
            regions: Vec::with_capacity(n),
        };
        for tri in mesh.triangles() {
            let &(a, inv, lo, hi) = cache.get(&tri.region).ok_or(Error::MissingRegion(tri.region))?;
            field.tensors.push(a);
            field.inverses.push(inv);
            field.lambda_min.push(lo);
            field.lambda_max.push(hi);
            field.regions.push(tri.region);
        }
        Ok(field)
    }

    /// Uniform tensor on every triangle.
    pub fn constant(mesh: &Mesh, a: Matrix2<f64>) -> Result<Self> {
        let regions: BTreeMap<u32, Matrix2<f64>> = mesh.triangles().iter().map(|t| (t.region, a)).collect();
        Self::from_regions(mesh, &regions)
    }

    pub fn tensor(&self, t: usize) -> &Matrix2<f64> {
        &self.tensors[t]
    }

    pub fn inverse(&self, t: usize) -> &Matrix2<f64> {
        &self.inverses[t]
    }

    pub fn lambda_min(&self, t: usize) -> f64 {
        self.lambda_min[t]
    }

    pub fn lambda_max(&self, t: usize) -> f64 {
        self.lambda_max[t]
    }

    /// `Some(alpha)` when the tensor on `t` is `alpha I`.
    pub fn scalar(&self, t: usize) -> Option<f64> {
        let a = &self.tensors[t];
        (a[(0, 1)] == 0.0 && a[(1, 0)] == 0.0 && a[(0, 0)] == a[(1, 1)]).then_some(a[(0, 0)])
    }

    pub fn region(&self, t: usize) -> u32 {
        self.regions[t]
    }
}

/// Dirichlet trace (sampled at vertices) and Neumann flux `g_N = -A grad u . n`
/// (sampled at edge midpoints, constant per edge).
#[derive(Clone)]
pub struct BoundaryData {
    pub dirichlet: ScalarFn,
    pub neumann: ScalarFn,
}

impl BoundaryData {
    pub fn homogeneous() -> Self {
        BoundaryData { dirichlet: Arc::new(|_| 0.0), neumann: Arc::new(|_| 0.0) }
    }

    /// `g_{N,F}` on Neumann edges, zero elsewhere.
    pub fn neumann_values(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.edges()
            .iter()
            .map(|e| if e.kind == EdgeKind::Neumann { (self.neumann)(e.midpoint(mesh)) } else { 0.0 })
            .collect()
    }
}

impl std::fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("BoundaryData { .. }")
    }
}

/// Reduced system over free vertices, with Dirichlet values lifted into the right-hand side.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Global vertex id of each unknown.
    pub free: Vec<usize>,
    /// Dirichlet values at constrained vertices, zero at free ones.
    pub lifted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct P1Solution {
    /// Nodal values, one per mesh vertex.
    pub values: Vec<f64>,
    pub iterations: usize,
}

pub fn local_stiffness(mesh: &Mesh, coef: &CoefficientField, t: usize) -> [[f64; 3]; 3] {
    let area = mesh.area(t);
    let g = barycentric_gradients(&mesh.corners(t), area);
    let a = coef.tensor(t);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * g[i].dot(&(a * g[j]));
        }
    }
    k
}

/// Full stiffness matrix over all vertices, before any boundary elimination.
pub fn assemble_stiffness(mesh: &Mesh, coef: &CoefficientField) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let k = local_stiffness(mesh, coef, t);
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((tri.vertices[i], tri.vertices[j], k[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.num_vertices(), &triplets)
}

/// Load vector `f(v) = (f, v) - (g_N, v)_{Gamma_N}` over all vertices.
pub fn assemble_load(mesh: &Mesh, source: &dyn Fn(Point) -> f64, boundary: &BoundaryData) -> Vec<f64> {
    let rule = TriangleRule::degree4();
    let mut load = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let c = mesh.corners(t);
        for i in 0..3 {
            load[tri.vertices[i]] += rule.integrate(&c, mesh.area(t), |x, l| source(x) * l[i]);
        }
    }
    for edge in mesh.edges().iter().filter(|e| e.kind == EdgeKind::Neumann) {
        let g = (boundary.neumann)(edge.midpoint(mesh));
        load[edge.start] -= 0.5 * g * edge.length;
        load[edge.end] -= 0.5 * g * edge.length;
    }
    load
}

pub fn assemble(
    mesh: &Mesh,
    coef: &CoefficientField,
    source: &dyn Fn(Point) -> f64,
    boundary: &BoundaryData,
) -> Result<LinearSystem> {
    let constrained = mesh.dirichlet_vertices();
    if !constrained.iter().any(|&c| c) {
        return Err(Error::NoDirichlet);
    }
    let full = assemble_stiffness(mesh, coef);
    let load = assemble_load(mesh, source, boundary);

    let mut lifted = vec![0.0; mesh.num_vertices()];
    let mut index = vec![usize::MAX; mesh.num_vertices()];
    let mut free = Vec::new();
    for v in 0..mesh.num_vertices() {
        if constrained[v] {
            lifted[v] = (boundary.dirichlet)(mesh.vertex(v));
        } else {
            index[v] = free.len();
            free.push(v);
        }
    }

    let mut triplets = Vec::with_capacity(full.nnz());
    let mut rhs = Vec::with_capacity(free.len());
    for (i, &v) in free.iter().enumerate() {
        let mut b = load[v];
        for (w, k) in full.row(v) {
            if constrained[w] {
                b -= k * lifted[w];
            } else {
                triplets.push((i, index[w], k));
            }
        }
        rhs.push(b);
    }
    Ok(LinearSystem { matrix: CsrMatrix::from_triplets(free.len(), &triplets), rhs, free, lifted })
}

pub fn solve(system: &LinearSystem, tol: f64, max_iter: usize) -> Result<P1Solution> {
    solve_from(system, None, tol, max_iter)
}

/// Like [`solve`] with an optional full-length initial guess.
pub fn solve_from(system: &LinearSystem, guess: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<P1Solution> {
    let x0: Option<Vec<f64>> = guess.map(|g| system.free.iter().map(|&v| g[v]).collect());
    let out = pcg(&system.matrix, &system.rhs, x0.as_deref(), tol, max_iter)?;
    let mut values = system.lifted.clone();
    for (&v, x) in system.free.iter().zip(&out.solution) {
        values[v] = *x;
    }
    Ok(P1Solution { values, iterations: out.iterations })
}

/// Constant gradient of a P1 function on every triangle.
pub fn gradients(mesh: &Mesh, values: &[f64]) -> Vec<Vector2<f64>> {
    (0..mesh.num_triangles())
        .map(|t| {
            let g = barycentric_gradients(&mesh.corners(t), mesh.area(t));
            let v = mesh.triangle(t).vertices;
            g[0] * values[v[0]] + g[1] * values[v[1]] + g[2] * values[v[2]]
        })
        .collect()
}

/// Elementwise constant numerical flux `-A grad u_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericalFlux {
    pub per_triangle: Vec<Vector2<f64>>,
}

impl NumericalFlux {
    /// Normal traces `(sigma_F^-, sigma_F^+)` against the global edge normal.
    pub fn traces(&self, mesh: &Mesh, e: usize) -> (f64, Option<f64>) {
        let edge = mesh.edge(e);
        let n = edge.normal;
        (self.per_triangle[edge.minus].dot(&n), edge.plus.map(|p| self.per_triangle[p].dot(&n)))
    }

    /// Normal trace of triangle `t` on edge `e`, against the global normal.
    pub fn trace_on(&self, mesh: &Mesh, t: usize, e: usize) -> f64 {
        self.per_triangle[t].dot(&mesh.edge(e).normal)
    }

    /// `max_K |sigma_K|`, a scale for relative comparisons.
    pub fn max_norm(&self) -> f64 {
        self.per_triangle.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    /// `||A^{-1/2} sigma||` over the domain.
    pub fn weighted_norm(&self, mesh: &Mesh, coef: &CoefficientField) -> f64 {
        self.per_triangle
            .iter()
            .enumerate()
            .map(|(t, s)| mesh.area(t) * quad_form(coef.inverse(t), s))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn numerical_flux(mesh: &Mesh, solution: &P1Solution, coef: &CoefficientField) -> NumericalFlux {
    let per_triangle =
        gradients(mesh, &solution.values).into_iter().enumerate().map(|(t, g)| -(coef.tensor(t) * g)).collect();
    NumericalFlux { per_triangle }
}

/// `f(v) - (A grad u_h, grad v)` for every vertex hat function.
pub fn galerkin_residual(
    mesh: &Mesh,
    coef: &CoefficientField,
    source: &dyn Fn(Point) -> f64,
    boundary: &BoundaryData,
    solution: &P1Solution,
) -> Vec<f64> {
    let k = assemble_stiffness(mesh, coef);
    let au = k.mul_vec(&solution.values);
    assemble_load(mesh, source, boundary).iter().zip(au).map(|(f, a)| f - a).collect()
}

/// Sub-triangles fanning out from `p` to the edges of `c` that do not contain it.
fn split_at(c: &[Point; 3], p: Point) -> Vec<[Point; 3]> {
    let scale = (c[1] - c[0]).norm_squared().max((c[2] - c[0]).norm_squared());
    (0..3).map(|i| [p, c[(i + 1) % 3], c[(i + 2) % 3]]).filter(|s| triangle_area(s) > 1e-14 * scale).collect()
}

fn contains(c: &[Point; 3], p: Point) -> bool {
    let l = crate::geometry::barycentric_coordinates(c, p);
    l.iter().all(|&v| v >= -1e-12)
}

/// Squared energy error `||A^{1/2} grad(u - u_h)||_K^2` on every triangle.
///
/// Triangles containing a registered singular point are split at the point and
/// integrated with a rule graded geometrically toward it.
pub fn energy_error_squared(
    mesh: &Mesh,
    solution: &P1Solution,
    exact_gradient: &dyn Fn(Point) -> Vector2<f64>,
    coef: &CoefficientField,
    singular_points: &[Point],
    quad_order: usize,
) -> Result<Vec<f64>> {
    let rule = TriangleRule::with_degree(quad_order)?;
    let grads = gradients(mesh, &solution.values);
    let mut out = Vec::with_capacity(mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let c = mesh.corners(t);
        let a = coef.tensor(t);
        let gh = grads[t];
        let integrand = |x: Point, _: [f64; 3]| quad_form(a, &(exact_gradient(x) - gh));
        let mut pieces = Vec::new();
        if let Some(&p) = singular_points.iter().find(|&&p| contains(&c, p)) {
            for sub in split_at(&c, p) {
                pieces.extend(graded_pieces(&sub, 0, SINGULAR_LEVELS, SINGULAR_RATIO));
            }
        }
        let e2 = if pieces.is_empty() {
            rule.integrate(&c, mesh.area(t), integrand)
        } else {
            pieces.iter().map(|s| rule.integrate(s, triangle_area(s), integrand)).sum()
        };
        out.push(e2);
    }
    Ok(out)
}

pub fn energy_error(
    mesh: &Mesh,
    solution: &P1Solution,
    exact_gradient: &dyn Fn(Point) -> Vector2<f64>,
    coef: &CoefficientField,
    singular_points: &[Point],
    quad_order: usize,
) -> Result<f64> {
    let e2 = energy_error_squared(mesh, solution, exact_gradient, coef, singular_points, quad_order)?;
    Ok(e2.iter().sum::<f64>().sqrt())
}

/// Levels of geometric grading of an edge integral toward a singular endpoint.
const EDGE_GRADING_LEVELS: usize = 60;

/// `int_F u ds` with 8-point Gauss-Legendre, graded toward singular endpoints.
fn edge_integral(a: Point, b: Point, u: &dyn Fn(Point) -> f64, singular_points: &[Point]) -> f64 {
    let (x, w) = gauss_legendre(8);
    let len = (b - a).norm();
    let segment = |p: Point, q: Point| -> f64 {
        let l = (q - p).norm();
        x.iter().zip(&w).map(|(s, w)| w * l * u(p + (q - p) * *s)).sum()
    };
    let at = |p: Point| singular_points.iter().any(|s| (p - s).norm() <= 1e-14 * len);
    match (at(a), at(b)) {
        (false, false) => segment(a, b),
        (true, true) => segment(a, b),
        (sa, _) => {
            let (p, q) = if sa { (a, b) } else { (b, a) };
            let mut total = 0.0;
            let mut far = q;
            for _ in 0..EDGE_GRADING_LEVELS {
                let near = p + (far - p) * 0.5;
                total += segment(near, far);
                far = near;
            }
            total + segment(p, far)
        }
    }
}

/// Squared energy error from the exact energy norm,
/// `||u||_E^2 - 2 a(u, u_h) + a(u_h, u_h)`, where `a(u, u_h)` only needs
/// `int_K grad u = int_{dK} u n`. Suited to solutions with corner singularities
/// that defeat volume quadrature; loses relative accuracy when the error is tiny.
pub fn energy_error_by_boundary(
    mesh: &Mesh,
    solution: &P1Solution,
    exact_value: &dyn Fn(Point) -> f64,
    energy_norm: f64,
    coef: &CoefficientField,
    singular_points: &[Point],
) -> f64 {
    let edge_int: Vec<f64> = mesh
        .edges()
        .iter()
        .map(|e| edge_integral(mesh.vertex(e.start), mesh.vertex(e.end), exact_value, singular_points))
        .collect();
    let grads = gradients(mesh, &solution.values);
    let mut cross = 0.0;
    let mut discrete = 0.0;
    for (t, g) in grads.iter().enumerate() {
        let ag = coef.tensor(t) * g;
        let mean_grad = mesh
            .triangle_edges(t)
            .iter()
            .fold(Vector2::zeros(), |acc, &e| acc + mesh.edge(e).normal * (mesh.edge_sign(t, e) * edge_int[e]));
        cross += ag.dot(&mean_grad);
        discrete += mesh.area(t) * ag.dot(g);
    }
    (energy_norm * energy_norm - 2.0 * cross + discrete).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundaryKind;

    fn reference(kind: BoundaryKind) -> Mesh {
        Mesh::new(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)],
            vec![([0, 1, 2], 0)],
            vec![(0, 1, kind), (1, 2, kind), (2, 0, kind)],
        )
        .unwrap()
    }

    fn grid(n: usize) -> Mesh {
        let h = 1.0 / n as f64;
        let mut v = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                v.push(Point::new(i as f64 * h, j as f64 * h));
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut t = Vec::new();
        for j in 0..n {
            for i in 0..n {
                t.push(([id(i, j), id(i + 1, j), id(i + 1, j + 1)], 0));
                t.push(([id(i, j), id(i + 1, j + 1), id(i, j + 1)], 0));
            }
        }
        let mut b = Vec::new();
        for i in 0..n {
            b.push((id(i, 0), id(i + 1, 0), BoundaryKind::Dirichlet));
            b.push((id(n, i), id(n, i + 1), BoundaryKind::Dirichlet));
            b.push((id(i, n), id(i + 1, n), BoundaryKind::Neumann));
            b.push((id(0, i), id(0, i + 1), BoundaryKind::Dirichlet));
        }
        Mesh::new(v, t, b).unwrap()
    }

    #[test]
    fn reference_stiffness_right_angle_entry() {
        let m = reference(BoundaryKind::Dirichlet);
        let coef = CoefficientField::constant(&m, Matrix2::identity()).unwrap();
        let k = local_stiffness(&m, &coef, 0);
        assert!((k[0][0] - 1.0).abs() < 1e-15);
        // u = x: (grad u, grad u)_K = |K|.
        let u = [0.0, 1.0, 0.0];
        let e: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| u[i] * k[i][j] * u[j]).sum();
        assert!((e - 0.5).abs() < 1e-15);
    }

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let m = grid(4);
        let a = Matrix2::new(2.0, 0.3, 0.3, 1.0);
        let k = assemble_stiffness(&m, &CoefficientField::constant(&m, a).unwrap());
        assert!(k.is_symmetric(1e-14));
        for i in 0..k.dim() {
            assert!(k.row(i).map(|(_, v)| v).sum::<f64>().abs() < 1e-13);
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let m = grid(3);
        let coef = CoefficientField::constant(&m, Matrix2::identity()).unwrap();
        let sys = assemble(&m, &coef, &|_| 0.0, &BoundaryData::homogeneous()).unwrap();
        let sol = solve(&sys, 1e-12, 100).unwrap();
        assert!(sol.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn no_dirichlet_is_singular() {
        let m = reference(BoundaryKind::Neumann);
        let coef = CoefficientField::constant(&m, Matrix2::identity()).unwrap();
        assert!(matches!(assemble(&m, &coef, &|_| 0.0, &BoundaryData::homogeneous()), Err(Error::NoDirichlet)));
    }

    #[test]
    fn rejects_non_spd_coefficient() {
        let m = reference(BoundaryKind::Dirichlet);
        assert!(matches!(CoefficientField::constant(&m, Matrix2::new(1.0, 2.0, 2.0, 1.0)), Err(Error::NotSpd(0))));
        assert!(matches!(CoefficientField::constant(&m, Matrix2::new(1.0, 0.1, 0.0, 1.0)), Err(Error::NotSpd(0))));
    }

    #[test]
    fn affine_patch_test_with_neumann() {
        // u = 1 + 2x - 3y, A anisotropic; top edge is Neumann with g_N = -A grad u . (0, 1).
        let m = grid(5);
        let a = Matrix2::new(3.0, 0.5, 0.5, 2.0);
        let coef = CoefficientField::constant(&m, a).unwrap();
        let grad = Vector2::new(2.0, -3.0);
        let flux = -(a * grad);
        let bd = BoundaryData {
            dirichlet: Arc::new(|p| 1.0 + 2.0 * p.x - 3.0 * p.y),
            neumann: Arc::new(move |_| flux.dot(&Vector2::new(0.0, 1.0))),
        };
        let sys = assemble(&m, &coef, &|_| 0.0, &bd).unwrap();
        let sol = solve(&sys, 1e-14, 500).unwrap();
        for (v, p) in m.vertices().iter().enumerate() {
            assert!((sol.values[v] - (1.0 + 2.0 * p.x - 3.0 * p.y)).abs() < 1e-12);
        }
        let err = energy_error(&m, &sol, &|_| grad, &coef, &[], 4).unwrap();
        assert!(err < 1e-10);
        let r = galerkin_residual(&m, &coef, &|_| 0.0, &bd, &sol);
        for &v in &sys.free {
            assert!(r[v].abs() < 1e-12);
        }
    }

    #[test]
    fn flux_is_constant_shift_invariant_and_matches_gradient() {
        let m = grid(2);
        let coef = CoefficientField::constant(&m, Matrix2::identity()).unwrap();
        let values: Vec<f64> = m.vertices().iter().map(|p| p.x + p.y).collect();
        let sol = P1Solution { values: values.clone(), iterations: 0 };
        let flux = numerical_flux(&m, &sol, &coef);
        for s in &flux.per_triangle {
            assert!((s - Vector2::new(-1.0, -1.0)).norm() < 1e-14);
        }
        let shifted = P1Solution { values: values.iter().map(|v| v + 7.0).collect(), iterations: 0 };
        let flux2 = numerical_flux(&m, &shifted, &coef);
        for (a, b) in flux.per_triangle.iter().zip(&flux2.per_triangle) {
            assert!((a - b).norm() < 1e-13);
        }
        let zero = P1Solution { values: vec![3.0; m.num_vertices()], iterations: 0 };
        assert!(numerical_flux(&m, &zero, &coef).max_norm() < 1e-14);
    }

    #[test]
    fn hat_function_energy() {
        // Error equal to the hat function of the right-angle vertex: |grad|^2 |K| = 1.
        let m = reference(BoundaryKind::Dirichlet);
        let coef = CoefficientField::constant(&m, Matrix2::identity()).unwrap();
        let sol = P1Solution { values: vec![0.0; 3], iterations: 0 };
        let e = energy_error(&m, &sol, &|_| Vector2::new(-1.0, -1.0), &coef, &[], 2).unwrap();
        assert!((e * e - 1.0).abs() < 1e-14);
        assert!(matches!(
            energy_error(&m, &sol, &|_| Vector2::zeros(), &coef, &[], 0),
            Err(Error::UnsupportedQuadOrder(0))
        ));
    }

    #[test]
    fn boundary_form_matches_volume_quadrature() {
        let m = grid(6);
        let coef = CoefficientField::constant(&m, Matrix2::new(2.0, 0.5, 0.5, 1.0)).unwrap();
        let u = |p: Point| p.x * p.x + p.y;
        let grad = |p: Point| Vector2::new(2.0 * p.x, 1.0);
        let sol = P1Solution { values: m.vertices().iter().map(|&p| u(p) + 0.1 * p.x * p.y).collect(), iterations: 0 };
        let zero = P1Solution { values: vec![0.0; m.num_vertices()], iterations: 0 };
        let norm = energy_error(&m, &zero, &grad, &coef, &[], 4).unwrap();
        // a(u, u) = int 2 (2x)^2 + 2 (2x) 0.5 + 1 = 8/3 + 1 + 1.
        assert!((norm * norm - 14.0 / 3.0).abs() < 1e-13);
        let volume = energy_error(&m, &sol, &grad, &coef, &[], 4).unwrap();
        let boundary = energy_error_by_boundary(&m, &sol, &u, norm, &coef, &[Point::new(0.0, 0.0)]);
        assert!((volume - boundary).abs() < 1e-10 * norm, "{volume} vs {boundary}");
    }
}
