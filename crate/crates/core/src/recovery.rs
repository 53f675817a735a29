//! H(div) flux recovery in the lowest-order Raviart-Thomas and Brezzi-Douglas-Marini spaces.
//!
//! On a triangle the edge basis functions are
//!
//! ```text
//! psi_{s,F} =  lambda_s rot(grad lambda_e)
//! psi_{e,F} = -lambda_e rot(grad lambda_s)
//! phi_F     =  psi_{s,F} + psi_{e,F}
//! ```
//!
//! with `rot(a, b) = (-b, a)`, which gives `int_F phi_F . n_F = 1` for the edge
//! orientation of [`crate::mesh`]. A recovered field stores two unscaled normal
//! dofs per edge; the field is `sum_F |F| (dof_s psi_{s,F} + dof_e psi_{e,F})`,
//! so an RT field simply has equal dofs.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::fem::{CoefficientField, NumericalFlux};
use crate::geometry::{barycentric_coordinates, barycentric_gradients, bilinear, quad_form, rot};
use crate::mesh::{Edge, EdgeKind, Mesh, Point};
use crate::quadrature::TriangleRule;
use crate::sparse::{pcg, CsrMatrix};

/// Lower bound on the determinant of the local 2x2 BDM system.
pub const BDM_DETERMINANT_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    Rt,
    Bdm,
}

impl Space {
    pub fn name(self) -> &'static str {
        match self {
            Space::Rt => "rt",
            Space::Bdm => "bdm",
        }
    }
}

/// Barycentric data of one triangle for evaluating edge basis functions.
#[derive(Debug, Clone)]
pub struct ElementBasis {
    pub corners: [Point; 3],
    pub vertices: [usize; 3],
    pub area: f64,
    pub grads: [Vector2<f64>; 3],
}

impl ElementBasis {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        let corners = mesh.corners(t);
        let area = mesh.area(t);
        ElementBasis {
            corners,
            vertices: mesh.triangle(t).vertices,
            area,
            grads: barycentric_gradients(&corners, area),
        }
    }

    fn local(&self, v: usize) -> usize {
        self.vertices.iter().position(|&w| w == v).expect("vertex belongs to triangle")
    }

    /// `(psi_s, psi_e)` of `edge` at barycentric point `l`.
    pub fn bdm(&self, edge: &Edge, l: &[f64; 3]) -> (Vector2<f64>, Vector2<f64>) {
        let s = self.local(edge.start);
        let e = self.local(edge.end);
        (rot(self.grads[e]) * l[s], -rot(self.grads[s]) * l[e])
    }

    pub fn rt(&self, edge: &Edge, l: &[f64; 3]) -> Vector2<f64> {
        let (ps, pe) = self.bdm(edge, l);
        ps + pe
    }

    pub fn point(&self, l: &[f64; 3]) -> Point {
        self.corners[0] * l[0] + self.corners[1] * l[1] + self.corners[2] * l[2]
    }
}

/// Entries `(A^{-1} psi_i, psi_j)_K` for `i, j` in `{s, e}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta {
    pub ss: f64,
    pub se: f64,
    pub ee: f64,
}

impl Beta {
    fn add(self, o: Beta) -> Beta {
        Beta { ss: self.ss + o.ss, se: self.se + o.se, ee: self.ee + o.ee }
    }

    /// `v^T B v` for `v = (vs, ve)`.
    pub fn form(&self, vs: f64, ve: f64) -> f64 {
        self.ss * vs * vs + 2.0 * self.se * vs * ve + self.ee * ve * ve
    }

    pub fn determinant(&self) -> f64 {
        self.ss * self.ee - self.se * self.se
    }
}

/// `(A^{-1} phi_F, phi_F)_K` on the triangle `t` adjacent to `e`, closed form.
pub fn gamma_on(mesh: &Mesh, coef: &CoefficientField, e: usize, t: usize) -> f64 {
    let inv = coef.inverse(t);
    let x = mesh.vertex(opposite(mesh.edge(e), t));
    let c = mesh.corners(t);
    let sum = c[0] + c[1] + c[2];
    let spread: f64 = c.iter().map(|p| quad_form(inv, &(p - x))).sum();
    (spread + quad_form(inv, &(sum - x * 3.0))) / (48.0 * mesh.area(t))
}

fn opposite(edge: &Edge, t: usize) -> usize {
    if edge.minus == t {
        edge.opposite_minus
    } else {
        debug_assert_eq!(edge.plus, Some(t));
        edge.opposite_plus.expect("triangle is adjacent to the edge")
    }
}

/// `(gamma_F^-, gamma_F^+)`; the second entry is absent on boundary edges.
pub fn gamma_coeffs(mesh: &Mesh, coef: &CoefficientField, e: usize) -> (f64, Option<f64>) {
    let edge = mesh.edge(e);
    (gamma_on(mesh, coef, e, edge.minus), edge.plus.map(|p| gamma_on(mesh, coef, e, p)))
}

/// `beta_{ij,F}` on the triangle `t` adjacent to `e`, closed form.
pub fn beta_on(mesh: &Mesh, coef: &CoefficientField, e: usize, t: usize) -> Beta {
    let edge = mesh.edge(e);
    let inv = coef.inverse(t);
    let x = mesh.vertex(opposite(edge, t));
    let ds = x - mesh.vertex(edge.start);
    let de = x - mesh.vertex(edge.end);
    let area = mesh.area(t);
    Beta {
        ss: quad_form(inv, &ds) / (24.0 * area),
        se: bilinear(&ds, inv, &de) / (48.0 * area),
        ee: quad_form(inv, &de) / (24.0 * area),
    }
}

pub fn beta_coeffs(mesh: &Mesh, coef: &CoefficientField, e: usize) -> (Beta, Option<Beta>) {
    let edge = mesh.edge(e);
    (beta_on(mesh, coef, e, edge.minus), edge.plus.map(|p| beta_on(mesh, coef, e, p)))
}

/// Quadrature evaluation of `gamma_F` on triangle `t` from the basis definition.
pub fn gamma_quadrature(mesh: &Mesh, coef: &CoefficientField, e: usize, t: usize) -> f64 {
    let basis = ElementBasis::new(mesh, t);
    let edge = mesh.edge(e);
    let inv = coef.inverse(t);
    TriangleRule::degree4().integrate(&basis.corners, basis.area, |_, l| quad_form(inv, &basis.rt(edge, &l)))
}

/// Quadrature evaluation of `beta_{ij,F}` on triangle `t` from the basis definition.
pub fn beta_quadrature(mesh: &Mesh, coef: &CoefficientField, e: usize, t: usize) -> Beta {
    let basis = ElementBasis::new(mesh, t);
    let edge = mesh.edge(e);
    let inv = coef.inverse(t);
    let rule = TriangleRule::degree4();
    let [ss, se, ee] = rule
        .integrate(&basis.corners, basis.area, |_, l| {
            let (ps, pe) = basis.bdm(edge, &l);
            nalgebra::Vector3::new(quad_form(inv, &ps), bilinear(&ps, inv, &pe), quad_form(inv, &pe))
        })
        .into();
    Beta { ss, se, ee }
}

/// RT weight `a_F = gamma^- / (gamma^- + gamma^+)` of an interior edge.
pub fn rt_weight(mesh: &Mesh, coef: &CoefficientField, e: usize) -> Result<f64> {
    match gamma_coeffs(mesh, coef, e) {
        (gm, Some(gp)) => Ok(gm / (gm + gp)),
        _ => Err(Error::NotInterior(e)),
    }
}

/// BDM weights `(b_s, b_e)` of an interior edge.
pub fn bdm_weights(mesh: &Mesh, coef: &CoefficientField, e: usize) -> Result<(f64, f64)> {
    let (bm, bp) = match beta_coeffs(mesh, coef, e) {
        (bm, Some(bp)) => (bm, bp),
        _ => return Err(Error::NotInterior(e)),
    };
    let b = bm.add(bp);
    let det = b.determinant();
    if det.abs() <= BDM_DETERMINANT_FLOOR {
        return Err(Error::SingularGram(e));
    }
    let bs = ((bm.ss + bm.se) * b.ee - (bm.se + bm.ee) * b.se) / det;
    let be = ((bm.se + bm.ee) * b.ss - (bm.ss + bm.se) * b.se) / det;
    Ok((bs, be))
}

/// Recovered H(div) field given by normal dofs on every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredFlux {
    pub space: Space,
    /// `[dof_s, dof_e]` per edge; equal entries for RT and on boundary edges.
    pub dofs: Vec<[f64; 2]>,
}

impl RecoveredFlux {
    pub fn zeros(space: Space, mesh: &Mesh) -> Self {
        RecoveredFlux { space, dofs: vec![[0.0; 2]; mesh.num_edges()] }
    }

    /// Field value at barycentric point `l` of triangle `t`.
    pub fn eval_barycentric(&self, mesh: &Mesh, basis: &ElementBasis, t: usize, l: &[f64; 3]) -> Vector2<f64> {
        mesh.triangle_edges(t).iter().fold(Vector2::zeros(), |acc, &e| {
            let edge = mesh.edge(e);
            let (ps, pe) = basis.bdm(edge, l);
            let [ds, de] = self.dofs[e];
            acc + (ps * ds + pe * de) * edge.length
        })
    }
}

/// Evaluates the recovered field at a point of triangle `t`.
pub fn eval_flux(mesh: &Mesh, flux: &RecoveredFlux, t: usize, x: Point) -> Result<Vector2<f64>> {
    if t >= mesh.num_triangles() {
        return Err(Error::InvalidTriangle(t));
    }
    let basis = ElementBasis::new(mesh, t);
    let l = barycentric_coordinates(&basis.corners, x);
    if l.iter().any(|&v| v < -1e-12) {
        return Err(Error::PointOutside(x.x, x.y, t));
    }
    Ok(flux.eval_barycentric(mesh, &basis, t, &l))
}

fn boundary_dof(edge: &Edge, minus_trace: f64, g_n: f64) -> f64 {
    match edge.kind {
        EdgeKind::Neumann => g_n,
        _ => minus_trace,
    }
}

/// Explicit RT recovery: weighted average of the two normal traces on interior edges.
pub fn rt_recover(mesh: &Mesh, coef: &CoefficientField, flux: &NumericalFlux, g_n: &[f64]) -> RecoveredFlux {
    let dofs = (0..mesh.num_edges())
        .map(|e| {
            let edge = mesh.edge(e);
            let v = match flux.traces(mesh, e) {
                (m, Some(p)) => {
                    let a = rt_weight(mesh, coef, e).expect("interior edge");
                    a * m + (1.0 - a) * p
                }
                (m, None) => boundary_dof(edge, m, g_n[e]),
            };
            [v, v]
        })
        .collect();
    RecoveredFlux { space: Space::Rt, dofs }
}

/// Explicit BDM recovery with the two weights `b_s`, `b_e` per interior edge.
pub fn bdm_recover(mesh: &Mesh, coef: &CoefficientField, flux: &NumericalFlux, g_n: &[f64]) -> Result<RecoveredFlux> {
    let mut dofs = Vec::with_capacity(mesh.num_edges());
    for e in 0..mesh.num_edges() {
        let edge = mesh.edge(e);
        dofs.push(match flux.traces(mesh, e) {
            (m, Some(p)) => {
                let (bs, be) = bdm_weights(mesh, coef, e)?;
                [bs * m + (1.0 - bs) * p, be * m + (1.0 - be) * p]
            }
            (m, None) => {
                let v = boundary_dof(edge, m, g_n[e]);
                [v, v]
            }
        });
    }
    Ok(RecoveredFlux { space: Space::Bdm, dofs })
}

pub fn recover(
    space: Space,
    mesh: &Mesh,
    coef: &CoefficientField,
    flux: &NumericalFlux,
    g_n: &[f64],
) -> Result<RecoveredFlux> {
    match space {
        Space::Rt => Ok(rt_recover(mesh, coef, flux, g_n)),
        Space::Bdm => bdm_recover(mesh, coef, flux, g_n),
    }
}

/// Quadrature-assembled local Gram matrix and right-hand side of the edge problem
/// `(A^{-1} sigma_F, tau)_{omega_F} = (A^{-1} tilde sigma_F, tau)_{omega_F}` in BDM_F.
fn local_bdm_system(
    mesh: &Mesh,
    coef: &CoefficientField,
    flux: &NumericalFlux,
    e: usize,
) -> (Matrix2<f64>, Vector2<f64>) {
    let edge = mesh.edge(e);
    let rule = TriangleRule::degree4();
    let mut gram = Matrix2::zeros();
    let mut rhs = Vector2::zeros();
    for t in mesh.edge_patch(e).expect("valid edge") {
        let basis = ElementBasis::new(mesh, t);
        let inv = coef.inverse(t);
        let trace = flux.trace_on(mesh, t, e);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let (ps, pe) = basis.bdm(edge, l);
            let (ps, pe) = (ps * edge.length, pe * edge.length);
            let piece = (ps + pe) * trace;
            let wa = w * basis.area;
            gram[(0, 0)] += wa * quad_form(inv, &ps);
            gram[(0, 1)] += wa * bilinear(&ps, inv, &pe);
            gram[(1, 1)] += wa * quad_form(inv, &pe);
            rhs[0] += wa * bilinear(&piece, inv, &ps);
            rhs[1] += wa * bilinear(&piece, inv, &pe);
        }
    }
    gram[(1, 0)] = gram[(0, 1)];
    (gram, rhs)
}

/// Galerkin solve of the one-unknown RT edge problem; independent of [`rt_weight`].
pub fn local_rt_solve(mesh: &Mesh, coef: &CoefficientField, flux: &NumericalFlux, e: usize) -> Result<f64> {
    if !mesh.edge(e).is_interior() {
        return Err(Error::NotInterior(e));
    }
    let (g, r) = local_bdm_system(mesh, coef, flux, e);
    // phi_F = psi_s + psi_e.
    Ok((r[0] + r[1]) / (g[(0, 0)] + 2.0 * g[(0, 1)] + g[(1, 1)]))
}

/// Galerkin solve of the two-unknown BDM edge problem; independent of [`bdm_weights`].
pub fn local_bdm_solve(mesh: &Mesh, coef: &CoefficientField, flux: &NumericalFlux, e: usize) -> Result<[f64; 2]> {
    if !mesh.edge(e).is_interior() {
        return Err(Error::NotInterior(e));
    }
    let (g, r) = local_bdm_system(mesh, coef, flux, e);
    let x = g.try_inverse().ok_or(Error::SingularGram(e))? * r;
    Ok([x[0], x[1]])
}

/// `||A^{-1/2}(tau - tilde sigma)||^2_K` on every triangle, by quadrature.
pub fn misfit_squared(mesh: &Mesh, coef: &CoefficientField, flux: &NumericalFlux, field: &RecoveredFlux) -> Vec<f64> {
    let rule = TriangleRule::degree4();
    (0..mesh.num_triangles())
        .map(|t| {
            let basis = ElementBasis::new(mesh, t);
            let inv = coef.inverse(t);
            let s = flux.per_triangle[t];
            rule.integrate(&basis.corners, basis.area, |_, l| {
                quad_form(inv, &(field.eval_barycentric(mesh, &basis, t, &l) - s))
            })
        })
        .collect()
}

/// Unknown numbering for the global minimisation: Neumann edges are fixed.
fn global_numbering(mesh: &Mesh, space: Space) -> (Vec<[Option<usize>; 2]>, usize) {
    let mut next = 0;
    let map = mesh
        .edges()
        .iter()
        .map(|edge| {
            if edge.kind == EdgeKind::Neumann {
                return [None, None];
            }
            match space {
                Space::Rt => {
                    next += 1;
                    [Some(next - 1), Some(next - 1)]
                }
                Space::Bdm => {
                    next += 2;
                    [Some(next - 2), Some(next - 1)]
                }
            }
        })
        .collect();
    (map, next)
}

/// Implicit recovery: global weighted L2 projection of the numerical flux onto
/// `RT_{g,N}` or `BDM_{g,N}`, solved by conjugate gradients.
pub fn global_recover(
    mesh: &Mesh,
    coef: &CoefficientField,
    flux: &NumericalFlux,
    g_n: &[f64],
    space: Space,
    tol: f64,
    max_iter: usize,
) -> Result<RecoveredFlux> {
    let (map, n) = global_numbering(mesh, space);
    let rule = TriangleRule::degree4();
    let mut triplets = Vec::with_capacity(mesh.num_triangles() * 36);
    let mut rhs = vec![0.0; n];

    for t in 0..mesh.num_triangles() {
        let basis = ElementBasis::new(mesh, t);
        let inv = coef.inverse(t);
        let sigma = flux.per_triangle[t];
        let edges = mesh.triangle_edges(t);
        // Six local functions: (edge k, component c) -> |F| psi_c.
        let mut gram = [[0.0; 6]; 6];
        let mut load = [0.0; 6];
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let wa = w * basis.area;
            let mut f = [Vector2::zeros(); 6];
            for (k, &e) in edges.iter().enumerate() {
                let edge = mesh.edge(e);
                let (ps, pe) = basis.bdm(edge, l);
                f[2 * k] = ps * edge.length;
                f[2 * k + 1] = pe * edge.length;
            }
            for i in 0..6 {
                load[i] += wa * bilinear(&sigma, inv, &f[i]);
                for j in 0..6 {
                    gram[i][j] += wa * bilinear(&f[i], inv, &f[j]);
                }
            }
        }
        let index = |i: usize| map[edges[i / 2]][i % 2];
        let fixed = |i: usize| g_n[edges[i / 2]];
        for i in 0..6 {
            let Some(gi) = index(i) else { continue };
            rhs[gi] += load[i];
            for j in 0..6 {
                match index(j) {
                    Some(gj) => triplets.push((gi, gj, gram[i][j])),
                    None => rhs[gi] -= gram[i][j] * fixed(j),
                }
            }
        }
    }

    let matrix = CsrMatrix::from_triplets(n, &triplets);
    let x = pcg(&matrix, &rhs, None, tol, max_iter)?.solution;
    let dofs = mesh
        .edges()
        .iter()
        .enumerate()
        .map(|(e, _)| match map[e] {
            [Some(i), Some(j)] => [x[i], x[j]],
            _ => [g_n[e], g_n[e]],
        })
        .collect();
    Ok(RecoveredFlux { space, dofs })
}
