//! Error indicators: classic and flux-weighted ZZ, improved edge and element
//! indicators for the RT and BDM recoveries, the residual edge indicator and
//! the data oscillation term.

use std::fmt;
use std::str::FromStr;

use nalgebra::{SMatrix, SVector, Vector2};
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::fem::{gradients, CoefficientField, NumericalFlux, P1Solution};
use crate::geometry::{bilinear, quad_form};
use crate::mesh::{EdgeKind, Mesh, Point};
use crate::quadrature::TriangleRule;
use crate::recovery::{bdm_weights, beta_coeffs, gamma_coeffs, recover, rt_weight, ElementBasis, RecoveredFlux, Space};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    ZzGradient,
    ZzFlux,
    RtEdge,
    RtElement,
    BdmEdge,
    BdmElement,
    Residual,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 7] = [
        EstimatorKind::ZzGradient,
        EstimatorKind::ZzFlux,
        EstimatorKind::RtEdge,
        EstimatorKind::RtElement,
        EstimatorKind::BdmEdge,
        EstimatorKind::BdmElement,
        EstimatorKind::Residual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::ZzGradient => "zz-gradient",
            EstimatorKind::ZzFlux => "zz-flux",
            EstimatorKind::RtEdge => "rt-edge",
            EstimatorKind::RtElement => "rt-element",
            EstimatorKind::BdmEdge => "bdm-edge",
            EstimatorKind::BdmElement => "bdm-element",
            EstimatorKind::Residual => "residual",
        }
    }

    pub fn space(self) -> Option<Space> {
        match self {
            EstimatorKind::RtEdge | EstimatorKind::RtElement => Some(Space::Rt),
            EstimatorKind::BdmEdge | EstimatorKind::BdmElement => Some(Space::Bdm),
            _ => None,
        }
    }

    pub fn is_edge_based(self) -> bool {
        matches!(self, EstimatorKind::RtEdge | EstimatorKind::BdmEdge | EstimatorKind::Residual)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown estimator `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZzMode {
    Gradient,
    FluxWeighted,
}

/// Evaluation route for element indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    Quadrature,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed-form" => Ok(Method::ClosedForm),
            "quadrature" => Ok(Method::Quadrature),
            _ => Err(Error::InvalidConfig(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSet {
    pub kind: EstimatorKind,
    /// Per-edge values; empty for the ZZ kinds.
    pub edge: Vec<f64>,
    /// Per-element values.
    pub element: Vec<f64>,
    /// `(sum_K xi_K^2)^(1/2)`.
    pub xi: f64,
    /// `sum_F xi_F`.
    pub xi_hat: f64,
    /// `(sum_F xi_F^2)^(1/2)`.
    pub xi_hat2: f64,
    /// `(sum_F eta_F^2)^(1/2)`.
    pub eta: f64,
    pub osc: f64,
}

impl IndicatorSet {
    /// Global value reported for this kind.
    pub fn estimate(&self) -> f64 {
        match self.kind {
            EstimatorKind::RtEdge | EstimatorKind::BdmEdge => self.xi_hat2,
            EstimatorKind::Residual => self.eta,
            _ => self.xi,
        }
    }

    /// Element values used for marking; edge kinds map `xi_K = (sum_{F in K} xi_F^2)^(1/2)`.
    pub fn marking_values(&self, mesh: &Mesh) -> Vec<f64> {
        if self.kind.is_edge_based() {
            edge_to_element(mesh, &self.edge)
        } else {
            self.element.clone()
        }
    }
}

pub fn edge_to_element(mesh: &Mesh, edge: &[f64]) -> Vec<f64> {
    (0..mesh.num_triangles())
        .map(|t| mesh.triangle_edges(t).iter().map(|&e| edge[e] * edge[e]).sum::<f64>().sqrt())
        .collect()
}

fn l2(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Measure-weighted averages `sum_{i in P} m_i v_i / sum_{i in P} m_i` over each patch `P`.
pub fn patch_average<S, V>(patches: &[Vec<usize>], measures: &[S], values: &[V]) -> Vec<V>
where
    S: Copy + Zero + One + std::ops::Div<Output = S>,
    V: Copy + Zero + std::ops::Mul<S, Output = V>,
{
    patches
        .iter()
        .map(|patch| {
            let total = patch.iter().fold(S::zero(), |acc, &i| acc + measures[i]);
            let sum = patch.iter().fold(V::zero(), |acc, &i| acc + values[i] * measures[i]);
            sum * (S::one() / total)
        })
        .collect()
}

/// Nodal values of the ZZ recovered field.
#[derive(Debug, Clone, PartialEq)]
pub struct ZzRecoveredGradient {
    pub nodal: Vec<Vector2<f64>>,
}

pub fn zz_recover(mesh: &Mesh, field: &[Vector2<f64>]) -> ZzRecoveredGradient {
    ZzRecoveredGradient { nodal: patch_average(&mesh.vertex_patches(), mesh.areas(), field) }
}

/// `||sum_i lambda_i d_i||_K^2` for nodal differences `d_i`.
fn p1_vector_norm_squared(area: f64, d: &[Vector2<f64>; 3]) -> f64 {
    let sum = d[0] + d[1] + d[2];
    area / 12.0 * (d.iter().map(|v| v.norm_squared()).sum::<f64>() + sum.norm_squared())
}

pub fn zz_estimator(mesh: &Mesh, solution: &P1Solution, coef: &CoefficientField, mode: ZzMode) -> Result<IndicatorSet> {
    let grads = gradients(mesh, &solution.values);
    let (field, scale): (Vec<Vector2<f64>>, Vec<f64>) = match mode {
        ZzMode::Gradient => (grads, vec![1.0; mesh.num_triangles()]),
        ZzMode::FluxWeighted => {
            let mut field = Vec::with_capacity(grads.len());
            let mut scale = Vec::with_capacity(grads.len());
            for (t, g) in grads.iter().enumerate() {
                let alpha = coef.scalar(t).ok_or(Error::NonScalarCoefficient(coef.region(t)))?;
                field.push(g * alpha);
                scale.push(1.0 / alpha.sqrt());
            }
            (field, scale)
        }
    };
    let g = zz_recover(mesh, &field);
    let element: Vec<f64> = (0..mesh.num_triangles())
        .map(|t| {
            let v = mesh.triangle(t).vertices;
            let d = v.map(|z| g.nodal[z] - field[t]);
            scale[t] * p1_vector_norm_squared(mesh.area(t), &d).sqrt()
        })
        .collect();
    let kind = match mode {
        ZzMode::Gradient => EstimatorKind::ZzGradient,
        ZzMode::FluxWeighted => EstimatorKind::ZzFlux,
    };
    Ok(IndicatorSet {
        kind,
        xi: l2(&element),
        edge: Vec::new(),
        element,
        xi_hat: 0.0,
        xi_hat2: 0.0,
        eta: 0.0,
        osc: 0.0,
    })
}

/// Closed-form `xi_F^rt`.
pub fn edge_indicator_rt(mesh: &Mesh, coef: &CoefficientField, flux: &NumericalFlux, g_n: &[f64], e: usize) -> f64 {
    let edge = mesh.edge(e);
    let (gm, gp) = gamma_coeffs(mesh, coef, e);
    let (sm, sp) = flux.traces(mesh, e);
    match (edge.kind, gp, sp) {
        (EdgeKind::Dirichlet, ..) => 0.0,
        (EdgeKind::Neumann, ..) => (sm - g_n[e]).abs() * edge.length * gm.sqrt(),
        (EdgeKind::Interior, Some(gp), Some(sp)) => {
            let a = rt_weight(mesh, coef, e).expect("interior edge");
            (sm - sp).abs() * edge.length * ((1.0 - a).powi(2) * gm + a * a * gp).sqrt()
        }
        _ => unreachable!("interior edge has two neighbours"),
    }
}

/// Closed-form `xi_F^bdm`.
pub fn edge_indicator_bdm(
    mesh: &Mesh,
    coef: &CoefficientField,
    flux: &NumericalFlux,
    g_n: &[f64],
    e: usize,
) -> Result<f64> {
    let edge = mesh.edge(e);
    let (bm, bp) = beta_coeffs(mesh, coef, e);
    let (sm, sp) = flux.traces(mesh, e);
    Ok(match (edge.kind, bp, sp) {
        (EdgeKind::Dirichlet, ..) => 0.0,
        (EdgeKind::Neumann, ..) => (sm - g_n[e]).abs() * edge.length * bm.form(1.0, 1.0).sqrt(),
        (EdgeKind::Interior, Some(bp), Some(sp)) => {
            let (bs, be) = bdm_weights(mesh, coef, e)?;
            let w = bm.form(1.0 - bs, 1.0 - be) + bp.form(bs, be);
            (sm - sp).abs() * edge.length * w.max(0.0).sqrt()
        }
        _ => unreachable!("interior edge has two neighbours"),
    })
}

/// `||A^{-1/2}(hat sigma_F - tilde sigma_F)||_{omega_F}` by quadrature, using the
/// edge-`e` part of `field` and the elementwise traces of `flux`.
pub fn edge_misfit_quadrature(
    mesh: &Mesh,
    coef: &CoefficientField,
    flux: &NumericalFlux,
    field: &RecoveredFlux,
    e: usize,
) -> f64 {
    let edge = mesh.edge(e);
    let rule = TriangleRule::degree4();
    let [ds, de] = field.dofs[e];
    let mut total = 0.0;
    for t in mesh.edge_patch(e).expect("valid edge") {
        let basis = ElementBasis::new(mesh, t);
        let inv = coef.inverse(t);
        let tr = flux.trace_on(mesh, t, e);
        total += rule.integrate(&basis.corners, basis.area, |_, l| {
            let (ps, pe) = basis.bdm(edge, &l);
            quad_form(inv, &((ps * (ds - tr) + pe * (de - tr)) * edge.length))
        });
    }
    total.sqrt()
}

/// The three terms of `xi_K^2 = (A^{-1} s, s) + 2 (s, grad u) + (A grad u, grad u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementTerms {
    pub flux_flux: f64,
    pub flux_grad: f64,
    pub grad_grad: f64,
}

impl ElementTerms {
    pub fn total(&self) -> f64 {
        self.flux_flux + 2.0 * self.flux_grad + self.grad_grad
    }
}

/// Per-element data shared by the closed forms: local edge `i` is opposite local vertex `i`.
struct LocalEdges {
    ids: [usize; 3],
    sign: [f64; 3],
    len: [f64; 3],
    normal: [Vector2<f64>; 3],
    tangent: [Vector2<f64>; 3],
}

impl LocalEdges {
    fn new(mesh: &Mesh, t: usize) -> Self {
        let ids = mesh.triangle_edges(t);
        LocalEdges {
            ids,
            sign: ids.map(|e| mesh.edge_sign(t, e)),
            len: ids.map(|e| mesh.edge(e).length),
            normal: ids.map(|e| mesh.edge(e).normal),
            tangent: ids.map(|e| mesh.edge(e).tangent),
        }
    }
}

/// `(A^{-1} |F| phi_F, |F'| phi_F')_K` via `R_FF'`.
fn rt_gram(mesh: &Mesh, coef: &CoefficientField, t: usize, loc: &LocalEdges) -> SMatrix<f64, 3, 3> {
    let inv = coef.inverse(t);
    let c = mesh.corners(t);
    let sum = c[0] + c[1] + c[2];
    let area = mesh.area(t);
    SMatrix::from_fn(|i, j| {
        let r = bilinear(&(sum - c[j] * 3.0), inv, &(sum - c[i] * 3.0))
            + c.iter().map(|p| bilinear(&(p - c[j]), inv, &(p - c[i]))).sum::<f64>();
        loc.sign[i] * loc.sign[j] * loc.len[i] * loc.len[j] * r / (48.0 * area)
    })
}

/// BDM data of one element: slot `2i` is `psi_s` and `2i + 1` is `psi_e` of local edge `i`.
struct BdmLocal {
    /// Global vertex attached to each slot's barycentric factor.
    vertex: [usize; 6],
    /// `|F| psi = lambda_vertex * vec`.
    vec: [Vector2<f64>; 6],
}

impl BdmLocal {
    fn new(mesh: &Mesh, t: usize, loc: &LocalEdges) -> Self {
        let verts = mesh.triangle(t).vertices;
        let area = mesh.area(t);
        let local = |v: usize| verts.iter().position(|&w| w == v).expect("vertex of triangle");
        let mut vertex = [0; 6];
        let mut vec = [Vector2::zeros(); 6];
        for i in 0..3 {
            let edge = mesh.edge(loc.ids[i]);
            // F_e is opposite e_F, F_s opposite s_F.
            let fe = local(edge.end);
            let fs = local(edge.start);
            vertex[2 * i] = edge.start;
            vec[2 * i] = -loc.tangent[fe] * (loc.len[i] * loc.sign[fe] * loc.len[fe] / (2.0 * area));
            vertex[2 * i + 1] = edge.end;
            vec[2 * i + 1] = loc.tangent[fs] * (loc.len[i] * loc.sign[fs] * loc.len[fs] / (2.0 * area));
        }
        BdmLocal { vertex, vec }
    }

    /// Entries `B`, `-D`, `M` scaled by `|F||F'|`: `int lambda_a lambda_b = |K| (1 + delta_ab) / 12`.
    fn gram(&self, inv: &nalgebra::Matrix2<f64>, area: f64) -> SMatrix<f64, 6, 6> {
        SMatrix::from_fn(|a, b| {
            let same = if self.vertex[a] == self.vertex[b] { 2.0 } else { 1.0 };
            area * same / 12.0 * bilinear(&self.vec[a], inv, &self.vec[b])
        })
    }

    /// `int_K sum_a c_a |F| psi_a`, which equals `-L / 6` for the recovered dofs.
    fn mean_integral(&self, c: &SVector<f64, 6>, area: f64) -> Vector2<f64> {
        (0..6).fold(Vector2::zeros(), |acc, a| acc + self.vec[a] * (c[a] * area / 3.0))
    }
}

fn bdm_dofs(field: &RecoveredFlux, loc: &LocalEdges) -> SVector<f64, 6> {
    SVector::from_fn(|k, _| field.dofs[loc.ids[k / 2]][k % 2])
}

/// `u(x_F)` for each local edge: the value at the opposite vertex.
fn opposite_values(mesh: &Mesh, t: usize, u: &[f64]) -> [f64; 3] {
    mesh.triangle(t).vertices.map(|v| u[v])
}

/// Closed-form element terms: `R`, `T`, `S` for RT fields and `B`, `D`, `M`, `L` for BDM fields.
pub fn element_terms_closed_form(
    mesh: &Mesh,
    coef: &CoefficientField,
    field: &RecoveredFlux,
    u: &[f64],
    t: usize,
) -> ElementTerms {
    let loc = LocalEdges::new(mesh, t);
    let area = mesh.area(t);
    let c = mesh.corners(t);
    let sum = c[0] + c[1] + c[2];
    let ux = opposite_values(mesh, t, u);
    let a = coef.tensor(t);

    let mut grad_grad = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let s = loc.normal[j].dot(&(a * loc.normal[i]));
            grad_grad += ux[i] * ux[j] * loc.sign[i] * loc.sign[j] * loc.len[i] * loc.len[j] * s;
        }
    }
    grad_grad /= 4.0 * area;

    match field.space {
        Space::Rt => {
            let g = rt_gram(mesh, coef, t, &loc);
            let d = SVector::<f64, 3>::from_fn(|i, _| field.dofs[loc.ids[i]][0]);
            let mut flux_grad = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    let tt = loc.normal[j].dot(&(sum - c[i] * 3.0));
                    flux_grad += loc.sign[i] * loc.sign[j] * loc.len[i] * loc.len[j] * d[i] * ux[j] * tt;
                }
            }
            ElementTerms { flux_flux: d.dot(&(g * d)), flux_grad: -flux_grad / (12.0 * area), grad_grad }
        }
        Space::Bdm => {
            let b = BdmLocal::new(mesh, t, &loc);
            let d = bdm_dofs(field, &loc);
            let g = b.gram(coef.inverse(t), area);
            let l = b.mean_integral(&d, area) * -6.0;
            let flux_grad: f64 =
                (0..3).map(|i| ux[i] * loc.sign[i] * loc.len[i] * loc.normal[i].dot(&l)).sum::<f64>() / (12.0 * area);
            ElementTerms { flux_flux: d.dot(&(g * d)), flux_grad, grad_grad }
        }
    }
}

/// Element terms by order-4 quadrature of the evaluated field.
pub fn element_terms_quadrature(
    mesh: &Mesh,
    coef: &CoefficientField,
    field: &RecoveredFlux,
    u: &[f64],
    t: usize,
) -> ElementTerms {
    let basis = ElementBasis::new(mesh, t);
    let grad = basis.grads.iter().zip(mesh.triangle(t).vertices).fold(Vector2::zeros(), |acc, (g, v)| acc + g * u[v]);
    let inv = coef.inverse(t);
    let a = coef.tensor(t);
    let [ff, fg] = TriangleRule::degree4()
        .integrate(&basis.corners, basis.area, |_, l| {
            let s = field.eval_barycentric(mesh, &basis, t, &l);
            Vector2::new(quad_form(inv, &s), s.dot(&grad))
        })
        .into();
    ElementTerms { flux_flux: ff, flux_grad: fg, grad_grad: basis.area * quad_form(a, &grad) }
}

/// `xi_K = ||A^{-1/2}(hat sigma + A grad u)||_K`.
///
/// The closed form applies the `R` (RT) or `B`/`D`/`M` (BDM) kernel to the dof
/// differences `hat sigma - tilde sigma_K`, which expands to the three-term
/// formula without its cancellation.
pub fn element_indicator(
    mesh: &Mesh,
    coef: &CoefficientField,
    field: &RecoveredFlux,
    u: &[f64],
    t: usize,
    method: Method,
) -> f64 {
    let basis = ElementBasis::new(mesh, t);
    let grad = basis.grads.iter().zip(mesh.triangle(t).vertices).fold(Vector2::zeros(), |acc, (g, v)| acc + g * u[v]);
    let sigma = -(coef.tensor(t) * grad);
    let squared = match method {
        Method::Quadrature => {
            let inv = coef.inverse(t);
            TriangleRule::degree4().integrate(&basis.corners, basis.area, |_, l| {
                quad_form(inv, &(field.eval_barycentric(mesh, &basis, t, &l) - sigma))
            })
        }
        Method::ClosedForm => {
            let loc = LocalEdges::new(mesh, t);
            match field.space {
                Space::Rt => {
                    let d = SVector::<f64, 3>::from_fn(|i, _| field.dofs[loc.ids[i]][0] - sigma.dot(&loc.normal[i]));
                    d.dot(&(rt_gram(mesh, coef, t, &loc) * d))
                }
                Space::Bdm => {
                    let b = BdmLocal::new(mesh, t, &loc);
                    let d = bdm_dofs(field, &loc) - SVector::<f64, 6>::from_fn(|k, _| sigma.dot(&loc.normal[k / 2]));
                    d.dot(&(b.gram(coef.inverse(t), basis.area) * d))
                }
            }
        }
    };
    squared.max(0.0).sqrt()
}

/// Residual edge indicator `eta_F` with `alpha_F = lambda_min` of the neighbours.
pub fn residual_edge_indicator(
    mesh: &Mesh,
    coef: &CoefficientField,
    flux: &NumericalFlux,
    g_n: &[f64],
    e: usize,
) -> f64 {
    let edge = mesh.edge(e);
    let (sm, sp) = flux.traces(mesh, e);
    let am = coef.lambda_min(edge.minus);
    match (edge.kind, edge.plus, sp) {
        (EdgeKind::Dirichlet, ..) => 0.0,
        (EdgeKind::Neumann, ..) => edge.length * (sm - g_n[e]).abs() / am.sqrt(),
        (EdgeKind::Interior, Some(p), Some(sp)) => edge.length * (sm - sp).abs() / (am + coef.lambda_min(p)).sqrt(),
        _ => unreachable!("interior edge has two neighbours"),
    }
}

/// Vertices on the closure of the interface or the Dirichlet boundary.
pub fn interface_or_dirichlet_vertices(mesh: &Mesh) -> Vec<bool> {
    let mut mark = mesh.dirichlet_vertices();
    for e in mesh.interface_edges() {
        let edge = mesh.edge(e);
        mark[edge.start] = true;
        mark[edge.end] = true;
    }
    mark
}

/// Data oscillation `H_f`, integrated with the degree-5 rule.
pub fn data_oscillation(mesh: &Mesh, source: &dyn Fn(Point) -> f64, coef: &CoefficientField) -> f64 {
    let rule = TriangleRule::degree5();
    let near = interface_or_dirichlet_vertices(mesh);
    let mean: Vec<f64> = (0..mesh.num_triangles())
        .map(|t| rule.integrate(&mesh.corners(t), mesh.area(t), |x, _| source(x)) / mesh.area(t))
        .collect();
    let patches = mesh.vertex_patches();
    let f_z = patch_average(&patches, mesh.areas(), &mean);
    let mut total = 0.0;
    for (z, patch) in patches.iter().enumerate() {
        if near[z] {
            for &t in patch {
                let h = mesh.diameter(t);
                let f2 = rule.integrate(&mesh.corners(t), mesh.area(t), |x, _| source(x).powi(2));
                total += h * h / coef.lambda_min(t) * f2;
            }
        } else {
            let lambda = patch.iter().map(|&t| coef.lambda_min(t)).fold(f64::INFINITY, f64::min);
            let measure: f64 = patch.iter().map(|&t| mesh.area(t)).sum();
            let dev: f64 = patch
                .iter()
                .map(|&t| rule.integrate(&mesh.corners(t), mesh.area(t), |x, _| (source(x) - f_z[z]).powi(2)))
                .sum();
            total += measure / lambda * dev;
        }
    }
    total.sqrt()
}

/// Inputs shared by every estimator kind.
pub struct EstimateInput<'a> {
    pub mesh: &'a Mesh,
    pub coef: &'a CoefficientField,
    pub solution: &'a P1Solution,
    pub flux: &'a NumericalFlux,
    pub g_n: &'a [f64],
    pub source: &'a dyn Fn(Point) -> f64,
}

/// Improved estimator of the given space: recovered field, edge and element indicators.
pub fn improved_estimator(input: &EstimateInput<'_>, space: Space) -> Result<(RecoveredFlux, IndicatorSet)> {
    let EstimateInput { mesh, coef, solution, flux, g_n, .. } = *input;
    let field = recover(space, mesh, coef, flux, g_n)?;
    let edge = (0..mesh.num_edges())
        .map(|e| match space {
            Space::Rt => Ok(edge_indicator_rt(mesh, coef, flux, g_n, e)),
            Space::Bdm => edge_indicator_bdm(mesh, coef, flux, g_n, e),
        })
        .collect::<Result<Vec<_>>>()?;
    let element: Vec<f64> = (0..mesh.num_triangles())
        .map(|t| element_indicator(mesh, coef, &field, &solution.values, t, Method::ClosedForm))
        .collect();
    let kind = match space {
        Space::Rt => EstimatorKind::RtElement,
        Space::Bdm => EstimatorKind::BdmElement,
    };
    let set = IndicatorSet {
        kind,
        xi: l2(&element),
        xi_hat: edge.iter().sum(),
        xi_hat2: l2(&edge),
        edge,
        element,
        eta: 0.0,
        osc: 0.0,
    };
    Ok((field, set))
}

/// Computes the indicators of `kind`, with the residual and oscillation summaries filled in.
pub fn estimate(input: &EstimateInput<'_>, kind: EstimatorKind) -> Result<IndicatorSet> {
    let EstimateInput { mesh, coef, solution, flux, g_n, source } = *input;
    let residual: Vec<f64> = (0..mesh.num_edges()).map(|e| residual_edge_indicator(mesh, coef, flux, g_n, e)).collect();
    let eta = l2(&residual);
    let mut set = match kind {
        EstimatorKind::ZzGradient => zz_estimator(mesh, solution, coef, ZzMode::Gradient)?,
        EstimatorKind::ZzFlux => zz_estimator(mesh, solution, coef, ZzMode::FluxWeighted)?,
        EstimatorKind::Residual => IndicatorSet {
            kind,
            element: edge_to_element(mesh, &residual),
            xi: 0.0,
            xi_hat: 0.0,
            xi_hat2: 0.0,
            edge: residual,
            eta,
            osc: 0.0,
        },
        _ => improved_estimator(input, kind.space().expect("improved kind"))?.1,
    };
    set.kind = kind;
    set.eta = eta;
    set.osc = data_oscillation(mesh, source, coef);
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundaryKind;
    use nalgebra::Matrix2;

    fn kite(kinds: [BoundaryKind; 4]) -> Mesh {
        Mesh::new(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 1.0)],
            vec![([0, 1, 2], 0), ([1, 3, 2], 1)],
            vec![(0, 1, kinds[0]), (1, 3, kinds[1]), (3, 2, kinds[2]), (2, 0, kinds[3])],
        )
        .unwrap()
    }

    #[test]
    fn rt_edge_value_on_reference_patch() {
        let m = kite([BoundaryKind::Dirichlet; 4]);
        let coef = CoefficientField::constant(&m, Matrix2::identity()).unwrap();
        let hyp = m.find_edge(1, 2).unwrap();
        let n = m.edge(hyp).normal;
        // Traces differ by one across the hypotenuse.
        let flux = NumericalFlux { per_triangle: vec![n * 1.5, n * 0.5] };
        let g_n = vec![0.0; m.num_edges()];
        let xi = edge_indicator_rt(&m, &coef, &flux, &g_n, hyp);
        assert!((xi - (1.0f64 / 6.0).sqrt()).abs() < 1e-15);
        let field = recover(Space::Rt, &m, &coef, &flux, &g_n).unwrap();
        assert!((edge_misfit_quadrature(&m, &coef, &flux, &field, hyp) - xi).abs() < 1e-14);

        let bdm = edge_indicator_bdm(&m, &coef, &flux, &g_n, hyp).unwrap();
        let (bm, bp) = beta_coeffs(&m, &coef, hyp);
        let bp = bp.unwrap();
        let w = (bm.ss + bm.ee) / 4.0 + (bp.ss + bp.ee) / 4.0;
        assert!((bdm - 2f64.sqrt() * w.sqrt()).abs() < 1e-14);
        assert!(bdm <= xi + 1e-15);
        for e in 0..m.num_edges() {
            if !m.edge(e).is_interior() {
                assert_eq!(edge_indicator_rt(&m, &coef, &flux, &g_n, e), 0.0);
            }
        }
    }

    #[test]
    fn neumann_edges_use_minus_side_only() {
        let m = kite([BoundaryKind::Dirichlet, BoundaryKind::Neumann, BoundaryKind::Dirichlet, BoundaryKind::Neumann]);
        let coef = CoefficientField::constant(&m, Matrix2::new(2.0, 0.5, 0.5, 1.0)).unwrap();
        let flux = NumericalFlux { per_triangle: vec![Vector2::new(0.3, -0.7), Vector2::new(1.1, 0.4)] };
        let g_n: Vec<f64> = (0..m.num_edges()).map(|e| 0.1 * e as f64 - 0.2).collect();
        let rt = recover(Space::Rt, &m, &coef, &flux, &g_n).unwrap();
        let bdm = recover(Space::Bdm, &m, &coef, &flux, &g_n).unwrap();
        for e in 0..m.num_edges() {
            if m.edge(e).kind != EdgeKind::Neumann {
                continue;
            }
            let (bm, _) = beta_coeffs(&m, &coef, e);
            let jump = (flux.traces(&m, e).0 - g_n[e]).abs() * m.edge(e).length;
            let want = jump * bm.form(1.0, 1.0).sqrt();
            assert!((edge_indicator_bdm(&m, &coef, &flux, &g_n, e).unwrap() - want).abs() < 1e-14);
            let q_rt = edge_misfit_quadrature(&m, &coef, &flux, &rt, e);
            let q_bdm = edge_misfit_quadrature(&m, &coef, &flux, &bdm, e);
            assert!((edge_indicator_rt(&m, &coef, &flux, &g_n, e) - q_rt).abs() < 1e-14);
            assert!((q_bdm - want).abs() < 1e-14);
        }
    }

    #[test]
    fn residual_indicator_arithmetic() {
        let m = kite([BoundaryKind::Dirichlet; 4]);
        let coef = CoefficientField::from_regions(
            &m,
            &[(0, Matrix2::identity()), (1, Matrix2::identity() * 8.0)].into_iter().collect(),
        )
        .unwrap();
        let hyp = m.find_edge(1, 2).unwrap();
        let n = m.edge(hyp).normal;
        let len = m.edge(hyp).length;
        let flux = NumericalFlux { per_triangle: vec![n * (3.0 / len), Vector2::zeros()] };
        let eta = residual_edge_indicator(&m, &coef, &flux, &[0.0; 5], hyp);
        assert!((eta - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zz_constant_field_and_affine_solution() {
        let m = kite([BoundaryKind::Dirichlet; 4]);
        let c = Vector2::new(2.0, -1.0);
        let g = zz_recover(&m, &[c, c]);
        assert!(g.nodal.iter().all(|v| (v - c).norm() < 1e-15));
        let coef = CoefficientField::constant(&m, Matrix2::identity() * 3.0).unwrap();
        let sol = P1Solution { values: m.vertices().iter().map(|p| 2.0 * p.x - p.y).collect(), iterations: 0 };
        for mode in [ZzMode::Gradient, ZzMode::FluxWeighted] {
            assert!(zz_estimator(&m, &sol, &coef, mode).unwrap().xi < 1e-14);
        }
        let aniso = CoefficientField::constant(&m, Matrix2::new(2.0, 0.0, 0.0, 1.0)).unwrap();
        assert!(matches!(zz_estimator(&m, &sol, &aniso, ZzMode::FluxWeighted), Err(Error::NonScalarCoefficient(0))));
    }

    #[test]
    fn estimator_names_round_trip() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.name().parse::<EstimatorKind>().unwrap(), k);
        }
        assert!("zz".parse::<EstimatorKind>().is_err());
        assert!("exact".parse::<Method>().is_err());
    }

    #[test]
    fn element_terms_match_quadrature() {
        let m = Mesh::new(
            vec![Point::new(0.1, -0.2), Point::new(1.3, 0.4), Point::new(-0.3, 0.9), Point::new(1.0, 1.5)],
            vec![([0, 1, 2], 0), ([1, 3, 2], 1)],
            vec![
                (0, 1, BoundaryKind::Dirichlet),
                (1, 3, BoundaryKind::Neumann),
                (3, 2, BoundaryKind::Dirichlet),
                (2, 0, BoundaryKind::Neumann),
            ],
        )
        .unwrap();
        let coef = CoefficientField::from_regions(
            &m,
            &[(0, Matrix2::new(2.0, 0.7, 0.7, 1.5)), (1, Matrix2::new(0.4, -0.1, -0.1, 3.0))].into_iter().collect(),
        )
        .unwrap();
        let u = [0.3, -1.2, 0.8, 2.1];
        for space in [Space::Rt, Space::Bdm] {
            let dofs = (0..m.num_edges())
                .map(|e| {
                    let a = (e as f64 * 1.7).sin();
                    if space == Space::Rt {
                        [a, a]
                    } else {
                        [a, (e as f64 * 0.9).cos()]
                    }
                })
                .collect();
            let field = RecoveredFlux { space, dofs };
            for t in 0..2 {
                let c = element_terms_closed_form(&m, &coef, &field, &u, t);
                let q = element_terms_quadrature(&m, &coef, &field, &u, t);
                for (a, b) in [(c.flux_flux, q.flux_flux), (c.flux_grad, q.flux_grad), (c.grad_grad, q.grad_grad)] {
                    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{space:?} {t}: {a} vs {b}");
                }
                let xc = element_indicator(&m, &coef, &field, &u, t, Method::ClosedForm);
                let xq = element_indicator(&m, &coef, &field, &u, t, Method::Quadrature);
                assert!((xc - xq).abs() <= 1e-12 * xq);
                assert!((xc * xc - c.total()).abs() <= 1e-12 * (c.flux_flux + c.grad_grad));
            }
        }
    }
}
