//! Oracle suites: closed forms against quadrature, and structural invariants.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix2, Rotation2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adaptivity::dorfler_mark;
use crate::error::Result;
use crate::estimators::{
    edge_indicator_bdm, edge_indicator_rt, edge_misfit_quadrature, element_indicator, element_terms_closed_form,
    element_terms_quadrature, Method,
};
use crate::fem::{numerical_flux, CoefficientField, NumericalFlux, P1Solution};
use crate::geometry::barycentric_coordinates;
use crate::mesh::{BoundaryKind, Mesh, Point};
use crate::problems::criss_cross_mesh;
use crate::quadrature::gauss_legendre;
use crate::recovery::{
    bdm_recover, bdm_weights, beta_on, beta_quadrature, gamma_on, gamma_quadrature, global_recover, misfit_squared,
    rt_recover, rt_weight, ElementBasis, RecoveredFlux, Space,
};

pub const DEFAULT_SEED: u64 = 0x5eed_f1c5;
pub const FORMULA_TOL: f64 = 1e-10;
pub const BASIS_TOL: f64 = 1e-12;
/// Slack for the inequalities that only involve closed forms.
pub const ORDERING_TOL: f64 = 1e-10;
/// Slack for comparisons against the iteratively solved global projection.
pub const GLOBAL_TOL: f64 = 1e-8;

/// Worst observed deviation of one family of checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub samples: usize,
    pub worst: f64,
    pub tol: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, tol: f64) -> Self {
        Check { name: name.into(), samples: 0, worst: 0.0, tol }
    }

    pub fn record(&mut self, deviation: f64) {
        self.samples += 1;
        // NaN must fail the check.
        if !(deviation <= self.worst) {
            self.worst = if deviation.is_nan() { f64::INFINITY } else { deviation };
        }
    }

    /// `|a - b| / scale`.
    pub fn compare(&mut self, a: f64, b: f64, scale: f64) {
        self.record((a - b).abs() / scale.max(f64::MIN_POSITIVE));
    }

    /// Relative excess of `lhs` over `rhs`; zero when the inequality holds.
    pub fn at_most(&mut self, lhs: f64, rhs: f64, scale: f64) {
        self.record(((lhs - rhs) / scale.max(f64::MIN_POSITIVE)).max(0.0));
    }

    pub fn merge(&mut self, other: &Check) {
        self.samples += other.samples;
        if !(other.worst <= self.worst) {
            self.worst = other.worst;
        }
    }

    pub fn passed(&self) -> bool {
        self.samples > 0 && self.worst <= self.tol
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<6} {:<34} n={:<6} worst={:.3e} tol={:.0e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.samples,
            self.worst,
            self.tol
        )
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(Check::passed)
}

/// Random SPD tensor with eigenvalues in `[10^-decades, 10^decades]` and a random principal frame.
pub fn random_spd(rng: &mut impl Rng, decades: f64) -> Matrix2<f64> {
    let l1 = 10f64.powf(rng.gen_range(-decades..decades));
    let l2 = 10f64.powf(rng.gen_range(-decades..decades));
    let r = Rotation2::new(rng.gen_range(0.0..PI)).into_inner();
    r * Matrix2::new(l1, 0.0, 0.0, l2) * r.transpose()
}

/// Random point set forming a triangle with all angles above about 10 degrees.
pub fn random_triangle(rng: &mut impl Rng) -> [Point; 3] {
    loop {
        let p: [Point; 3] = std::array::from_fn(|_| Point::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)));
        let c = crate::quadrature::triangle_area(&p);
        let longest = (0..3).map(|i| (p[(i + 1) % 3] - p[i]).norm_squared()).fold(0.0, f64::max);
        // 2|K| / l_max^2 bounds the smallest angle from below.
        if c.abs() > 0.1 * longest {
            return p;
        }
    }
}

/// Two-triangle patch with random geometry, coefficients, boundary kinds and data.
pub struct RandomPatch {
    pub mesh: Mesh,
    pub coef: CoefficientField,
    pub flux: NumericalFlux,
    pub g_n: Vec<f64>,
    pub u: Vec<f64>,
}

pub fn random_patch(rng: &mut impl Rng) -> Result<RandomPatch> {
    let (p0, p1, p2) = loop {
        let [a, b, c] = random_triangle(rng);
        if crate::quadrature::triangle_area(&[a, b, c]) > 0.0 {
            break (a, b, c);
        }
    };
    // Mirror p0 across the edge p1p2 with a random stretch and shift along it.
    let t = (p2 - p1).normalize();
    let rel = p0 - p1;
    let along = rel.dot(&t) + rng.gen_range(-0.3..0.3) * (p2 - p1).norm();
    let across = -(rel - t * rel.dot(&t)) * rng.gen_range(0.5..2.0);
    let p3 = p1 + t * along + across;
    let scale = 10f64.powf(rng.gen_range(-1.0..1.0));
    let shift = Vector2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
    let mut pts = [p0, p1, p2, p3].map(|p| p * scale + shift);

    // Shuffle global vertex numbering so every orientation convention is exercised.
    let mut perm = [0usize, 1, 2, 3];
    for i in (1..4).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let mut placed = [Point::zeros(); 4];
    for (old, &new) in perm.iter().enumerate() {
        placed[new] = pts[old];
    }
    pts = placed;
    let id = |old: usize| perm[old];
    let kind =
        |rng: &mut dyn rand::RngCore| if rng.gen_bool(0.5) { BoundaryKind::Dirichlet } else { BoundaryKind::Neumann };
    let boundary = vec![
        (id(1), id(0), kind(rng)),
        (id(0), id(2), kind(rng)),
        (id(2), id(3), kind(rng)),
        (id(3), id(1), kind(rng)),
    ];
    let mesh = Mesh::new(pts.to_vec(), vec![([id(0), id(1), id(2)], 0), ([id(1), id(3), id(2)], 1)], boundary)?;
    let regions = [(0, random_spd(rng, 2.0)), (1, random_spd(rng, 2.0))].into_iter().collect();
    let coef = CoefficientField::from_regions(&mesh, &regions)?;
    let flux = NumericalFlux {
        per_triangle: (0..2).map(|_| Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect(),
    };
    let g_n = (0..mesh.num_edges()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let u = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Ok(RandomPatch { mesh, coef, flux, g_n, u })
}

/// Closed forms against order-4 quadrature on `cases` random patches.
pub fn formula_suite(cases: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = FORMULA_TOL;
    let mut gamma = Check::new("gamma_F", tol);
    let mut a_f = Check::new("a_F", tol);
    let mut beta = Check::new("beta_ij,F", tol);
    let mut b_f = Check::new("b_s, b_e", tol);
    let mut xi_rt = Check::new("xi_F rt", tol);
    let mut xi_bdm = Check::new("xi_F bdm", tol);
    let names = ["flux-flux", "flux-grad", "grad-grad"];
    let mut terms: Vec<Check> = ["rt", "bdm"]
        .iter()
        .flat_map(|s| names.iter().map(move |n| Check::new(format!("xi_K {s} {n}"), tol)))
        .collect();

    for _ in 0..cases {
        let RandomPatch { mesh, coef, flux, g_n, u } = random_patch(&mut rng)?;
        for e in 0..mesh.num_edges() {
            let edge = mesh.edge(e);
            let sides: Vec<usize> = std::iter::once(edge.minus).chain(edge.plus).collect();
            let mut gq = Vec::new();
            let mut bq = Vec::new();
            for &t in &sides {
                let q = gamma_quadrature(&mesh, &coef, e, t);
                gamma.compare(gamma_on(&mesh, &coef, e, t), q, q.abs());
                gq.push(q);
                let c = beta_on(&mesh, &coef, e, t);
                let q = beta_quadrature(&mesh, &coef, e, t);
                let s = (q.ss * q.ee).sqrt();
                beta.compare(c.ss, q.ss, q.ss.abs());
                beta.compare(c.ee, q.ee, q.ee.abs());
                beta.compare(c.se, q.se, s);
                bq.push(q);
            }
            if edge.is_interior() {
                let want = gq[0] / (gq[0] + gq[1]);
                a_f.compare(rt_weight(&mesh, &coef, e)?, want, want.abs().max(1.0));
                let (m, p) = (bq[0], bq[1]);
                let sum = Matrix2::new(m.ss + p.ss, m.se + p.se, m.se + p.se, m.ee + p.ee);
                let rhs = Vector2::new(m.ss + m.se, m.se + m.ee);
                if let Some(w) = sum.try_inverse().map(|inv| inv * rhs) {
                    let (bs, be) = bdm_weights(&mesh, &coef, e)?;
                    b_f.compare(bs, w[0], w[0].abs().max(1.0));
                    b_f.compare(be, w[1], w[1].abs().max(1.0));
                }
            }
        }
        let rt = rt_recover(&mesh, &coef, &flux, &g_n);
        let bdm = bdm_recover(&mesh, &coef, &flux, &g_n)?;
        for e in 0..mesh.num_edges() {
            let q = edge_misfit_quadrature(&mesh, &coef, &flux, &rt, e);
            xi_rt.compare(edge_indicator_rt(&mesh, &coef, &flux, &g_n, e), q, q.abs().max(1e-300));
            let q = edge_misfit_quadrature(&mesh, &coef, &flux, &bdm, e);
            xi_bdm.compare(edge_indicator_bdm(&mesh, &coef, &flux, &g_n, e)?, q, q.abs().max(1e-300));
        }
        for (k, field) in [&rt, &bdm].into_iter().enumerate() {
            for t in 0..mesh.num_triangles() {
                let c = element_terms_closed_form(&mesh, &coef, field, &u, t);
                let q = element_terms_quadrature(&mesh, &coef, field, &u, t);
                let cross = (q.flux_flux * q.grad_grad).sqrt();
                terms[3 * k].compare(c.flux_flux, q.flux_flux, q.flux_flux.abs());
                terms[3 * k + 1].compare(c.flux_grad, q.flux_grad, cross);
                terms[3 * k + 2].compare(c.grad_grad, q.grad_grad, q.grad_grad.abs());
            }
        }
    }
    let mut out = vec![gamma, a_f, beta, b_f, xi_rt, xi_bdm];
    out.extend(terms);
    Ok(out)
}

/// `int_{F'} phi_F . n_{F'} = delta_{FF'}` and `psi_s + psi_e = phi_F` on random triangles.
pub fn basis_identity_checks(triangles: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut duality = Check::new("RT duality", BASIS_TOL);
    let mut split = Check::new("psi_s + psi_e = phi", BASIS_TOL);
    let (nodes, weights) = gauss_legendre(3);
    for _ in 0..triangles {
        let p = random_triangle(&mut rng);
        let b = (0..3).map(|i| (i, (i + 1) % 3, BoundaryKind::Dirichlet)).collect();
        let mesh = Mesh::new(p.to_vec(), vec![([0, 1, 2], 0)], b)?;
        let basis = ElementBasis::new(&mesh, 0);
        for f in mesh.triangle_edges(0) {
            let edge = mesh.edge(f);
            for g in mesh.triangle_edges(0) {
                let other = mesh.edge(g);
                let (a, z) = (mesh.vertex(other.start), mesh.vertex(other.end));
                let flux: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&s, &w)| {
                        let x = a + (z - a) * s;
                        let l = barycentric_coordinates(&basis.corners, x);
                        w * other.length * basis.rt(edge, &l).dot(&other.normal)
                    })
                    .sum();
                duality.compare(flux, if f == g { 1.0 } else { 0.0 }, 1.0);
            }
            for _ in 0..4 {
                let (r, s) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
                let (r, s) = if r + s > 1.0 { (1.0 - r, 1.0 - s) } else { (r, s) };
                let l = [1.0 - r - s, r, s];
                let (ps, pe) = basis.bdm(edge, &l);
                let phi = basis.rt(edge, &l);
                split.compare((ps + pe - phi).norm(), 0.0, phi.norm().max(1.0 / edge.length));
            }
        }
    }
    Ok(vec![duality, split])
}

/// Results of the ordering inequalities on one discrete state.
#[derive(Debug, Clone)]
pub struct Ordering {
    /// `xi^bdm_F <= xi^rt_F` edge-wise.
    pub bdm_below_rt: Check,
    /// `xi^2 <= 2 sum_F xi_F^2` for both spaces.
    pub element_by_edges: Check,
    /// `xi(sigma_bar) <= min(xi, xi_hat)` for both spaces.
    pub global_minimal: Check,
    /// `xi_K <= sum_{F in K} xi_F` for both spaces.
    pub local_triangle: Check,
}

impl Ordering {
    pub fn new() -> Self {
        Ordering {
            bdm_below_rt: Check::new("xi_F bdm <= xi_F rt", ORDERING_TOL),
            element_by_edges: Check::new("xi^2 <= 2 sum xi_F^2", ORDERING_TOL),
            global_minimal: Check::new("xi(sigma_bar) <= min(xi, xi_hat)", GLOBAL_TOL),
            local_triangle: Check::new("xi_K <= sum xi_F", ORDERING_TOL),
        }
    }

    pub fn checks(&self) -> Vec<Check> {
        vec![
            self.bdm_below_rt.clone(),
            self.element_by_edges.clone(),
            self.global_minimal.clone(),
            self.local_triangle.clone(),
        ]
    }

    pub fn merge(&mut self, other: &Ordering) {
        self.bdm_below_rt.merge(&other.bdm_below_rt);
        self.element_by_edges.merge(&other.element_by_edges);
        self.global_minimal.merge(&other.global_minimal);
        self.local_triangle.merge(&other.local_triangle);
    }
}

impl Default for Ordering {
    fn default() -> Self {
        Self::new()
    }
}

/// Evaluates all ordering inequalities for the P1 field `u`. Violations are measured
/// relative to `max(rhs, 1e-12 ||A^{-1/2} tilde sigma||)`. The iteratively solved global
/// projection is granted an absolute allowance of `1e-10 ||A^{-1/2} tilde sigma||` first.
pub fn ordering_checks(
    mesh: &Mesh,
    coef: &CoefficientField,
    solution: &P1Solution,
    flux: &NumericalFlux,
    g_n: &[f64],
    solver_tol: f64,
    max_iter: usize,
) -> Result<Ordering> {
    let mut out = Ordering::new();
    let norm = flux.weighted_norm(mesh, coef);
    let floor = 1e-12 * norm;
    let scale = |x: f64| x.max(floor);
    let u = &solution.values;
    let rt_edge: Vec<f64> = (0..mesh.num_edges()).map(|e| edge_indicator_rt(mesh, coef, flux, g_n, e)).collect();
    let bdm_edge =
        (0..mesh.num_edges()).map(|e| edge_indicator_bdm(mesh, coef, flux, g_n, e)).collect::<Result<Vec<_>>>()?;
    for (b, r) in bdm_edge.iter().zip(&rt_edge) {
        out.bdm_below_rt.at_most(*b, *r, scale(*r));
    }
    for (space, edge) in [(Space::Rt, &rt_edge), (Space::Bdm, &bdm_edge)] {
        let field: RecoveredFlux = match space {
            Space::Rt => rt_recover(mesh, coef, flux, g_n),
            Space::Bdm => bdm_recover(mesh, coef, flux, g_n)?,
        };
        let element: Vec<f64> = (0..mesh.num_triangles())
            .map(|t| element_indicator(mesh, coef, &field, u, t, Method::ClosedForm))
            .collect();
        let xi2: f64 = element.iter().map(|x| x * x).sum();
        let edge2: f64 = edge.iter().map(|x| x * x).sum();
        out.element_by_edges.at_most(xi2, 2.0 * edge2, scale(2.0 * edge2).max(floor * floor));
        for (t, xk) in element.iter().enumerate() {
            let s: f64 = mesh.triangle_edges(t).iter().map(|&e| edge[e]).sum();
            out.local_triangle.at_most(*xk, s, scale(s));
        }
        let bar = global_recover(mesh, coef, flux, g_n, space, solver_tol, max_iter)?;
        let xi_bar = misfit_squared(mesh, coef, flux, &bar).iter().sum::<f64>().sqrt();
        let xi = xi2.sqrt();
        let xi_hat: f64 = edge.iter().sum();
        let bound = xi.min(xi_hat);
        out.global_minimal.at_most(xi_bar - 1e-10 * norm, bound, scale(bound));
    }
    Ok(out)
}

/// Ordering inequalities for random nodal fields on a criss-cross mesh with random tensors.
pub fn random_ordering(meshes: usize, seed: u64) -> Result<Ordering> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = Ordering::new();
    for _ in 0..meshes {
        let base = criss_cross_mesh(3, 0.0, 1.0, &|p| ((3.0 * p.x) as u32).min(2) * 3 + ((3.0 * p.y) as u32).min(2))?;
        let mut boundary = base.boundary_edges();
        for b in &mut boundary {
            if rng.gen_bool(0.3) {
                b.2 = BoundaryKind::Neumann;
            }
        }
        let cells = base.triangles().iter().map(|t| (t.vertices, t.region)).collect();
        let mesh = Mesh::new(base.vertices().to_vec(), cells, boundary)?;
        let regions = (0..9).map(|r| (r, random_spd(&mut rng, 2.0))).collect();
        let coef = CoefficientField::from_regions(&mesh, &regions)?;
        let solution =
            P1Solution { values: (0..mesh.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect(), iterations: 0 };
        let flux = numerical_flux(&mesh, &solution, &coef);
        let g_n: Vec<f64> = (0..mesh.num_edges()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        total.merge(&ordering_checks(&mesh, &coef, &solution, &flux, &g_n, 1e-14, 100_000)?);
    }
    Ok(total)
}

/// Brute force over all subsets confirms the greedy Dorfler set is minimal, and
/// larger fractions never shrink the set.
pub fn marking_checks(trials: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut minimal = Check::new("dorfler minimal cardinality", 0.0);
    let mut monotone = Check::new("dorfler monotone in theta", 0.0);
    for _ in 0..trials {
        let n = rng.gen_range(1..=10);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let theta = rng.gen_range(0.05..0.95);
        let marked = dorfler_mark(&values, theta);
        let total: f64 = values.iter().map(|v| v * v).sum();
        let target = theta * theta * total;
        let best = (0u32..1 << n)
            .filter(|mask| {
                (0..n).filter(|i| mask & (1 << i) != 0).map(|i| values[i] * values[i]).sum::<f64>() >= target
            })
            .map(|mask| mask.count_ones() as usize)
            .min()
            .unwrap_or(0);
        let sum: f64 = marked.iter().map(|&i| values[i] * values[i]).sum();
        minimal.record(if marked.len() == best && sum >= target { 0.0 } else { 1.0 });
        let larger = dorfler_mark(&values, (theta + rng.gen_range(0.0..0.05)).min(0.99));
        monotone.record(if marked.iter().all(|i| larger.contains(i)) { 0.0 } else { 1.0 });
    }
    vec![minimal, monotone]
}

pub fn invariant_suite(seed: u64) -> Result<Vec<Check>> {
    let mut out = basis_identity_checks(100, seed)?;
    out.extend(random_ordering(5, seed.wrapping_add(1))?.checks());
    out.extend(marking_checks(200, seed.wrapping_add(2)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_suite_passes_on_a_small_sample() {
        let checks = formula_suite(50, 7).unwrap();
        assert!(all_passed(&checks), "{checks:#?}");
    }

    #[test]
    fn invariant_suite_passes() {
        let checks = invariant_suite(11).unwrap();
        assert!(all_passed(&checks), "{checks:#?}");
    }

    #[test]
    fn nan_fails_a_check() {
        let mut c = Check::new("x", 1.0);
        c.record(0.5);
        c.record(f64::NAN);
        assert!(!c.passed());
        assert!(!Check::new("empty", 1.0).passed());
    }
}
