//! Benchmark problems: the Kellogg checkerboard, the piecewise linear interface
//! example and a smooth manufactured solution.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::fem::{BoundaryData, ScalarFn, VectorFn};
use crate::mesh::{BoundaryKind, Mesh, Point};
use crate::quadrature::{gauss_legendre, TriangleRule};

pub type RegionFn = Arc<dyn Fn(Point) -> u32 + Send + Sync>;

#[derive(Clone)]
pub struct ExactSolution {
    pub value: ScalarFn,
    pub gradient: VectorFn,
    pub singular_points: Vec<Point>,
    /// `||A^{1/2} grad u||` over the domain.
    pub energy_norm: f64,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub mesh: Mesh,
    pub regions: BTreeMap<u32, Matrix2<f64>>,
    /// Region of an interior point; used to check that a mesh resolves the interfaces.
    pub region_at: RegionFn,
    pub boundary: BoundaryData,
    pub source: ScalarFn,
    pub exact: Option<ExactSolution>,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec").field("name", &self.name).field("regions", &self.regions).finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Every triangle lies in one region and carries that region's tag.
    pub fn check_alignment(&self, mesh: &Mesh) -> Result<()> {
        for t in 0..mesh.num_triangles() {
            let c = mesh.corners(t);
            let tag = mesh.triangle(t).region;
            // Points slightly inside each corner.
            let centroid = mesh.centroid(t);
            let inside = c.iter().map(|p| centroid + (p - centroid) * 0.999);
            if std::iter::once(centroid).chain(inside).any(|x| (self.region_at)(x) != tag) {
                return Err(Error::NotAligned(t));
            }
        }
        Ok(())
    }
}

/// Parses `kellogg`, `smooth` or `counterexample2d[:k=<real>]`.
pub fn from_name(name: &str) -> Result<ProblemSpec> {
    let (base, args) = name.split_once(':').unwrap_or((name, ""));
    let mut k = 100.0;
    for arg in args.split(',').filter(|a| !a.is_empty()) {
        match arg.split_once('=') {
            Some(("k", v)) if base == "counterexample2d" => {
                k = v.parse().map_err(|_| Error::InvalidConfig(format!("bad value in `{arg}`")))?;
            }
            _ => return Err(Error::InvalidConfig(format!("unknown problem argument `{arg}`"))),
        }
    }
    match base {
        "kellogg" => kellogg_problem(),
        "counterexample2d" => counterexample_2d(k, 4),
        "smooth" => Ok(smooth_problem()),
        _ => Err(Error::InvalidConfig(format!("unknown problem `{name}`"))),
    }
}

fn all_dirichlet(n_boundary: Vec<(usize, usize)>) -> Vec<(usize, usize, BoundaryKind)> {
    n_boundary.into_iter().map(|(a, b)| (a, b, BoundaryKind::Dirichlet)).collect()
}

/// `n x n` cells on `[lo, hi]^2`, each cut into four triangles by its centre.
pub fn criss_cross_mesh(n: usize, lo: f64, hi: f64, region: &dyn Fn(Point) -> u32) -> Result<Mesh> {
    let h = (hi - lo) / n as f64;
    let mut v: Vec<Point> = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            v.push(Point::new(lo + i as f64 * h, lo + j as f64 * h));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let c = v.len();
            v.push(Point::new(lo + (i as f64 + 0.5) * h, lo + (j as f64 + 0.5) * h));
            let r = region(v[c]);
            let corners = [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)];
            for k in 0..4 {
                cells.push(([corners[k], corners[(k + 1) % 4], c], r));
            }
        }
    }
    Mesh::new(v, cells, all_dirichlet(square_boundary(n, &id)))
}

/// `n x n` cells on `[lo, hi]^2` with diagonals alternating in a checkerboard
/// ("union jack") pattern.
pub fn union_jack_mesh(n: usize, lo: f64, hi: f64, region: &dyn Fn(Point) -> u32) -> Result<Mesh> {
    let h = (hi - lo) / n as f64;
    let mut v = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            v.push(Point::new(lo + i as f64 * h, lo + j as f64 * h));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let r = region(Point::new(lo + (i as f64 + 0.5) * h, lo + (j as f64 + 0.5) * h));
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                cells.push(([a, b, c], r));
                cells.push(([a, c, d], r));
            } else {
                cells.push(([a, b, d], r));
                cells.push(([b, c, d], r));
            }
        }
    }
    Mesh::new(v, cells, all_dirichlet(square_boundary(n, &id)))
}

fn square_boundary(n: usize, id: &dyn Fn(usize, usize) -> usize) -> Vec<(usize, usize)> {
    let mut b = Vec::with_capacity(4 * n);
    for i in 0..n {
        b.push((id(i, 0), id(i + 1, 0)));
        b.push((id(n, i), id(n, i + 1)));
        b.push((id(i + 1, n), id(i, n)));
        b.push((id(0, i + 1), id(0, i)));
    }
    b
}

/// Parameters of the Kellogg solution `r^gamma mu(theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KelloggParams {
    pub gamma: f64,
    pub rho: f64,
    pub sigma: f64,
    /// Coefficient in the first and third quadrants; the others carry 1.
    pub r: f64,
}

pub const KELLOGG: KelloggParams =
    KelloggParams { gamma: 0.1, rho: FRAC_PI_4, sigma: -14.922_565_104_551_52, r: 161.447_638_797_588_1 };

/// Largest accepted interface residual of a parameter tuple.
pub const KELLOGG_GATE: f64 = 1e-9;

impl KelloggParams {
    fn quadrant(theta: f64) -> usize {
        ((theta / FRAC_PI_2).floor() as usize).min(3)
    }

    pub fn alpha(&self, quadrant: usize) -> f64 {
        if quadrant.is_multiple_of(2) {
            self.r
        } else {
            1.0
        }
    }

    /// `(mu, mu')` on the branch of `quadrant`, at any `theta`.
    pub fn branch(&self, quadrant: usize, theta: f64) -> (f64, f64) {
        let KelloggParams { gamma: g, rho, sigma, .. } = *self;
        let (amp, shift) = match quadrant {
            0 => (((FRAC_PI_2 - sigma) * g).cos(), -FRAC_PI_2 + rho),
            1 => ((rho * g).cos(), -PI + sigma),
            2 => ((sigma * g).cos(), -PI - rho),
            _ => (((FRAC_PI_2 - rho) * g).cos(), -1.5 * PI - sigma),
        };
        let phase = (theta + shift) * g;
        (amp * phase.cos(), -amp * g * phase.sin())
    }

    /// `theta` in `[0, 2 pi)`.
    pub fn mu(&self, theta: f64) -> (f64, f64) {
        self.branch(Self::quadrant(theta), theta)
    }

    /// Largest mismatch of `mu` and `alpha mu'` across the four quadrant rays.
    pub fn interface_residual(&self) -> f64 {
        (0..4)
            .map(|q| {
                let next = (q + 1) % 4;
                let theta = (q + 1) as f64 * FRAC_PI_2;
                let (m0, d0) = self.branch(q, theta);
                let (m1, d1) = self.branch(next, if next == 0 { 0.0 } else { theta });
                (m0 - m1).abs().max((self.alpha(q) * d0 - self.alpha(next) * d1).abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let res = self.interface_residual();
        if res <= KELLOGG_GATE {
            Ok(())
        } else {
            Err(Error::InterfaceCheck(res))
        }
    }

    fn polar(p: Point) -> (f64, f64) {
        let theta = p.y.atan2(p.x);
        (p.norm(), if theta < 0.0 { theta + 2.0 * PI } else { theta })
    }

    pub fn value(&self, p: Point) -> f64 {
        let (r, theta) = Self::polar(p);
        if r == 0.0 {
            return 0.0;
        }
        r.powf(self.gamma) * self.mu(theta).0
    }

    pub fn gradient(&self, p: Point) -> Vector2<f64> {
        let (r, theta) = Self::polar(p);
        if r == 0.0 {
            return Vector2::zeros();
        }
        let (m, dm) = self.mu(theta);
        let scale = r.powf(self.gamma - 1.0);
        let er = Vector2::new(theta.cos(), theta.sin());
        let et = Vector2::new(-theta.sin(), theta.cos());
        (er * (self.gamma * m) + et * dm) * scale
    }

    /// `||A^{1/2} grad u||` on `(-1, 1)^2` from `int_{boundary} u A grad u . n`.
    pub fn energy_norm(&self) -> f64 {
        let (x, w) = gauss_legendre(40);
        let mut total = 0.0;
        // Eight boundary segments, split at the axes so each lies in one quadrant.
        let sides = [
            (Point::new(1.0, 0.0), Point::new(1.0, 1.0), Vector2::new(1.0, 0.0)),
            (Point::new(1.0, 1.0), Point::new(0.0, 1.0), Vector2::new(0.0, 1.0)),
            (Point::new(0.0, 1.0), Point::new(-1.0, 1.0), Vector2::new(0.0, 1.0)),
            (Point::new(-1.0, 1.0), Point::new(-1.0, 0.0), Vector2::new(-1.0, 0.0)),
            (Point::new(-1.0, 0.0), Point::new(-1.0, -1.0), Vector2::new(-1.0, 0.0)),
            (Point::new(-1.0, -1.0), Point::new(0.0, -1.0), Vector2::new(0.0, -1.0)),
            (Point::new(0.0, -1.0), Point::new(1.0, -1.0), Vector2::new(0.0, -1.0)),
            (Point::new(1.0, -1.0), Point::new(1.0, 0.0), Vector2::new(1.0, 0.0)),
        ];
        for (a, b, n) in sides {
            let mid = (a + b) * 0.5;
            let alpha = self.alpha(Self::quadrant(Self::polar(mid).1));
            let len = (b - a).norm();
            for (xi, wi) in x.iter().zip(&w) {
                let p = a + (b - a) * *xi;
                total += wi * len * self.value(p) * alpha * self.gradient(p).dot(&n);
            }
        }
        total.sqrt()
    }
}

fn quadrant_of(p: Point) -> u32 {
    match (p.x > 0.0, p.y > 0.0) {
        (true, true) => 0,
        (false, true) => 1,
        (false, false) => 2,
        (true, false) => 3,
    }
}

pub fn kellogg_problem() -> Result<ProblemSpec> {
    kellogg_with(KELLOGG)
}

pub fn kellogg_with(params: KelloggParams) -> Result<ProblemSpec> {
    params.validate()?;
    let mesh = criss_cross_mesh(4, -1.0, 1.0, &quadrant_of)?;
    let regions = (0..4).map(|q| (q, Matrix2::identity() * params.alpha(q as usize))).collect();
    let value: ScalarFn = Arc::new(move |p| params.value(p));
    Ok(ProblemSpec {
        name: "kellogg".into(),
        mesh,
        regions,
        region_at: Arc::new(quadrant_of),
        boundary: BoundaryData { dirichlet: value.clone(), neumann: Arc::new(|_| 0.0) },
        source: Arc::new(|_| 0.0),
        exact: Some(ExactSolution {
            value,
            gradient: Arc::new(move |p| params.gradient(p)),
            singular_points: vec![Point::zeros()],
            energy_norm: params.energy_norm(),
        }),
    })
}

/// Two-region problem on `(-1, 1)^2` with `A = kI` for `y > 0` and `A = I` below;
/// the exact solution is piecewise linear. The coarse mesh has `n x n` cells.
pub fn counterexample_2d(k: f64, n: usize) -> Result<ProblemSpec> {
    if !(k > 1.0) && k != 1.0 {
        return Err(Error::InvalidConfig(format!("counterexample2d needs k >= 1, got {k}")));
    }
    if n == 0 || n % 2 == 1 {
        return Err(Error::InvalidConfig(format!("counterexample2d needs an even cell count, got {n}")));
    }
    let region = |p: Point| u32::from(p.y > 0.0);
    let mesh = union_jack_mesh(n, -1.0, 1.0, &region)?;
    let regions = [(0, Matrix2::identity()), (1, Matrix2::identity() * k)].into_iter().collect();
    let value: ScalarFn = Arc::new(move |p: Point| if p.y > 0.0 { p.x + p.y } else { p.x + k * p.y });
    // ||A^{1/2} grad u||^2 = 2 (k * 2) + 2 (1 + k^2).
    let energy_norm = (4.0 * k + 2.0 * (1.0 + k * k)).sqrt();
    Ok(ProblemSpec {
        name: format!("counterexample2d:k={k}"),
        mesh,
        regions,
        region_at: Arc::new(region),
        boundary: BoundaryData { dirichlet: value.clone(), neumann: Arc::new(|_| 0.0) },
        source: Arc::new(|_| 0.0),
        exact: Some(ExactSolution {
            value,
            gradient: Arc::new(move |p: Point| if p.y > 0.0 { Vector2::new(1.0, 1.0) } else { Vector2::new(1.0, k) }),
            singular_points: Vec::new(),
            energy_norm,
        }),
    })
}

/// `u = sin(pi x) sin(pi y)` on the unit square with `A = I`.
pub fn smooth_problem() -> ProblemSpec {
    let mesh = union_jack_mesh(4, 0.0, 1.0, &|_| 0).expect("structured mesh is valid");
    ProblemSpec {
        name: "smooth".into(),
        mesh,
        regions: [(0, Matrix2::identity())].into_iter().collect(),
        region_at: Arc::new(|_| 0),
        boundary: BoundaryData::homogeneous(),
        source: Arc::new(|p: Point| 2.0 * PI * PI * (PI * p.x).sin() * (PI * p.y).sin()),
        exact: Some(ExactSolution {
            value: Arc::new(|p: Point| (PI * p.x).sin() * (PI * p.y).sin()),
            gradient: Arc::new(|p: Point| {
                Vector2::new((PI * p.x).cos() * (PI * p.y).sin(), (PI * p.x).sin() * (PI * p.y).cos()) * PI
            }),
            singular_points: Vec::new(),
            energy_norm: PI / 2f64.sqrt(),
        }),
    }
}

/// Step of the central differences in [`manufactured_residual`].
const FD_STEP: f64 = 1e-5;

/// `sum_K int_K |div(A grad u) + f|` over triangles whose corners keep distance
/// `clearance` from every singular point, with the divergence taken by central
/// differences of the exact gradient. Zero when no exact solution is registered.
pub fn manufactured_residual(problem: &ProblemSpec, mesh: &Mesh, clearance: f64) -> f64 {
    let Some(exact) = &problem.exact else { return 0.0 };
    let rule = TriangleRule::degree5();
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let c = mesh.corners(t);
        if exact.singular_points.iter().any(|s| c.iter().any(|p| (p - s).norm() < clearance)) {
            continue;
        }
        let a = problem.regions[&mesh.triangle(t).region];
        let flux = |x: Point| a * (exact.gradient)(x);
        total += rule.integrate(&c, mesh.area(t), |x, _| {
            let dx = Vector2::new(FD_STEP, 0.0);
            let dy = Vector2::new(0.0, FD_STEP);
            let div = (flux(x + dx).x - flux(x - dx).x + flux(x + dy).y - flux(x - dy).y) / (2.0 * FD_STEP);
            (div + (problem.source)(x)).abs()
        });
    }
    total
}

/// Max mismatch of `u` and (relative) of `A grad u . n` across interface edges,
/// sampled at three points per edge.
pub fn interface_condition_residual(problem: &ProblemSpec, mesh: &Mesh) -> f64 {
    let Some(exact) = &problem.exact else { return 0.0 };
    let mut worst: f64 = 0.0;
    for e in mesh.interface_edges() {
        let edge = mesh.edge(e);
        let (a, b) = (mesh.vertex(edge.start), mesh.vertex(edge.end));
        let am = problem.regions[&mesh.triangle(edge.minus).region];
        let ap = problem.regions[&mesh.triangle(edge.plus.expect("interface edge is interior")).region];
        for s in [0.25, 0.5, 0.75] {
            let x = a + (b - a) * s;
            // Evaluate just off the edge on either side and extrapolate back to it.
            let off = edge.normal * 1e-12 * edge.length;
            let (xm, xp) = (x - off, x + off);
            let (gm, gp) = ((exact.gradient)(xm), (exact.gradient)(xp));
            let um = (exact.value)(xm) + gm.dot(&off);
            let up = (exact.value)(xp) - gp.dot(&off);
            let fm = (am * gm).dot(&edge.normal);
            let fp = (ap * gp).dot(&edge.normal);
            let scale = fm.abs().max(fp.abs()).max(1.0);
            worst = worst.max((um - up).abs()).max((fm - fp).abs() / scale);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kellogg_parameters_pass_the_gate() {
        assert!(KELLOGG.interface_residual() <= KELLOGG_GATE);
        assert_eq!(format!("{}", KELLOGG.r), "161.4476387975881");
        let bad = KelloggParams { sigma: -14.9, ..KELLOGG };
        assert!(matches!(kellogg_with(bad), Err(Error::InterfaceCheck(_))));
    }

    #[test]
    fn kellogg_solution_basics() {
        let p = kellogg_problem().unwrap();
        let exact = p.exact.as_ref().unwrap();
        assert_eq!((exact.value)(Point::zeros()), 0.0);
        assert_eq!(p.mesh.num_triangles(), 64);
        p.check_alignment(&p.mesh).unwrap();
        assert!(manufactured_residual(&p, &p.mesh, 0.2) < 1e-8);
        // The boundary-integral energy norm agrees with a deeply graded volume quadrature.
        let norm = exact.energy_norm;
        let rule = TriangleRule::conical(12);
        let mut vol = 0.0;
        for t in 0..p.mesh.num_triangles() {
            let c = p.mesh.corners(t);
            let alpha = p.regions[&p.mesh.triangle(t).region][(0, 0)];
            let f = |x: Point, _| alpha * (exact.gradient)(x).norm_squared();
            match c.iter().position(|v| v.norm() == 0.0) {
                Some(k) => {
                    for s in crate::quadrature::graded_pieces(&c, k, 150, 0.5) {
                        vol += rule.integrate(&s, crate::quadrature::triangle_area(&s), f);
                    }
                }
                None => vol += rule.integrate(&c, p.mesh.area(t), f),
            }
        }
        let vol = vol.sqrt();
        assert!(((vol - norm) / norm).abs() < 1e-6, "{vol} vs {norm}");
    }

    #[test]
    fn counterexample_flux_is_normally_continuous() {
        let p = counterexample_2d(100.0, 4).unwrap();
        p.check_alignment(&p.mesh).unwrap();
        assert!(interface_condition_residual(&p, &p.mesh) < 1e-15);
        let g = &p.exact.as_ref().unwrap().gradient;
        let up = p.regions[&1] * g(Point::new(0.3, 0.1));
        let down = p.regions[&0] * g(Point::new(0.3, -0.1));
        assert_eq!(up.y, 100.0);
        assert_eq!(down.y, 100.0);
        assert!(counterexample_2d(100.0, 3).is_err());
    }

    #[test]
    fn misaligned_mesh_is_rejected() {
        let p = counterexample_2d(10.0, 4).unwrap();
        let shifted = p.mesh.map_coordinates(|x| Point::new(x.x, x.y + 0.1)).unwrap();
        assert!(matches!(p.check_alignment(&shifted), Err(Error::NotAligned(_))));
    }

    #[test]
    fn smooth_problem_values() {
        let p = smooth_problem();
        assert!(((p.source)(Point::new(0.5, 0.5)) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((p.exact.as_ref().unwrap().value)(Point::new(0.0, 0.3)).abs() < 1e-15);
        assert!(manufactured_residual(&p, &p.mesh, 0.0) < 1e-8);
    }

    #[test]
    fn names_parse() {
        assert_eq!(from_name("counterexample2d:k=5").unwrap().regions[&1][(0, 0)], 5.0);
        assert_eq!(from_name("smooth").unwrap().name, "smooth");
        assert!(from_name("kellogg:k=3").is_err());
        assert!(from_name("nope").is_err());
    }
}
