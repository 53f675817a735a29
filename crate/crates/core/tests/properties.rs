use fluxzz_core::adaptivity::{amr_loop_observed, AmrConfig, ConvergenceRecord};
use fluxzz_core::estimators::{
    edge_indicator_bdm, edge_indicator_rt, element_indicator, residual_edge_indicator, zz_estimator, EstimatorKind,
    Method, ZzMode,
};
use fluxzz_core::fem::{CoefficientField, NumericalFlux, P1Solution};
use fluxzz_core::mesh::{bisect, read_mesh, write_mesh, BoundaryKind, Mesh, Point};
use fluxzz_core::problems::{counterexample_2d, criss_cross_mesh, kellogg_problem, smooth_problem};
use fluxzz_core::recovery::{bdm_recover, rt_recover};
use fluxzz_core::report::{fmt_real, history_csv, parse_history_csv};
use fluxzz_core::verify::{random_patch, RandomPatch};
use nalgebra::{Matrix2, Rotation2, Vector2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Every indicator of a patch, in a fixed order.
fn all_indicators(p: &RandomPatch) -> Vec<f64> {
    let RandomPatch { mesh, coef, flux, g_n, u } = p;
    let mut out = Vec::new();
    let rt = rt_recover(mesh, coef, flux, g_n);
    let bdm = bdm_recover(mesh, coef, flux, g_n).unwrap();
    for e in 0..mesh.num_edges() {
        out.push(edge_indicator_rt(mesh, coef, flux, g_n, e));
        out.push(edge_indicator_bdm(mesh, coef, flux, g_n, e).unwrap());
        out.push(residual_edge_indicator(mesh, coef, flux, g_n, e));
    }
    for t in 0..mesh.num_triangles() {
        out.push(element_indicator(mesh, coef, &rt, u, t, Method::ClosedForm));
        out.push(element_indicator(mesh, coef, &bdm, u, t, Method::ClosedForm));
    }
    let sol = P1Solution { values: u.clone(), iterations: 0 };
    out.extend(zz_estimator(mesh, &sol, coef, ZzMode::Gradient).unwrap().element);
    out
}

fn moved(p: &RandomPatch, angle: f64, shift: Vector2<f64>) -> RandomPatch {
    let r = Rotation2::new(angle).into_inner();
    let mesh = p.mesh.map_coordinates(|x| r * x + shift).unwrap();
    let regions =
        (0..mesh.num_triangles()).map(|t| (mesh.triangle(t).region, r * p.coef.tensor(t) * r.transpose())).collect();
    RandomPatch {
        coef: CoefficientField::from_regions(&mesh, &regions).unwrap(),
        flux: NumericalFlux { per_triangle: p.flux.per_triangle.iter().map(|s| r * s).collect() },
        g_n: p.g_n.clone(),
        u: p.u.clone(),
        mesh,
    }
}

fn region_of(p: Point) -> u32 {
    ((4.0 * p.x) as u32).min(3) + 4 * ((4.0 * p.y) as u32).min(3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn indicators_are_invariant_under_rigid_motions(seed in any::<u64>(), angle in 0.0..std::f64::consts::TAU,
                                                    dx in -10.0..10.0f64, dy in -10.0..10.0f64) {
        let p = random_patch(&mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let a = all_indicators(&p);
        let b = all_indicators(&moved(&p, angle, Vector2::new(dx, dy)));
        let scale = a.iter().copied().fold(0.0, f64::max);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn reals_round_trip_through_csv_format(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_real(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn history_round_trips(rows in prop::collection::vec((1usize..1_000_000, any::<f64>(), proptest::option::of(0.0..1.0f64)), 1..20)) {
        let records: Vec<ConvergenceRecord> = rows.iter().enumerate().map(|(i, &(dof, est, err))| ConvergenceRecord {
            step: i, dof, error: err, estimator: if est.is_finite() { est } else { 0.0 },
            effectivity: err.map(|e| e * 2.0), slope: if i > 0 { Some(-0.5) } else { None },
        }).collect();
        prop_assert_eq!(parse_history_csv(&history_csv(&records)).unwrap(), records);
    }

    #[test]
    fn refinement_stays_conforming_and_preserves_area(marks in prop::collection::vec(0usize..64, 1..12), rounds in 1usize..4) {
        let mut mesh = criss_cross_mesh(4, 0.0, 1.0, &region_of).unwrap();
        for r in 0..rounds {
            let n = mesh.num_triangles();
            let marked: Vec<usize> = marks.iter().map(|m| (m * (r + 1)) % n).collect();
            let next = bisect(&mesh, &marked).unwrap();
            prop_assert!(next.num_triangles() > n);
            prop_assert!((next.total_area() - 1.0).abs() < 1e-13);
            // Rebuilding from the text format re-runs every conformity check.
            let reread = read_mesh(&write_mesh(&next)).unwrap();
            prop_assert_eq!(reread.num_edges(), next.num_edges());
            for t in 0..next.num_triangles() {
                let c = next.centroid(t);
                prop_assert_eq!(next.triangle(t).region, region_of(c));
            }
            mesh = next;
        }
    }
}

/// One row of cells on `(0, 1) x (0, delta)`, slope `k` left of `x = 1/2` and `1` right of it.
fn strip(k: f64, n: usize, delta: f64) -> (Mesh, P1Solution) {
    let h = 1.0 / n as f64;
    let mut v = Vec::new();
    for j in 0..2 {
        for i in 0..=n {
            v.push(Point::new(i as f64 * h, j as f64 * delta));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::new();
    for i in 0..n {
        let region = u32::from(i >= n / 2);
        cells.push(([id(i, 0), id(i + 1, 0), id(i + 1, 1)], region));
        cells.push(([id(i, 0), id(i + 1, 1), id(i, 1)], region));
    }
    let mut b = vec![(id(0, 0), id(0, 1), BoundaryKind::Dirichlet), (id(n, 0), id(n, 1), BoundaryKind::Dirichlet)];
    for i in 0..n {
        b.push((id(i, 0), id(i + 1, 0), BoundaryKind::Neumann));
        b.push((id(i, 1), id(i + 1, 1), BoundaryKind::Neumann));
    }
    let mesh = Mesh::new(v, cells, b).unwrap();
    let u = |x: f64| if x <= 0.5 { k * x } else { x + 0.5 * (k - 1.0) };
    let values = mesh.vertices().iter().map(|p| u(p.x)).collect();
    (mesh, P1Solution { values, iterations: 0 })
}

#[test]
fn zz_on_thin_strip_matches_one_dimensional_value() {
    for (k, n) in [(10.0, 8), (100.0, 16), (3.0, 32)] {
        let h = 1.0 / n as f64;
        let delta = h / 8.0;
        let (mesh, sol) = strip(k, n, delta);
        let coef = CoefficientField::constant(&mesh, Matrix2::identity()).unwrap();
        let set = zz_estimator(&mesh, &sol, &coef, ZzMode::Gradient).unwrap();
        let want = (k - 1.0) * h.sqrt() / (2.0 * 3f64.sqrt());
        for column in [n / 2 - 1, n / 2] {
            // Both triangles of a cell, rescaled from the strip width to unit width.
            let got = ((set.element[2 * column].powi(2) + set.element[2 * column + 1].powi(2)) / delta).sqrt();
            assert!((got / want - 1.0).abs() < 0.2, "k={k} n={n} column {column}: {got} vs {want}");
        }
        let far = ((set.element[0].powi(2) + set.element[1].powi(2)) / delta).sqrt();
        assert!(far < 1e-12 * want);
    }
}

/// Largest `xi^rt_F / eta_F` over every step of a few adaptive runs.
#[test]
fn rt_edge_indicator_is_bounded_by_residual() {
    let mut worst: f64 = 0.0;
    let problems = [smooth_problem(), counterexample_2d(10.0, 4).unwrap(), kellogg_problem().unwrap()];
    for problem in &problems {
        let config = AmrConfig { estimator: EstimatorKind::RtEdge, max_dof: 3000, ..AmrConfig::default() };
        amr_loop_observed(problem, &config, |s| {
            for e in 0..s.mesh.num_edges() {
                let xi = edge_indicator_rt(s.mesh, s.coef, s.flux, s.g_n, e);
                let eta = residual_edge_indicator(s.mesh, s.coef, s.flux, s.g_n, e);
                if eta > 0.0 {
                    worst = worst.max(xi / eta);
                } else {
                    assert!(xi <= 1e-12 * s.flux.max_norm().max(1.0));
                }
            }
            Ok(())
        })
        .unwrap();
    }
    assert!(worst < 10.0, "observed constant {worst}");
    println!("observed efficiency constant {worst:.4}");
}
