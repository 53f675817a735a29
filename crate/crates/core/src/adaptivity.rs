//! Bulk marking and the solve, estimate, mark, refine loop.

use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimateInput, EstimatorKind, IndicatorSet};
use crate::fem::{
    assemble, energy_error, energy_error_by_boundary, numerical_flux, solve_from, CoefficientField, NumericalFlux,
    P1Solution,
};
use crate::mesh::{bisect_with_parents, Mesh, Point, DEFAULT_CLOSURE_LIMIT};
use crate::problems::ProblemSpec;

/// Estimates below this fraction of `||A^{-1/2} tilde sigma||` count as zero.
pub const ZERO_ESTIMATE_RTOL: f64 = 1e-10;
/// Number of trailing records in the slope fit.
pub const SLOPE_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct AmrConfig {
    pub estimator: EstimatorKind,
    pub theta: f64,
    pub max_dof: usize,
    pub solver_tol: f64,
    pub max_iter: usize,
    /// Safety cap on the number of refinement steps.
    pub max_steps: usize,
}

impl Default for AmrConfig {
    fn default() -> Self {
        AmrConfig {
            estimator: EstimatorKind::RtElement,
            theta: 0.5,
            max_dof: 20_000,
            solver_tol: 1e-12,
            max_iter: 200_000,
            max_steps: 1000,
        }
    }
}

impl AmrConfig {
    pub fn validate(&self, initial_dof: usize) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidConfig(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        if self.max_dof <= initial_dof {
            return Err(Error::InvalidConfig(format!(
                "max_dof {} must exceed the initial dof count {initial_dof}",
                self.max_dof
            )));
        }
        if !(self.solver_tol > 0.0) {
            return Err(Error::InvalidConfig("solver tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub step: usize,
    pub dof: usize,
    pub error: Option<f64>,
    pub estimator: f64,
    pub effectivity: Option<f64>,
    pub slope: Option<f64>,
}

/// Everything computed on one mesh of the loop.
pub struct StepState<'a> {
    pub step: usize,
    pub mesh: &'a Mesh,
    pub coef: &'a CoefficientField,
    pub solution: &'a P1Solution,
    pub flux: &'a NumericalFlux,
    pub g_n: &'a [f64],
    pub indicators: &'a IndicatorSet,
    pub record: &'a ConvergenceRecord,
}

#[derive(Debug, Clone)]
pub struct AmrOutcome {
    pub records: Vec<ConvergenceRecord>,
    pub mesh: Mesh,
    pub solution: P1Solution,
    pub indicators: IndicatorSet,
}

/// Smallest set whose squared indicators reach `theta^2` of the total, taken
/// greedily by decreasing value with ties to the lower id.
pub fn dorfler_mark(values: &[f64], theta: f64) -> Vec<usize> {
    let total: f64 = values.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let target = theta * theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for i in order {
        if acc >= target || values[i] == 0.0 {
            break;
        }
        acc += values[i] * values[i];
        marked.push(i);
    }
    marked
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

fn trailing_slope(records: &[ConvergenceRecord]) -> Option<f64> {
    let tail = &records[records.len().saturating_sub(SLOPE_WINDOW)..];
    let pts: Vec<(f64, f64)> = tail.iter().map(|r| (r.dof as f64, r.error.unwrap_or(r.estimator))).collect();
    loglog_slope(&pts)
}

/// Energy error of `solution`; boundary form when the exact solution has
/// singular points, volume quadrature otherwise.
pub fn exact_energy_error(
    problem: &ProblemSpec,
    mesh: &Mesh,
    coef: &CoefficientField,
    solution: &P1Solution,
) -> Result<Option<f64>> {
    let Some(exact) = &problem.exact else { return Ok(None) };
    let e = if exact.singular_points.is_empty() {
        energy_error(mesh, solution, &*exact.gradient, coef, &[], 5)?
    } else {
        energy_error_by_boundary(mesh, solution, &*exact.value, exact.energy_norm, coef, &exact.singular_points)
    };
    Ok(Some(e))
}

pub fn amr_loop(problem: &ProblemSpec, config: &AmrConfig) -> Result<AmrOutcome> {
    amr_loop_observed(problem, config, |_| Ok(()))
}

/// [`amr_loop`] calling `observe` on every step before marking.
pub fn amr_loop_observed(
    problem: &ProblemSpec,
    config: &AmrConfig,
    mut observe: impl FnMut(&StepState<'_>) -> Result<()>,
) -> Result<AmrOutcome> {
    let mut mesh = problem.mesh.clone();
    let mut guess: Option<Vec<f64>> = None;
    let mut records: Vec<ConvergenceRecord> = Vec::new();
    for step in 0.. {
        problem.check_alignment(&mesh)?;
        let coef = CoefficientField::from_regions(&mesh, &problem.regions)?;
        let system = assemble(&mesh, &coef, &*problem.source, &problem.boundary)?;
        let dof = system.free.len();
        if step == 0 {
            config.validate(dof)?;
        }
        let solution = solve_from(&system, guess.as_deref(), config.solver_tol, config.max_iter)?;
        let flux = numerical_flux(&mesh, &solution, &coef);
        let g_n = problem.boundary.neumann_values(&mesh);
        let input = EstimateInput {
            mesh: &mesh,
            coef: &coef,
            solution: &solution,
            flux: &flux,
            g_n: &g_n,
            source: &*problem.source,
        };
        let indicators = estimate(&input, config.estimator)?;
        let error = exact_energy_error(problem, &mesh, &coef, &solution)?;
        let estimator = indicators.estimate();
        let mut record = ConvergenceRecord {
            step,
            dof,
            error,
            estimator,
            effectivity: error.filter(|&e| e > 0.0).map(|e| estimator / e),
            slope: None,
        };
        records.push(record.clone());
        record.slope = trailing_slope(&records);
        *records.last_mut().expect("just pushed") = record.clone();
        observe(&StepState {
            step,
            mesh: &mesh,
            coef: &coef,
            solution: &solution,
            flux: &flux,
            g_n: &g_n,
            indicators: &indicators,
            record: &record,
        })?;

        let negligible = estimator <= ZERO_ESTIMATE_RTOL * flux.weighted_norm(&mesh, &coef);
        let marked = dorfler_mark(&indicators.marking_values(&mesh), config.theta);
        if dof > config.max_dof || negligible || marked.is_empty() || step + 1 >= config.max_steps {
            return Ok(AmrOutcome { records, mesh, solution, indicators });
        }
        let (refined, parents) = bisect_with_parents(&mesh, &marked, DEFAULT_CLOSURE_LIMIT)?;
        let mut values = solution.values;
        let added: Vec<f64> = parents.iter().map(|&(a, b)| 0.5 * (values[a] + values[b])).collect();
        values.extend(added);
        guess = Some(values);
        mesh = refined;
    }
    unreachable!("the loop returns")
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Distance from the singular point beyond which elements are compared.
pub const LOCALIZATION_RADIUS: f64 = 0.5;

/// Median diameter of elements touching an interface edge over the median
/// diameter of all elements, both restricted to centroids farther than
/// [`LOCALIZATION_RADIUS`] from `singular_point`.
pub fn refinement_localization_metric(mesh: &Mesh, singular_point: Point, interface_edges: &[usize]) -> Result<f64> {
    let mut touching = vec![false; mesh.num_triangles()];
    for &e in interface_edges {
        let edge = mesh.edge(e);
        touching[edge.minus] = true;
        if let Some(p) = edge.plus {
            touching[p] = true;
        }
    }
    let far: Vec<usize> = (0..mesh.num_triangles())
        .filter(|&t| (mesh.centroid(t) - singular_point).norm() > LOCALIZATION_RADIUS)
        .collect();
    let all: Vec<f64> = far.iter().map(|&t| mesh.diameter(t)).collect();
    let near_interface: Vec<f64> = far.iter().filter(|&&t| touching[t]).map(|&t| mesh.diameter(t)).collect();
    if all.is_empty() {
        return Err(Error::EmptyCategory("elements away from the singular point"));
    }
    if near_interface.is_empty() {
        return Err(Error::EmptyCategory("interface elements away from the singular point"));
    }
    Ok(median(near_interface) / median(all))
}
