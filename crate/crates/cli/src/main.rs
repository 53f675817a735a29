use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fluxzz_core::adaptivity::{amr_loop, AmrConfig};
use fluxzz_core::estimators::EstimatorKind;
use fluxzz_core::fem::{numerical_flux, CoefficientField};
use fluxzz_core::mesh::{read_mesh, write_mesh};
use fluxzz_core::problems::from_name;
use fluxzz_core::recovery::recover;
use fluxzz_core::report::{flux_csv, history_csv, indicators_csv, render_mesh_svg, RunManifest};
use fluxzz_core::verify::{all_passed, formula_suite, invariant_suite, DEFAULT_SEED};
use fluxzz_core::Error;

#[derive(Parser)]
#[command(name = "fluxzz", version, about = "Adaptive P1 finite elements with flux-recovery error estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solve-estimate-mark-refine loop and write its outputs.
    Run(RunArgs),
    /// Check closed forms against quadrature and structural invariants.
    Verify(VerifyArgs),
    /// Render a mesh file as SVG, optionally colored by element values.
    Render(RenderArgs),
}

#[derive(Args)]
struct RunArgs {
    /// kellogg, smooth or counterexample2d[:k=<value>]
    #[arg(long)]
    problem: String,
    #[arg(long, default_value = "rt-element")]
    estimator: EstimatorKind,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long, default_value_t = 20_000)]
    max_dof: usize,
    #[arg(long, default_value_t = 1e-12)]
    solver_tol: f64,
    /// Conjugate gradient iteration cap.
    #[arg(long, default_value_t = 200_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1000)]
    max_steps: usize,
    /// Output directory.
    #[arg(long, env = "FLUXZZ_OUT")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Formulas,
    Invariants,
    All,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: Suite,
    /// Random cases for the formula suite.
    #[arg(long, default_value_t = 1000)]
    cases: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct RenderArgs {
    /// Mesh in the text format written by `run`.
    #[arg(long)]
    mesh: PathBuf,
    /// Indicator CSV whose element rows color the triangles.
    #[arg(long)]
    values: Option<PathBuf>,
    /// Target file; defaults to mesh.svg under FLUXZZ_OUT, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::Parse { .. } | Error::Io(_) => Failure::Usage(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let problem = from_name(&args.problem)?;
    let config = AmrConfig {
        estimator: args.estimator,
        theta: args.theta,
        max_dof: args.max_dof,
        solver_tol: args.solver_tol,
        max_iter: args.max_iter,
        max_steps: args.max_steps,
    };
    fs::create_dir_all(&args.out).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", args.out.display())))?;
    let outcome = amr_loop(&problem, &config)?;

    let mut outputs = vec!["history.csv", "mesh_final.txt", "mesh_final.svg", "indicators.csv"];
    write(&args.out, "history.csv", &history_csv(&outcome.records))?;
    write(&args.out, "mesh_final.txt", &write_mesh(&outcome.mesh))?;
    write(&args.out, "mesh_final.svg", &render_mesh_svg(&outcome.mesh, Some(&outcome.indicators.element)))?;
    write(&args.out, "indicators.csv", &indicators_csv(&outcome.indicators))?;
    if let Some(space) = config.estimator.space() {
        let coef = CoefficientField::from_regions(&outcome.mesh, &problem.regions)?;
        let flux = numerical_flux(&outcome.mesh, &outcome.solution, &coef);
        let g_n = problem.boundary.neumann_values(&outcome.mesh);
        let field = recover(space, &outcome.mesh, &coef, &flux, &g_n)?;
        write(&args.out, "flux.csv", &flux_csv(&field))?;
        outputs.push("flux.csv");
    }
    outputs.push("manifest.json");
    let manifest = RunManifest {
        problem: args.problem,
        estimator: config.estimator.name().to_string(),
        theta: config.theta,
        max_dof: config.max_dof,
        solver_tol: config.solver_tol,
        max_iter: config.max_iter,
        max_steps: config.max_steps,
        deterministic: true,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write(&args.out, "manifest.json", &manifest.to_json())?;

    let last = outcome.records.last().expect("at least one step");
    println!(
        "{} steps, final dof {}, estimator {:.6e}{}",
        outcome.records.len(),
        last.dof,
        last.estimator,
        match (last.error, last.effectivity) {
            (Some(e), Some(i)) => format!(", error {e:.6e}, effectivity {i:.4}"),
            (Some(e), None) => format!(", error {e:.6e}"),
            _ => String::new(),
        }
    );
    println!("outputs in {}", args.out.display());
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<bool, Failure> {
    let mut checks = Vec::new();
    if matches!(args.suite, Suite::Formulas | Suite::All) {
        checks.extend(formula_suite(args.cases, args.seed)?);
    }
    if matches!(args.suite, Suite::Invariants | Suite::All) {
        checks.extend(invariant_suite(args.seed)?);
    }
    for c in &checks {
        println!("{c}");
    }
    let ok = all_passed(&checks);
    println!("{} of {} checks passed", checks.iter().filter(|c| c.passed()).count(), checks.len());
    Ok(ok)
}

/// Element values from the `<kind>:element` rows of an indicator CSV.
fn element_values(text: &str) -> Result<Vec<f64>, Failure> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(Failure::Usage(format!("line {}: expected kind,id,value", i + 1)));
        }
        if !f[0].ends_with(":element") {
            continue;
        }
        let id: usize = f[1].parse().map_err(|_| Failure::Usage(format!("line {}: bad id", i + 1)))?;
        if id != values.len() {
            return Err(Failure::Usage(format!("line {}: element ids must be consecutive", i + 1)));
        }
        values.push(f[2].parse().map_err(|_| Failure::Usage(format!("line {}: bad value", i + 1)))?);
    }
    Ok(values)
}

fn render(args: RenderArgs) -> Result<(), Failure> {
    let read =
        |p: &Path| fs::read_to_string(p).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", p.display())));
    let mesh = read_mesh(&read(&args.mesh)?)?;
    let values = args.values.as_deref().map(|p| read(p).and_then(|t| element_values(&t))).transpose()?;
    if let Some(v) = &values {
        if v.len() != mesh.num_triangles() {
            return Err(Failure::Usage(format!("{} values for {} triangles", v.len(), mesh.num_triangles())));
        }
    }
    let svg = render_mesh_svg(&mesh, values.as_deref());
    let target = args.out.or_else(|| std::env::var_os("FLUXZZ_OUT").map(|d| PathBuf::from(d).join("mesh.svg")));
    match target {
        Some(p) => fs::write(&p, svg).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{svg}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a).map(|_| true),
        Command::Verify(a) => verify(a),
        Command::Render(a) => render(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
    }
}
