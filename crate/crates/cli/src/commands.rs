use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;
use wpgcr::bounds::{self, BoundReport, BoundsError, HermitianSplit};
use wpgcr::fem::{self, CdrProblemSpec, FemError};
use wpgcr::io::{self, ExperimentReport, IoError, ProblemDescription, ReportMetadata};
use wpgcr::krylov::{KrylovError, LinearSystem, SolveConfig, SolveResult, SolveStatus, SolverKind};
use wpgcr::linalg::{cholesky, densify, CsrMatrix, LinalgError, DENSIFY_LIMIT};
use wpgcr::schwarz::{self, PartitionSpec, SchwarzError, SchwarzMode};
use wpgcr::weighted::{PreconditionerHandle, WeightError, WeightOperator};

use crate::args::{
    parse_cdr, solver_name, BcArg, BoundsArgs, CdrParams, Command, FormatArg, LayoutArg, OutputArgs, PrecondArg,
    ProblemArgs, RhoTableArgs, SolveArgs, SolverArgs, StopNormArg, SweepArgs, SweepAxis, WeightArg,
};

/// Largest mesh size for iterative solves without `--force`.
pub const SOLVE_MESH_BUDGET: usize = 200;
/// Largest mesh size for dense eigen-analysis without `--force`.
pub const DENSE_MESH_BUDGET: usize = 50;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_MAX_ITER: u8 = 2;
pub const EXIT_BREAKDOWN: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Schwarz(#[from] SchwarzError),
    #[error(transparent)]
    Krylov(#[from] KrylovError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn exit_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Converged => EXIT_OK,
        SolveStatus::MaxIter => EXIT_MAX_ITER,
        SolveStatus::Breakdown => EXIT_BREAKDOWN,
    }
}

pub fn run(command: &Command) -> Result<u8, CliError> {
    match command {
        Command::Solve(a) => cmd_solve(a),
        Command::RhoTable(a) => cmd_rho_table(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bounds(a) => cmd_bounds(a),
    }
}

/// An assembled linear system plus what is needed to partition it.
pub struct Problem {
    pub a: CsrMatrix<f64>,
    /// Symmetric part of `a`, used by the symmetric preconditioners.
    pub sym: CsrMatrix<f64>,
    pub rhs: Vec<f64>,
    pub lattice: Vec<(usize, usize)>,
    pub description: ProblemDescription,
    pub spec: Option<CdrProblemSpec<f64>>,
}

impl Problem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }
}

pub fn cdr_spec(params: CdrParams, bc: BcArg, no_convection: bool) -> CdrProblemSpec<f64> {
    let spec = fem::paper_coefficients(params.m, params.nu, params.c0).with_bc(bc.into());
    if no_convection {
        spec.without_convection()
    } else {
        spec
    }
}

pub fn cdr_problem(spec: CdrProblemSpec<f64>) -> Result<Problem, CliError> {
    let sys = fem::assemble(&spec)?;
    Ok(Problem {
        a: sys.a_matrix(),
        lattice: sys.dof_lattice(),
        sym: sys.m_matrix,
        rhs: sys.rhs,
        description: ProblemDescription::Cdr(spec.describe()),
        spec: Some(spec),
    })
}

fn matrix_problem(args: &ProblemArgs, path: &Path) -> Result<Problem, CliError> {
    let first: CsrMatrix<f64> = io::read_matrix_market(path)?;
    let n = first.rows();
    if first.cols() != n {
        return Err(usage(format!("{} is {}x{}, expected a square matrix", path.display(), n, first.cols())));
    }
    let (a, sym) = match &args.matrix_skew {
        Some(skew_path) => {
            let skew: CsrMatrix<f64> = io::read_matrix_market(skew_path)?;
            if skew.rows() != n || skew.cols() != n {
                return Err(usage(format!(
                    "{} is {}x{}, expected {n}x{n}",
                    skew_path.display(),
                    skew.rows(),
                    skew.cols()
                )));
            }
            (first.add(&skew)?, first)
        }
        None => {
            let sym = first.symmetric_part()?;
            (first, sym)
        }
    };
    let rhs = if let Some(p) = &args.rhs {
        let v: Vec<f64> = io::read_vector(p)?;
        if v.len() != n {
            return Err(usage(format!("{} has {} entries, expected {n}", p.display(), v.len())));
        }
        v
    } else if args.random_rhs {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
    } else {
        vec![1.0; n]
    };
    Ok(Problem {
        lattice: (0..n).map(|d| (0, d)).collect(),
        description: ProblemDescription::Matrix {
            path: path.display().to_string(),
            dim: n,
            nnz: a.nnz(),
        },
        a,
        sym,
        rhs,
        spec: None,
    })
}

fn check_mesh_budget(m: usize, budget: usize, force: bool, what: &str) -> Result<(), CliError> {
    if m > budget && !force {
        return Err(usage(format!(
            "mesh size m={m} exceeds the {what} budget of m <= {budget}; pass --force to run anyway"
        )));
    }
    Ok(())
}

fn cdr_params(args: &ProblemArgs) -> Result<CdrParams, CliError> {
    args.cdr.as_deref().map(parse_cdr).transpose().map_err(CliError::Usage).map(Option::unwrap_or_default)
}

/// Checks the problem flags and returns the CDR parameters when the problem
/// is a CDR one.
fn validate_problem(args: &ProblemArgs, budget: usize, force: bool, what: &str) -> Result<Option<CdrParams>, CliError> {
    if args.matrix.is_some() {
        return Ok(None);
    }
    if args.cdr.is_none() {
        return Err(usage("give a problem with --cdr m=INT nu=FLOAT c0=FLOAT or --matrix PATH"));
    }
    let params = cdr_params(args)?;
    check_mesh_budget(params.m, budget, force, what)?;
    Ok(Some(params))
}

fn load_problem(args: &ProblemArgs, cdr: Option<CdrParams>) -> Result<Problem, CliError> {
    match (cdr, &args.matrix) {
        (Some(params), _) => cdr_problem(cdr_spec(params, args.bc, args.no_convection)),
        (None, Some(path)) => matrix_problem(args, path),
        (None, None) => Err(usage("no problem given")),
    }
}

/// Solver, preconditioner and weight choices after defaults and validation.
#[derive(Debug, Clone)]
pub struct Plan {
    pub solver: SolverKind,
    pub precond: PrecondArg,
    pub weight: WeightArg,
    pub partition: Option<PartitionSpec>,
    pub config: SolveConfig<f64>,
}

/// Near-square `p × q` grid with `p ≥ q`; strips when `n` is prime.
pub fn auto_partition(n: usize) -> PartitionSpec {
    let q = (1..=n).take_while(|q| q * q <= n).filter(|q| n % q == 0).last().unwrap_or(1);
    if q == 1 {
        PartitionSpec::strips(n)
    } else {
        PartitionSpec::grid(n / q, q)
    }
}

pub fn plan(args: &SolverArgs, is_cdr: bool) -> Result<Plan, CliError> {
    let precond = args.precond.unwrap_or(if is_cdr { PrecondArg::TwoLevel } else { PrecondArg::Identity });
    let symmetric = precond != PrecondArg::OneLevelNonsym;
    let whp = !args.solver.uses_weight();
    let weight = args.weight.unwrap_or(if symmetric { WeightArg::Precond } else { WeightArg::Identity });
    if whp && !symmetric {
        return Err(usage("whp-gcr variants need a symmetric preconditioner"));
    }
    if whp && weight == WeightArg::Identity && precond != PrecondArg::Identity {
        return Err(usage("whp-gcr variants weight with the preconditioner; drop --weight identity"));
    }
    if weight == WeightArg::Precond && !symmetric {
        return Err(usage("--weight precond needs a symmetric preconditioner"));
    }
    if !(args.tol > 0.0) {
        return Err(usage(format!("--tol must be positive, got {}", args.tol)));
    }
    if args.n_sub == 0 {
        return Err(usage("--n-sub must be at least 1"));
    }
    let partition = if precond == PrecondArg::Identity {
        None
    } else {
        let spec = match args.layout {
            LayoutArg::Auto if is_cdr => auto_partition(args.n_sub),
            LayoutArg::Auto | LayoutArg::Strips => PartitionSpec::strips(args.n_sub),
            LayoutArg::Grid { .. } if !is_cdr => {
                return Err(usage("grid layouts need a CDR mesh; use --layout strips with --matrix"));
            }
            LayoutArg::Grid { p, q } => {
                if p * q != args.n_sub {
                    return Err(usage(format!("grid {p}x{q} does not have --n-sub {} subdomains", args.n_sub)));
                }
                PartitionSpec::grid(p, q)
            }
        };
        Some(spec.with_overlap(args.overlap))
    };
    let config = SolveConfig::default()
        .with_tolerance(args.tol)
        .with_max_iterations(args.max_iter)
        .with_stopping_norm(args.stop_norm.into())
        .with_breakdown_policy(args.breakdown.into());
    Ok(Plan {
        solver: args.solver,
        precond,
        weight,
        partition,
        config,
    })
}

pub fn preconditioner(problem: &Problem, plan: &Plan) -> Result<PreconditionerHandle<f64>, CliError> {
    let Some(partition) = plan.partition else {
        return Ok(PreconditionerHandle::identity(problem.dim()));
    };
    let maps = schwarz::build_partition(&problem.lattice, &problem.sym, &partition)?;
    let (matrix, mode) = match plan.precond {
        PrecondArg::OneLevel => (&problem.sym, SchwarzMode::OneLevelSym),
        PrecondArg::TwoLevel => (&problem.sym, SchwarzMode::TwoLevelSym),
        PrecondArg::OneLevelNonsym => (&problem.a, SchwarzMode::OneLevelNonsym),
        PrecondArg::Identity => unreachable!("identity has no partition"),
    };
    Ok(schwarz::build_preconditioner(matrix, &maps, mode)?.into_handle())
}

/// `W` for the plan: `H` for right preconditioning, `H⁻¹` for left.
pub fn weight(h: &PreconditionerHandle<f64>, plan: &Plan) -> Result<WeightOperator<f64>, CliError> {
    let n = h.dim();
    match plan.weight {
        WeightArg::Identity => Ok(WeightOperator::identity(n)),
        WeightArg::Precond if h.is_identity() => Ok(WeightOperator::identity(n)),
        WeightArg::Precond if plan.solver == SolverKind::GcrLeft => {
            if n > DENSIFY_LIMIT {
                return Err(usage(format!(
                    "gcr-left with --weight precond factors H densely; dimension {n} exceeds {DENSIFY_LIMIT}"
                )));
            }
            let mut hd = densify(h.operator().as_ref())?;
            hd.symmetrize();
            let factor = cholesky(&hd)?;
            Ok(WeightOperator::new_unchecked(Arc::new(factor)).with_inverse(Arc::new(hd)))
        }
        WeightArg::Precond => h.as_weight().ok_or_else(|| usage("--weight precond needs a symmetric preconditioner")),
    }
}

pub fn solve_problem(problem: &Problem, plan: &Plan) -> Result<(SolveResult<f64>, f64), CliError> {
    let h = preconditioner(problem, plan)?;
    let w = weight(&h, plan)?;
    let sys = LinearSystem::new(&problem.a, &problem.rhs);
    let start = Instant::now();
    let result = plan.solver.solve(&sys, &h, &w, &plan.config)?;
    Ok((result, start.elapsed().as_secs_f64()))
}

fn metadata(problem: &Problem, plan: &Plan) -> ReportMetadata {
    ReportMetadata {
        problem: problem.description.clone(),
        solver: solver_name(plan.solver),
        preconditioner: plan.precond.name().into(),
        weight: match plan.weight {
            WeightArg::Identity => "identity".into(),
            WeightArg::Precond => "precond".into(),
        },
        partition: plan.partition,
        rel_tolerance: plan.config.rel_tolerance,
        max_iterations: plan.config.max_iterations,
        stopping_norm: plan.config.stopping_norm,
    }
}

fn output_target(out: &OutputArgs) -> Result<Option<(PathBuf, FormatArg)>, CliError> {
    match (&out.out, out.format) {
        (None, Some(_)) => Err(usage("--format needs --out")),
        (None, None) => Ok(None),
        (Some(p), Some(f)) => Ok(Some((p.clone(), f))),
        (Some(p), None) => {
            let csv = p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
            Ok(Some((p.clone(), if csv { FormatArg::Csv } else { FormatArg::Json })))
        }
    }
}

fn output_error(path: &Path, e: impl std::error::Error + Send + Sync + 'static) -> CliError {
    CliError::Output {
        path: path.to_path_buf(),
        source: Box::new(e),
    }
}

fn write_json<S: Serialize>(value: &S, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| output_error(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| output_error(path, e))
}

fn write_csv<S: Serialize>(rows: &[S], path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| output_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| output_error(path, e))?;
    }
    w.flush().map_err(|e| output_error(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.6}"))
}

pub fn cmd_solve(args: &SolveArgs) -> Result<u8, CliError> {
    let cdr = validate_problem(&args.problem, SOLVE_MESH_BUDGET, args.solver.force, "solve")?;
    if args.with_bounds {
        if let Some(p) = cdr {
            check_mesh_budget(p.m, DENSE_MESH_BUDGET, args.solver.force, "dense eigen")?;
        }
    }
    let plan = plan(&args.solver, cdr.is_some())?;
    let target = output_target(&args.output)?;
    let problem = load_problem(&args.problem, cdr)?;

    let (result, seconds) = solve_problem(&problem, &plan)?;
    let mut report = ExperimentReport::from_result(metadata(&problem, &plan), &result, seconds);
    if args.with_bounds {
        let h = preconditioner(&problem, &plan)?;
        let w = weight(&h, &plan)?;
        report.bounds = Some(bound_report(&problem, &h, &w)?);
    }
    match target {
        Some((path, FormatArg::Json)) => io::write_report_json(&report, &path)?,
        Some((path, FormatArg::Csv)) => io::write_report_csv(&result.trace.residuals, &path)?,
        None => {}
    }

    let rel = result.trace.relative_weighted().last().copied().unwrap_or(0.0);
    println!(
        "{} on {} dofs, preconditioner {}, weight {}",
        report.metadata.solver,
        problem.dim(),
        report.metadata.preconditioner,
        report.metadata.weight
    );
    println!("status: {}", status_name(result.status()));
    println!("iterations: {}", result.iterations);
    println!("relative weighted residual: {rel:.3e}");
    if let Some(b) = result.trace.breakdown {
        println!("breakdown at iteration {} (gamma = {:.3e})", b.iteration, b.gamma);
    }
    Ok(exit_code(result.status()))
}

pub fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIter => "max_iter",
        SolveStatus::Breakdown => "breakdown",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoRow {
    pub m: usize,
    pub h: f64,
    pub rho: Option<f64>,
    pub analytic_bound: Option<f64>,
    pub note: Option<String>,
}

pub fn rho_rows(args: &RhoTableArgs) -> Result<Vec<RhoRow>, CliError> {
    if args.meshes.is_empty() {
        return Err(usage("--m needs at least one mesh size"));
    }
    for &m in &args.meshes {
        parse_cdr(&[format!("m={m}"), format!("nu={}", args.nu), format!("c0={}", args.c0)]).map_err(CliError::Usage)?;
    }
    let mut rows = Vec::with_capacity(args.meshes.len());
    for &m in &args.meshes {
        let h = 1.0 / m as f64;
        if m > DENSE_MESH_BUDGET && !args.force {
            rows.push(RhoRow {
                m,
                h,
                rho: None,
                analytic_bound: None,
                note: Some(format!("skipped: dense eigen budget is m <= {DENSE_MESH_BUDGET}, pass --force")),
            });
            continue;
        }
        let params = CdrParams {
            m,
            nu: args.nu,
            c0: args.c0,
        };
        let spec = cdr_spec(params, args.bc, args.no_convection);
        let sys = fem::assemble(&spec)?;
        let split = HermitianSplit::from_parts(&sys.m_matrix, &sys.n_matrix)?;
        rows.push(RhoRow {
            m,
            h,
            rho: Some(bounds::spectral_radius_skew(&split)?),
            analytic_bound: Some(bounds::analytic_rho_bound(&spec)?),
            note: None,
        });
    }
    Ok(rows)
}

pub fn cmd_rho_table(args: &RhoTableArgs) -> Result<u8, CliError> {
    let target = output_target(&args.output)?;
    let rows = rho_rows(args)?;
    println!("{:>6}  {:>10}  {:>10}  {:>10}", "m", "h", "rho", "bound");
    for r in &rows {
        match &r.note {
            Some(note) => println!("{:>6}  {:>10.6}  {note}", r.m, r.h),
            None => println!("{:>6}  {:>10.6}  {:>10}  {:>10}", r.m, r.h, fmt_opt(r.rho), fmt_opt(r.analytic_bound)),
        }
    }
    match target {
        Some((path, FormatArg::Json)) => write_json(&rows, &path)?,
        Some((path, FormatArg::Csv)) => write_csv(&rows, &path)?,
        None => {}
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub solver: String,
    pub n_subdomains: usize,
    pub m: usize,
    pub nu: f64,
    pub c0: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

fn default_values(axis: SweepAxis) -> Vec<String> {
    let v: &[&str] = match axis {
        SweepAxis::NSubdomains => &["4", "8", "16"],
        SweepAxis::Mesh => &["20", "40", "60"],
        SweepAxis::Coefficient => &["0.1", "1", "10"],
        SweepAxis::InnerProduct => &["4", "8"],
    };
    v.iter().map(|s| s.to_string()).collect()
}

/// One sweep point: the problem parameters and the solver runs to make.
struct SweepPoint {
    value: String,
    params: CdrParams,
    runs: Vec<SolverArgs>,
}

fn sweep_points(args: &SweepArgs) -> Result<Vec<SweepPoint>, CliError> {
    if args.problem.matrix.is_some() {
        return Err(usage("sweeps run on the CDR problem; use --cdr"));
    }
    let base = cdr_params(&args.problem)?;
    let values = args.values.clone().unwrap_or_else(|| default_values(args.axis));
    if values.is_empty() {
        return Err(usage("--values needs at least one entry"));
    }
    let mut points = Vec::with_capacity(values.len());
    for value in values {
        let bad = || usage(format!("bad sweep value `{value}`"));
        let mut params = base;
        let mut solver = args.solver.clone();
        match args.axis {
            SweepAxis::NSubdomains | SweepAxis::InnerProduct => solver.n_sub = value.parse().map_err(|_| bad())?,
            SweepAxis::Mesh => params.m = value.parse().map_err(|_| bad())?,
            SweepAxis::Coefficient => {
                let c: f64 = value.parse().map_err(|_| bad())?;
                params.nu = c;
                params.c0 = c;
            }
        }
        parse_cdr(&[format!("m={}", params.m), format!("nu={}", params.nu), format!("c0={}", params.c0)])
            .map_err(CliError::Usage)?;
        check_mesh_budget(params.m, SOLVE_MESH_BUDGET, args.solver.force, "solve")?;
        let runs = if args.axis == SweepAxis::InnerProduct {
            let mut gmres = solver.clone();
            gmres.solver = SolverKind::GmresOracle;
            gmres.weight = Some(WeightArg::Identity);
            gmres.stop_norm = StopNormArg::Euclidean;
            let mut whp = solver;
            whp.solver = SolverKind::WhpGcr;
            whp.weight = None;
            whp.stop_norm = StopNormArg::Euclidean;
            vec![gmres, whp]
        } else {
            vec![solver]
        };
        for r in &runs {
            plan(r, true)?;
        }
        points.push(SweepPoint { value, params, runs });
    }
    Ok(points)
}

pub fn sweep_rows(args: &SweepArgs) -> Result<Vec<SweepRow>, CliError> {
    let points = sweep_points(args)?;
    let mut rows = Vec::new();
    for point in points {
        let problem = cdr_problem(cdr_spec(point.params, args.problem.bc, args.problem.no_convection))?;
        for run in &point.runs {
            let plan = plan(run, true)?;
            let (result, _) = solve_problem(&problem, &plan)?;
            rows.push(SweepRow {
                value: point.value.clone(),
                solver: solver_name(plan.solver),
                n_subdomains: run.n_sub,
                m: point.params.m,
                nu: point.params.nu,
                c0: point.params.c0,
                iterations: result.iterations,
                status: result.status(),
            });
        }
    }
    Ok(rows)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<u8, CliError> {
    let target = output_target(&args.output)?;
    let rows = sweep_rows(args)?;
    println!("{:>8}  {:>14}  {:>4}  {:>4}  {:>8}  {:>8}  {:>6}  status", "value", "solver", "N", "m", "nu", "c0", "iters");
    for r in &rows {
        println!(
            "{:>8}  {:>14}  {:>4}  {:>4}  {:>8}  {:>8}  {:>6}  {}",
            r.value,
            r.solver,
            r.n_subdomains,
            r.m,
            r.nu,
            r.c0,
            r.iterations,
            status_name(r.status)
        );
    }
    match target {
        Some((path, FormatArg::Json)) => write_json(&rows, &path)?,
        Some((path, FormatArg::Csv)) => write_csv(&rows, &path)?,
        None => {}
    }
    Ok(rows.iter().map(|r| exit_code(r.status)).max().unwrap_or(EXIT_OK))
}

fn bound_report(
    problem: &Problem,
    h: &PreconditionerHandle<f64>,
    w: &WeightOperator<f64>,
) -> Result<BoundReport<f64>, CliError> {
    let report = bounds::compute_bound_report(&problem.a, h, w)?;
    Ok(match &problem.spec {
        Some(spec) => report.with_analytic(bounds::analytic_rho_bound(spec)?),
        None => report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsOutput {
    pub kappa: Option<f64>,
    pub rho: Option<f64>,
    pub bound3: Option<f64>,
    pub tolerance: f64,
    pub predicted_iterations: Option<usize>,
    pub predicted_iterations_bound1: Option<usize>,
    pub report: Option<BoundReport<f64>>,
    pub actual_iterations: Option<usize>,
    pub status: Option<SolveStatus>,
}

pub fn bounds_output(args: &BoundsArgs) -> Result<BoundsOutput, CliError> {
    let tol = args.solver.tol;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(usage(format!("--tol must lie in (0, 1), got {tol}")));
    }
    if let (Some(kappa), Some(rho)) = (args.kappa, args.rho) {
        if !(kappa >= 1.0) {
            return Err(usage(format!("--kappa must be at least 1, got {kappa}")));
        }
        if !(rho >= 0.0) {
            return Err(usage(format!("--rho must be nonnegative, got {rho}")));
        }
        let b3 = bounds::bound3_from(kappa, rho);
        return Ok(BoundsOutput {
            kappa: Some(kappa),
            rho: Some(rho),
            bound3: Some(b3),
            tolerance: tol,
            predicted_iterations: bounds::predicted_iterations(b3, tol),
            predicted_iterations_bound1: None,
            report: None,
            actual_iterations: None,
            status: None,
        });
    }

    let cdr = validate_problem(&args.problem, DENSE_MESH_BUDGET, args.solver.force, "dense eigen")?;
    let plan = plan(&args.solver, cdr.is_some())?;
    let problem = load_problem(&args.problem, cdr)?;
    if problem.dim() > DENSIFY_LIMIT {
        return Err(usage(format!("dimension {} exceeds the dense limit of {DENSIFY_LIMIT}", problem.dim())));
    }
    let h = preconditioner(&problem, &plan)?;
    let w = weight(&h, &plan)?;
    let report = bound_report(&problem, &h, &w)?;
    let (actual, status) = if args.no_run {
        (None, None)
    } else {
        let sys = LinearSystem::new(&problem.a, &problem.rhs);
        let result = plan.solver.solve(&sys, &h, &w, &plan.config)?;
        (Some(result.iterations), Some(result.status()))
    };
    Ok(BoundsOutput {
        kappa: report.kappa,
        rho: report.rho,
        bound3: report.bound3,
        tolerance: tol,
        predicted_iterations: report.predicted_iterations(tol),
        predicted_iterations_bound1: report.bound1.and_then(|b| bounds::predicted_iterations(b, tol)),
        report: Some(report),
        actual_iterations: actual,
        status,
    })
}

pub fn cmd_bounds(args: &BoundsArgs) -> Result<u8, CliError> {
    let target = output_target(&args.output)?;
    let out = bounds_output(args)?;
    let count = |n: Option<usize>| n.map_or_else(|| "n/a".to_string(), |n| n.to_string());
    println!("kappa: {}", fmt_opt(out.kappa));
    println!("rho: {}", fmt_opt(out.rho));
    if let Some(r) = &out.report {
        println!("lambda_min(HM): {}", fmt_opt(r.lambda_min));
        println!("lambda_max(HM): {}", fmt_opt(r.lambda_max));
        println!("fov distance: {:.6}", r.fov_distance);
        println!("elman estimate: {:.6}", r.elman);
        println!("bound1: {}", fmt_opt(r.bound1));
        println!("bound2: {}", fmt_opt(r.bound2));
        if let Some(alpha) = r.alpha_analytic {
            println!("analytic rho bound: {alpha:.6}");
        }
    }
    println!("bound3: {}", fmt_opt(out.bound3));
    println!("predicted iterations to {:e} (bound3): {}", out.tolerance, count(out.predicted_iterations));
    if out.report.is_some() {
        println!("predicted iterations to {:e} (bound1): {}", out.tolerance, count(out.predicted_iterations_bound1));
    }
    if let (Some(n), Some(s)) = (out.actual_iterations, out.status) {
        println!("actual iterations: {n} ({})", status_name(s));
    }
    match target {
        Some((path, FormatArg::Json)) => write_json(&out, &path)?,
        Some((path, FormatArg::Csv)) => write_csv(std::slice::from_ref(&flat_bounds(&out)), &path)?,
        None => {}
    }
    Ok(out.status.map_or(EXIT_OK, exit_code))
}

#[derive(Serialize)]
struct FlatBounds {
    kappa: Option<f64>,
    rho: Option<f64>,
    bound1: Option<f64>,
    bound2: Option<f64>,
    bound3: Option<f64>,
    predicted_iterations: Option<usize>,
    actual_iterations: Option<usize>,
}

fn flat_bounds(out: &BoundsOutput) -> FlatBounds {
    FlatBounds {
        kappa: out.kappa,
        rho: out.rho,
        bound1: out.report.as_ref().and_then(|r| r.bound1),
        bound2: out.report.as_ref().and_then(|r| r.bound2),
        bound3: out.bound3,
        predicted_iterations: out.predicted_iterations,
        actual_iterations: out.actual_iterations,
    }
}
