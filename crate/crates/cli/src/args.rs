use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wpgcr::fem::{BoundaryCondition, PENALTY_FACTOR};
use wpgcr::krylov::{BreakdownPolicy, SolverKind, StoppingNorm};

pub const DEFAULT_SEED: u64 = 0xC0FFEE;

#[derive(Debug, Parser)]
#[command(name = "wpgcr", version, about = "Weighted, preconditioned GCR experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one system and write an experiment report.
    Solve(SolveArgs),
    /// Spectral radius of M⁻¹N on the CDR problem for a list of mesh sizes.
    RhoTable(RhoTableArgs),
    /// Iteration counts along one parameter axis.
    Sweep(SweepArgs),
    /// Convergence bounds of a problem, or of given κ and ρ.
    Bounds(BoundsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// CDR problem on the unit square, e.g. `--cdr m=20 nu=1 c0=1`.
    #[arg(long, num_args = 1..=3, value_name = "KEY=VALUE", conflicts_with = "matrix")]
    pub cdr: Option<Vec<String>>,

    /// System matrix in Matrix Market coordinate format.
    #[arg(long, value_name = "PATH")]
    pub matrix: Option<PathBuf>,

    /// Skew part of the operator; `--matrix` then holds the symmetric part.
    #[arg(long, value_name = "PATH", requires = "matrix")]
    pub matrix_skew: Option<PathBuf>,

    /// Right-hand side; all ones by default.
    #[arg(long, value_name = "PATH", requires = "matrix", conflicts_with = "random_rhs")]
    pub rhs: Option<PathBuf>,

    /// Seeded random right-hand side in [-1, 1] instead of all ones.
    #[arg(long, requires = "matrix")]
    pub random_rhs: bool,

    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    #[arg(long, value_enum, default_value_t = BcArg::Elimination)]
    pub bc: BcArg,

    /// Drop the convection field, keeping only the symmetric part.
    #[arg(long)]
    pub no_convection: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, value_parser = parse_solver, default_value = "whp-gcr")]
    pub solver: SolverKind,

    /// Defaults to `two-level` for CDR problems and `identity` for matrices.
    #[arg(long, value_enum)]
    pub precond: Option<PrecondArg>,

    #[arg(long, default_value_t = 4)]
    pub n_sub: usize,

    /// `strips`, `grid:PxQ`, or `auto` (near-square grid on CDR meshes).
    #[arg(long, value_parser = parse_layout, default_value = "auto")]
    pub layout: LayoutArg,

    /// Layers of overlap grown around each subdomain.
    #[arg(long, default_value_t = 2)]
    pub overlap: usize,

    /// Defaults to `precond` when the preconditioner is symmetric.
    #[arg(long, value_enum)]
    pub weight: Option<WeightArg>,

    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,

    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,

    #[arg(long, value_enum, default_value_t = StopNormArg::Weighted)]
    pub stop_norm: StopNormArg,

    #[arg(long, value_enum, default_value_t = BreakdownArg::Halt)]
    pub breakdown: BreakdownArg,

    /// Lift the mesh size budgets.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Inferred from the `--out` extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,

    /// Attach the dense bound report to the JSON output.
    #[arg(long)]
    pub with_bounds: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RhoTableArgs {
    #[arg(long = "m", value_delimiter = ',', default_value = "10,20,30")]
    pub meshes: Vec<usize>,

    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,

    #[arg(long, default_value_t = 1.0)]
    pub c0: f64,

    #[arg(long, value_enum, default_value_t = BcArg::Elimination)]
    pub bc: BcArg,

    #[arg(long)]
    pub no_convection: bool,

    #[arg(long)]
    pub force: bool,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: SweepAxis,

    /// Axis values; subdomain counts, mesh sizes or `c0 = ν` values.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<String>>,

    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    /// Condition number of H M(A); with `--rho`, skips the problem entirely.
    #[arg(long, requires = "rho", conflicts_with_all = ["cdr", "matrix"])]
    pub kappa: Option<f64>,

    #[arg(long, requires = "kappa")]
    pub rho: Option<f64>,

    /// Do not run the solver after computing the bounds.
    #[arg(long)]
    pub no_run: bool,

    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecondArg {
    Identity,
    OneLevel,
    TwoLevel,
    OneLevelNonsym,
}

impl PrecondArg {
    pub fn name(self) -> &'static str {
        match self {
            PrecondArg::Identity => "identity",
            PrecondArg::OneLevel => "one-level",
            PrecondArg::TwoLevel => "two-level",
            PrecondArg::OneLevelNonsym => "one-level-nonsym",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightArg {
    Identity,
    Precond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StopNormArg {
    Weighted,
    Euclidean,
}

impl From<StopNormArg> for StoppingNorm {
    fn from(s: StopNormArg) -> Self {
        match s {
            StopNormArg::Weighted => StoppingNorm::Weighted,
            StopNormArg::Euclidean => StoppingNorm::Euclidean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BreakdownArg {
    Halt,
    Orthodir,
}

impl From<BreakdownArg> for BreakdownPolicy {
    fn from(b: BreakdownArg) -> Self {
        match b {
            BreakdownArg::Halt => BreakdownPolicy::Halt,
            BreakdownArg::Orthodir => BreakdownPolicy::RestartOrthodirStyle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BcArg {
    Elimination,
    Penalization,
}

impl From<BcArg> for BoundaryCondition {
    fn from(b: BcArg) -> Self {
        match b {
            BcArg::Elimination => BoundaryCondition::Elimination,
            BcArg::Penalization => BoundaryCondition::Penalization {
                factor: PENALTY_FACTOR,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SweepAxis {
    #[value(alias = "n-subdomains")]
    NSubdomains,
    Mesh,
    Coefficient,
    #[value(alias = "inner-product")]
    InnerProduct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutArg {
    Auto,
    Strips,
    Grid { p: usize, q: usize },
}

pub fn parse_solver(s: &str) -> Result<SolverKind, String> {
    let with_k = |name: &str, k: &str| -> Result<usize, String> {
        k.parse::<usize>().map_err(|_| format!("`{name}` needs an integer window, got `{k}`"))
    };
    Ok(match s.split_once(':') {
        Some(("orthomin", k)) => SolverKind::Orthomin(with_k("orthomin", k)?),
        Some(("gcr-restart", k)) => {
            let k = with_k("gcr-restart", k)?;
            if k == 0 {
                return Err("`gcr-restart` period must be at least 1".into());
            }
            SolverKind::GcrRestart(k)
        }
        Some(_) => return Err(format!("unknown solver `{s}`")),
        None => match s {
            "gcr" => SolverKind::Gcr,
            "gcr-left" => SolverKind::GcrLeft,
            "whp-gcr" => SolverKind::WhpGcr,
            "whp-gcr-alt-a" => SolverKind::WhpGcrAltA,
            "whp-gcr-alt-b" => SolverKind::WhpGcrAltB,
            "mr" => SolverKind::Mr,
            "gmres-oracle" => SolverKind::GmresOracle,
            _ => return Err(format!("unknown solver `{s}`")),
        },
    })
}

pub fn solver_name(kind: SolverKind) -> String {
    match kind {
        SolverKind::Gcr => "gcr".into(),
        SolverKind::GcrLeft => "gcr-left".into(),
        SolverKind::WhpGcr => "whp-gcr".into(),
        SolverKind::WhpGcrAltA => "whp-gcr-alt-a".into(),
        SolverKind::WhpGcrAltB => "whp-gcr-alt-b".into(),
        SolverKind::Mr => "mr".into(),
        SolverKind::Orthomin(k) => format!("orthomin:{k}"),
        SolverKind::GcrRestart(k) => format!("gcr-restart:{k}"),
        SolverKind::GmresOracle => "gmres-oracle".into(),
    }
}

pub fn parse_layout(s: &str) -> Result<LayoutArg, String> {
    match s {
        "auto" => Ok(LayoutArg::Auto),
        "strips" => Ok(LayoutArg::Strips),
        _ => {
            let dims = s.strip_prefix("grid:").ok_or_else(|| format!("unknown layout `{s}`"))?;
            let (p, q) = dims.split_once(['x', 'X']).ok_or_else(|| format!("grid layout must be `grid:PxQ`, got `{s}`"))?;
            let p = p.parse().map_err(|_| format!("bad grid width `{p}`"))?;
            let q = q.parse().map_err(|_| format!("bad grid height `{q}`"))?;
            if p == 0 || q == 0 {
                return Err("grid dimensions must be positive".into());
            }
            Ok(LayoutArg::Grid { p, q })
        }
    }
}

/// `m`, `nu`, `c0` of a `--cdr` flag. Missing keys default to `m=20`,
/// `nu=1`, `c0=1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdrParams {
    pub m: usize,
    pub nu: f64,
    pub c0: f64,
}

impl Default for CdrParams {
    fn default() -> Self {
        Self { m: 20, nu: 1.0, c0: 1.0 }
    }
}

pub fn parse_cdr(tokens: &[String]) -> Result<CdrParams, String> {
    let mut out = CdrParams::default();
    for tok in tokens {
        let (key, value) = tok.split_once('=').ok_or_else(|| format!("expected KEY=VALUE in --cdr, got `{tok}`"))?;
        let bad = || format!("bad value for `{key}` in --cdr: `{value}`");
        match key {
            "m" => out.m = value.parse().map_err(|_| bad())?,
            "nu" => out.nu = value.parse().map_err(|_| bad())?,
            "c0" => out.c0 = value.parse().map_err(|_| bad())?,
            _ => return Err(format!("unknown --cdr key `{key}` (expected m, nu, c0)")),
        }
    }
    if out.m < 2 {
        return Err(format!("--cdr m must be at least 2, got {}", out.m));
    }
    if !(out.nu > 0.0) {
        return Err(format!("--cdr nu must be positive, got {}", out.nu));
    }
    if !(out.c0 >= 0.0) {
        return Err(format!("--cdr c0 must be nonnegative, got {}", out.c0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_names_round_trip() {
        for s in [
            "gcr",
            "gcr-left",
            "whp-gcr",
            "whp-gcr-alt-a",
            "whp-gcr-alt-b",
            "mr",
            "orthomin:3",
            "gcr-restart:5",
            "gmres-oracle",
        ] {
            assert_eq!(solver_name(parse_solver(s).unwrap()), s);
        }
        assert!(parse_solver("orthomin").is_err());
        assert!(parse_solver("orthomin:x").is_err());
        assert!(parse_solver("gcr-restart:0").is_err());
        assert!(parse_solver("cg").is_err());
    }

    #[test]
    fn layouts() {
        assert_eq!(parse_layout("strips").unwrap(), LayoutArg::Strips);
        assert_eq!(parse_layout("grid:4x2").unwrap(), LayoutArg::Grid { p: 4, q: 2 });
        assert!(parse_layout("grid:4").is_err());
        assert!(parse_layout("grid:0x2").is_err());
    }

    #[test]
    fn cdr_tokens() {
        let toks = |s: &str| s.split(' ').map(String::from).collect::<Vec<_>>();
        assert_eq!(
            parse_cdr(&toks("m=30 nu=0.1 c0=0.1")).unwrap(),
            CdrParams { m: 30, nu: 0.1, c0: 0.1 }
        );
        assert_eq!(parse_cdr(&toks("m=12")).unwrap().nu, 1.0);
        assert!(parse_cdr(&toks("m=1")).is_err());
        assert!(parse_cdr(&toks("nu=0")).is_err());
        assert!(parse_cdr(&toks("k=3")).is_err());
        assert!(parse_cdr(&toks("m")).is_err());
    }
}
