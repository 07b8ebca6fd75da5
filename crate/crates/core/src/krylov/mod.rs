//! Weighted and preconditioned GCR solvers and an Arnoldi GMRES reference.
//!
//! | function | preconditioning | inner product |
//! |---|---|---|
//! | [`wp_gcr_right`] | right, any `H` | any SPD `W` |
//! | [`wp_gcr_left`] | left, any `H` | any SPD `W` |
//! | [`whp_gcr`], [`whp_gcr_alt_a`], [`whp_gcr_alt_b`] | right, SPD `H` | `W = H` |
//! | [`gmres_arnoldi_oracle`] | right, any `H` | any SPD `W` |
//!
//! Truncation ([`SolveConfig::truncation_window`]) and restarts
//! ([`SolveConfig::restart_period`]) apply to every GCR variant;
//! [`wp_mr`], [`wp_orthomin_k`] and [`wp_gcr_restarted`] are shorthands for
//! the right-preconditioned one.

mod directions;
mod gcr;
mod gmres;
mod left;
mod whp;

pub use gcr::{wp_gcr_restarted, wp_gcr_right, wp_mr, wp_orthomin_k};
pub use gmres::gmres_arnoldi_oracle;
pub use left::wp_gcr_left;
pub use whp::{whp_gcr, whp_gcr_alt_a, whp_gcr_alt_b};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::LinearOperator;
use crate::weighted::{PreconditionerHandle, WeightError, WeightOperator};
use crate::Real;

/// Relative threshold on `|γ_i|` below which a step counts as a breakdown.
pub const BREAKDOWN_TOL: f64 = 1e-14;
/// Loss of orthogonality that triggers a second Gram-Schmidt pass.
pub const REORTH_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KrylovError {
    #[error("dimension mismatch: {what} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("this solver requires a hermitian (SPD) preconditioner")]
    NotHermitianPreconditioner,
    #[error(transparent)]
    Weight(#[from] WeightError),
}

/// `A x = b` with an optional initial guess (zero by default).
#[derive(Clone, Copy)]
pub struct LinearSystem<'a, T> {
    pub a: &'a dyn LinearOperator<T>,
    pub b: &'a [T],
    pub x0: Option<&'a [T]>,
}

impl<'a, T: Real> LinearSystem<'a, T> {
    pub fn new(a: &'a dyn LinearOperator<T>, b: &'a [T]) -> Self {
        Self { a, b, x0: None }
    }

    pub fn with_initial_guess(mut self, x0: &'a [T]) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StoppingNorm {
    #[default]
    Weighted,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BreakdownPolicy {
    /// Stop and report the breakdown.
    #[default]
    Halt,
    /// Take one recovery direction built from `H q_i` (the preconditioned image
    /// of the current direction), orthogonalized against the stored ones.
    RestartOrthodirStyle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig<T> {
    pub max_iterations: usize,
    /// Stop when `‖r_i‖ < rel_tolerance · ‖b‖` in the stopping norm.
    pub rel_tolerance: T,
    /// Clear the direction set every `k` iterations (GCR(k)).
    pub restart_period: Option<usize>,
    /// Orthogonalize against the last `k` directions only (Orthomin(k); 0 is MR).
    pub truncation_window: Option<usize>,
    pub stopping_norm: StoppingNorm,
    pub breakdown_policy: BreakdownPolicy,
    /// Second Gram-Schmidt pass when orthogonality is lost beyond
    /// [`REORTH_THRESHOLD`].
    pub reorthogonalize: bool,
    /// Keep every iterate `x_i` in the trace.
    pub record_iterates: bool,
    /// Keep every W-orthogonal image direction in the trace.
    pub record_directions: bool,
    /// Keep every residual vector `r_i` the solver carries.
    pub record_residuals: bool,
}

impl<T: Real> Default for SolveConfig<T> {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_tolerance: T::lit(1e-6),
            restart_period: None,
            truncation_window: None,
            stopping_norm: StoppingNorm::Weighted,
            breakdown_policy: BreakdownPolicy::Halt,
            reorthogonalize: true,
            record_iterates: false,
            record_directions: false,
            record_residuals: false,
        }
    }
}

impl<T: Real> SolveConfig<T> {
    pub fn with_tolerance(mut self, tol: T) -> Self {
        self.rel_tolerance = tol;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn truncated(mut self, k: usize) -> Self {
        self.truncation_window = Some(k);
        self.restart_period = None;
        self
    }

    pub fn restarted(mut self, k: usize) -> Self {
        self.restart_period = Some(k);
        self.truncation_window = None;
        self
    }

    pub fn with_stopping_norm(mut self, norm: StoppingNorm) -> Self {
        self.stopping_norm = norm;
        self
    }

    pub fn with_breakdown_policy(mut self, policy: BreakdownPolicy) -> Self {
        self.breakdown_policy = policy;
        self
    }

    pub fn recording(mut self) -> Self {
        self.record_iterates = true;
        self.record_directions = true;
        self.record_residuals = true;
        self
    }

    pub fn validate(&self) -> Result<(), KrylovError> {
        if self.restart_period.is_some() && self.truncation_window.is_some() {
            return Err(KrylovError::InvalidConfig(
                "restart_period and truncation_window are mutually exclusive".into(),
            ));
        }
        if !(self.rel_tolerance > T::zero()) {
            return Err(KrylovError::InvalidConfig("rel_tolerance must be positive".into()));
        }
        if self.restart_period == Some(0) {
            return Err(KrylovError::InvalidConfig("restart_period must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Breakdown,
}

/// Norms of `r_i`. For left preconditioning `res_w` is `‖H r_i‖_W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord<T> {
    pub iteration: usize,
    pub res_w: T,
    pub res_euclid: T,
}

/// Coefficients of step `i` (the update from `x_i` to `x_{i+1}`) and of the
/// orthogonalization that produced the next direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord<T> {
    pub iteration: usize,
    pub alpha: T,
    pub gamma: T,
    pub delta: T,
    pub beta: Vec<T>,
    pub phi: Vec<T>,
    /// `‖A z_{i+1}‖_W`, when the solver forms it.
    pub az_norm_w: Option<T>,
    /// The step used an Orthodir-style recovery direction.
    pub recovery: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakdownInfo<T> {
    pub iteration: usize,
    pub gamma: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace<T> {
    pub residuals: Vec<ResidualRecord<T>>,
    pub steps: Vec<StepRecord<T>>,
    /// Iterations at which the direction set was cleared.
    pub restarts: Vec<usize>,
    pub breakdown: Option<BreakdownInfo<T>>,
    pub status: SolveStatus,
    #[serde(default = "Vec::new", skip_serializing_if = "Vec::is_empty")]
    pub iterates: Vec<Vec<T>>,
    #[serde(default = "Vec::new", skip_serializing_if = "Vec::is_empty")]
    pub directions: Vec<Vec<T>>,
    #[serde(default = "Vec::new", skip_serializing_if = "Vec::is_empty")]
    pub residual_vectors: Vec<Vec<T>>,
}

impl<T: Real> IterationTrace<T> {
    fn new() -> Self {
        Self {
            residuals: Vec::new(),
            steps: Vec::new(),
            restarts: Vec::new(),
            breakdown: None,
            status: SolveStatus::MaxIter,
            iterates: Vec::new(),
            directions: Vec::new(),
            residual_vectors: Vec::new(),
        }
    }

    pub fn weighted_norms(&self) -> Vec<T> {
        self.residuals.iter().map(|r| r.res_w).collect()
    }

    pub fn euclidean_norms(&self) -> Vec<T> {
        self.residuals.iter().map(|r| r.res_euclid).collect()
    }

    /// `‖r_i‖_W / ‖r_0‖_W` for every recorded residual.
    pub fn relative_weighted(&self) -> Vec<T> {
        let r0 = self.residuals.first().map_or(T::one(), |r| r.res_w);
        self.residuals
            .iter()
            .map(|r| if r0 > T::zero() { r.res_w / r0 } else { T::zero() })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult<T> {
    pub x: Vec<T>,
    pub trace: IterationTrace<T>,
    pub iterations: usize,
}

impl<T: Real> SolveResult<T> {
    pub fn status(&self) -> SolveStatus {
        self.trace.status
    }

    pub fn converged(&self) -> bool {
        self.trace.status == SolveStatus::Converged
    }
}

/// Solver selection used by the experiment drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Gcr,
    GcrLeft,
    WhpGcr,
    WhpGcrAltA,
    WhpGcrAltB,
    Mr,
    Orthomin(usize),
    GcrRestart(usize),
    GmresOracle,
}

impl SolverKind {
    /// Runs the solver. WHP variants ignore `w` and use `W = H`.
    pub fn solve<T: Real>(
        self,
        sys: &LinearSystem<'_, T>,
        h: &PreconditionerHandle<T>,
        w: &WeightOperator<T>,
        cfg: &SolveConfig<T>,
    ) -> Result<SolveResult<T>, KrylovError> {
        match self {
            SolverKind::Gcr => wp_gcr_right(sys, h, w, cfg),
            SolverKind::GcrLeft => wp_gcr_left(sys, h, w, cfg),
            SolverKind::WhpGcr => whp_gcr(sys, h, cfg),
            SolverKind::WhpGcrAltA => whp_gcr_alt_a(sys, h, cfg),
            SolverKind::WhpGcrAltB => whp_gcr_alt_b(sys, h, cfg),
            SolverKind::Mr => wp_mr(sys, h, w, cfg),
            SolverKind::Orthomin(k) => wp_orthomin_k(sys, h, w, k, cfg),
            SolverKind::GcrRestart(k) => wp_gcr_restarted(sys, h, w, k, cfg),
            SolverKind::GmresOracle => gmres_arnoldi_oracle(sys, h, w, cfg),
        }
    }

    pub fn uses_weight(self) -> bool {
        !matches!(self, SolverKind::WhpGcr | SolverKind::WhpGcrAltA | SolverKind::WhpGcrAltB)
    }
}

pub(crate) fn check_dims<T: Real>(
    sys: &LinearSystem<'_, T>,
    h_dim: usize,
    w_dim: Option<usize>,
) -> Result<usize, KrylovError> {
    let n = sys.a.dim();
    let check = |what, found| {
        if found == n {
            Ok(())
        } else {
            Err(KrylovError::DimensionMismatch { what, expected: n, found })
        }
    };
    check("b", sys.b.len())?;
    if let Some(x0) = sys.x0 {
        check("x0", x0.len())?;
    }
    check("H", h_dim)?;
    if let Some(wd) = w_dim {
        check("W", wd)?;
    }
    Ok(n)
}

/// `b - A x` and the initial guess.
pub(crate) fn initial_residual<T: Real>(sys: &LinearSystem<'_, T>) -> (Vec<T>, Vec<T>) {
    let n = sys.dim();
    let x = sys.x0.map_or_else(|| vec![T::zero(); n], <[T]>::to_vec);
    let mut r = sys.b.to_vec();
    if sys.x0.is_some() {
        let ax = sys.a.apply_vec(&x);
        for (ri, ai) in r.iter_mut().zip(ax) {
            *ri -= ai;
        }
    }
    (x, r)
}

#[inline]
pub(crate) fn sqrt_clamped<T: Real>(q: T) -> T {
    q.max(T::zero()).sqrt()
}

pub(crate) fn is_breakdown<T: Real>(gamma: T, delta: T, res_w: T) -> bool {
    if !(delta > T::zero()) || !delta.is_finite() {
        return true;
    }
    gamma.abs() <= T::tol(BREAKDOWN_TOL) * delta.sqrt() * res_w
}

/// Trace bookkeeping shared by all solvers.
pub(crate) struct Monitor<'c, T> {
    cfg: &'c SolveConfig<T>,
    pub trace: IterationTrace<T>,
    threshold_w: T,
    threshold_e: T,
}

impl<'c, T: Real> Monitor<'c, T> {
    /// `b_norm_w` and `b_norm_e` are the reference norms in the two stopping
    /// norms.
    pub fn new(cfg: &'c SolveConfig<T>, b_norm_w: T, b_norm_e: T) -> Self {
        Self {
            cfg,
            trace: IterationTrace::new(),
            threshold_w: cfg.rel_tolerance * b_norm_w,
            threshold_e: cfg.rel_tolerance * b_norm_e,
        }
    }

    /// Records `r_i` and reports whether the stopping test passes.
    pub fn residual(&mut self, res_w: T, res_euclid: T) -> bool {
        let iteration = self.trace.residuals.len();
        self.trace.residuals.push(ResidualRecord {
            iteration,
            res_w,
            res_euclid,
        });
        let (res, thr) = match self.cfg.stopping_norm {
            StoppingNorm::Weighted => (res_w, self.threshold_w),
            StoppingNorm::Euclidean => (res_euclid, self.threshold_e),
        };
        res < thr || res == T::zero()
    }

    /// Number of completed steps.
    pub fn iteration(&self) -> usize {
        self.trace.residuals.len().saturating_sub(1)
    }

    pub fn budget_exhausted(&self) -> bool {
        self.iteration() >= self.cfg.max_iterations
    }

    pub fn iterate(&mut self, x: &[T]) {
        if self.cfg.record_iterates {
            self.trace.iterates.push(x.to_vec());
        }
    }

    pub fn residual_vector(&mut self, r: &[T]) {
        if self.cfg.record_residuals {
            self.trace.residual_vectors.push(r.to_vec());
        }
    }

    pub fn direction(&mut self, q: &[T]) {
        if self.cfg.record_directions {
            self.trace.directions.push(q.to_vec());
        }
    }

    pub fn step(&mut self, step: StepRecord<T>) {
        self.trace.steps.push(step);
    }

    pub fn restart(&mut self) {
        let i = self.iteration();
        self.trace.restarts.push(i);
    }

    pub fn breakdown(&mut self, gamma: T) {
        let iteration = self.iteration();
        self.trace.breakdown = Some(BreakdownInfo { iteration, gamma });
    }

    pub fn finish(mut self, x: Vec<T>, status: SolveStatus) -> SolveResult<T> {
        self.trace.status = status;
        let iterations = self.iteration();
        SolveResult {
            x,
            trace: self.trace,
            iterations,
        }
    }
}

/// What the solver should do after `r_{i+1}` was recorded.
pub(crate) enum NextDirection {
    /// Regular GCR direction from the new preconditioned residual.
    Regular,
    /// Clear the direction set, then regular direction.
    Restart,
}

pub(crate) fn next_direction_kind<T: Real>(cfg: &SolveConfig<T>, completed_steps: usize) -> NextDirection {
    match cfg.restart_period {
        Some(k) if completed_steps % k == 0 => NextDirection::Restart,
        _ => NextDirection::Regular,
    }
}

/// Outcome of the breakdown test at the start of a step.
pub(crate) enum StepGate {
    Proceed,
    Halt,
    Recover,
}

pub(crate) fn gate<T: Real>(
    cfg: &SolveConfig<T>,
    monitor: &mut Monitor<'_, T>,
    gamma: T,
    delta: T,
    res_w: T,
    previous_was_recovery: bool,
) -> StepGate {
    if !is_breakdown(gamma, delta, res_w) {
        return StepGate::Proceed;
    }
    let can_recover = cfg.breakdown_policy == BreakdownPolicy::RestartOrthodirStyle
        && !previous_was_recovery
        && delta > T::zero();
    if can_recover {
        StepGate::Recover
    } else {
        monitor.breakdown(gamma);
        StepGate::Halt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let ok = SolveConfig::<f64>::default();
        assert!(ok.validate().is_ok());
        let mut both = ok.clone().truncated(2);
        both.restart_period = Some(3);
        assert!(both.validate().is_err());
        assert!(ok.clone().with_tolerance(0.0).validate().is_err());
        assert!(ok.restarted(0).validate().is_err());
    }

    #[test]
    fn breakdown_test_is_relative() {
        assert!(is_breakdown(0.0, 1.0, 1.0));
        assert!(is_breakdown(1.0, 0.0, 1.0));
        assert!(!is_breakdown(1e-10, 1e-20, 1e-10));
        assert!(is_breakdown(1e-30, 1.0, 1.0));
    }
}
