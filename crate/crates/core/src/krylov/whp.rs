use super::directions::DirectionSet;
use super::{
    check_dims, gate, initial_residual, next_direction_kind, sqrt_clamped, KrylovError, LinearSystem, Monitor,
    NextDirection, SolveConfig, SolveResult, SolveStatus, StepGate, StepRecord,
};
use crate::linalg::vector::{axpy, dot, norm2};
use crate::weighted::PreconditionerHandle;
use crate::Real;

fn require_hermitian<T: Real>(h: &PreconditionerHandle<T>) -> Result<(), KrylovError> {
    if h.is_hermitian() {
        Ok(())
    } else {
        Err(KrylovError::NotHermitianPreconditioner)
    }
}

/// Shared start: `(x_0, r_0, z_0 = H r_0, ‖b‖_H)`.
fn start<T: Real>(sys: &LinearSystem<'_, T>, h: &PreconditionerHandle<T>) -> (Vec<T>, Vec<T>, Vec<T>, T) {
    let (x, r) = initial_residual(sys);
    let z = h.apply_vec(&r);
    let b_norm_h = if sys.x0.is_some() {
        sqrt_clamped(dot(&h.apply_vec(sys.b), sys.b))
    } else {
        sqrt_clamped(dot(&r, &z))
    };
    (x, r, z, b_norm_h)
}

fn blank_step<T: Real>(iteration: usize, alpha: T, gamma: T, delta: T, recovery: bool) -> StepRecord<T> {
    StepRecord {
        iteration,
        alpha,
        gamma,
        delta,
        beta: Vec::new(),
        phi: Vec::new(),
        az_norm_w: None,
        recovery,
    }
}

/// GCR with an SPD right preconditioner in the `H` inner product.
///
/// Stores `y_j = H q_j` beside `p_j` and `q_j`, so after the start each step
/// applies `A` and `H` once. Iterates coincide with
/// [`wp_gcr_right`](super::wp_gcr_right) run with `W = H`.
pub fn whp_gcr<T: Real>(
    sys: &LinearSystem<'_, T>,
    h: &PreconditionerHandle<T>,
    cfg: &SolveConfig<T>,
) -> Result<SolveResult<T>, KrylovError> {
    const P: usize = 0;
    const Q: usize = 1;
    const Y: usize = 2;

    cfg.validate()?;
    require_hermitian(h)?;
    check_dims(sys, h.dim(), None)?;
    let (mut x, mut r, mut z, b_norm_h) = start(sys, h);
    let mut mon = Monitor::new(cfg, b_norm_h, norm2(sys.b));
    mon.iterate(&x);
    let mut res_w = sqrt_clamped(dot(&r, &z));
    if mon.residual(res_w, norm2(&r)) {
        return Ok(mon.finish(x, SolveStatus::Converged));
    }
    if mon.budget_exhausted() {
        return Ok(mon.finish(x, SolveStatus::MaxIter));
    }

    let mut dirs = DirectionSet::new(3, cfg.truncation_window);
    let p = z.clone();
    let q = sys.a.apply_vec(&p);
    let y = h.apply_vec(&q);
    mon.direction(&q);
    dirs.push(vec![p, q, y]);
    let mut current_is_recovery = false;

    loop {
        let iteration = mon.iteration();
        let delta = dot(dirs.last(Y), dirs.last(Q));
        let gamma = dot(dirs.last(Q), &z);
        dirs.set_last_delta(delta);

        let (alpha, recovery) = match gate(cfg, &mut mon, gamma, delta, res_w, current_is_recovery) {
            StepGate::Halt => return Ok(mon.finish(x, SolveStatus::Breakdown)),
            StepGate::Recover => (T::zero(), true),
            StepGate::Proceed => {
                let alpha = gamma / delta;
                axpy(alpha, dirs.last(P), &mut x);
                axpy(-alpha, dirs.last(Q), &mut r);
                axpy(-alpha, dirs.last(Y), &mut z);
                (alpha, false)
            }
        };
        res_w = sqrt_clamped(dot(&r, &z));
        mon.iterate(&x);
        let mut step = blank_step(iteration, alpha, gamma, delta, recovery);
        if mon.residual(res_w, norm2(&r)) {
            mon.step(step);
            return Ok(mon.finish(x, SolveStatus::Converged));
        }
        if mon.budget_exhausted() {
            mon.step(step);
            return Ok(mon.finish(x, SolveStatus::MaxIter));
        }

        let base = if recovery {
            dirs.last(Y).to_vec()
        } else {
            if let NextDirection::Restart = next_direction_kind(cfg, mon.iteration()) {
                dirs.clear();
                mon.restart();
            }
            z.clone()
        };
        let q_raw = sys.a.apply_vec(&base);
        let phi: Vec<T> = dirs.active().map(|j| dot(dirs.get(Y, j), &q_raw)).collect();
        let mut beta: Vec<T> = phi.iter().zip(dirs.active()).map(|(&f, j)| f / dirs.delta(j)).collect();
        let mut p_new = base;
        let mut q_new = q_raw;
        dirs.subtract(P, &beta, &mut p_new);
        dirs.subtract(Q, &beta, &mut q_new);
        let y_new = h.apply_vec(&q_new);
        let mut new = vec![p_new, q_new, y_new];
        if cfg.reorthogonalize {
            dirs.reorthogonalize(Q, Y, &mut new, &mut beta);
        }
        step.beta = beta;
        step.phi = phi;
        mon.step(step);
        mon.direction(&new[Q]);
        dirs.push(new);
        current_is_recovery = recovery;
    }
}

/// Storage-lean variant that orthogonalizes `p` and `y` and never forms the
/// Euclidean residual by recurrence. `q̃ = A z` is used raw.
///
/// The trace's residual norms come from an explicit `r = b - A x` each step
/// (`res_w = sqrt(rᵀ z)`), which costs one extra product with `A`.
pub fn whp_gcr_alt_a<T: Real>(
    sys: &LinearSystem<'_, T>,
    h: &PreconditionerHandle<T>,
    cfg: &SolveConfig<T>,
) -> Result<SolveResult<T>, KrylovError> {
    const P: usize = 0;
    const Y: usize = 1;

    cfg.validate()?;
    require_hermitian(h)?;
    check_dims(sys, h.dim(), None)?;
    let (mut x, r0, mut z, b_norm_h) = start(sys, h);
    let mut mon = Monitor::new(cfg, b_norm_h, norm2(sys.b));
    mon.iterate(&x);
    let mut res_w = sqrt_clamped(dot(&r0, &z));
    if mon.residual(res_w, norm2(&r0)) {
        return Ok(mon.finish(x, SolveStatus::Converged));
    }
    if mon.budget_exhausted() {
        return Ok(mon.finish(x, SolveStatus::MaxIter));
    }

    let mut dirs = DirectionSet::new(2, cfg.truncation_window);
    let p = z.clone();
    let mut q_tilde = sys.a.apply_vec(&p);
    let y = h.apply_vec(&q_tilde);
    dirs.push(vec![p, y]);
    let mut current_is_recovery = false;
    let mut ax = vec![T::zero(); x.len()];

    loop {
        let iteration = mon.iteration();
        let delta = dot(dirs.last(Y), &q_tilde);
        let gamma = dot(&q_tilde, &z);
        dirs.set_last_delta(delta);

        let (alpha, recovery) = match gate(cfg, &mut mon, gamma, delta, res_w, current_is_recovery) {
            StepGate::Halt => return Ok(mon.finish(x, SolveStatus::Breakdown)),
            StepGate::Recover => (T::zero(), true),
            StepGate::Proceed => {
                let alpha = gamma / delta;
                axpy(alpha, dirs.last(P), &mut x);
                axpy(-alpha, dirs.last(Y), &mut z);
                (alpha, false)
            }
        };
        sys.a.apply(&x, &mut ax);
        let r: Vec<T> = sys.b.iter().zip(&ax).map(|(&b, &v)| b - v).collect();
        res_w = sqrt_clamped(dot(&r, &z));
        mon.iterate(&x);
        let mut step = blank_step(iteration, alpha, gamma, delta, recovery);
        if mon.residual(res_w, norm2(&r)) {
            mon.step(step);
            return Ok(mon.finish(x, SolveStatus::Converged));
        }
        if mon.budget_exhausted() {
            mon.step(step);
            return Ok(mon.finish(x, SolveStatus::MaxIter));
        }

        let base = if recovery {
            dirs.last(Y).to_vec()
        } else {
            if let NextDirection::Restart = next_direction_kind(cfg, mon.iteration()) {
                dirs.clear();
                mon.restart();
            }
            z.clone()
        };
        let q_next = sys.a.apply_vec(&base);
        let y_raw = h.apply_vec(&q_next);
        let phi: Vec<T> = dirs.active().map(|j| dot(dirs.get(Y, j), &q_next)).collect();
        let beta: Vec<T> = phi.iter().zip(dirs.active()).map(|(&f, j)| f / dirs.delta(j)).collect();
        let mut p_new = base;
        let mut y_new = y_raw;
        dirs.subtract(P, &beta, &mut p_new);
        dirs.subtract(Y, &beta, &mut y_new);
        step.beta = beta;
        step.phi = phi;
        mon.step(step);
        dirs.push(vec![p_new, y_new]);
        q_tilde = q_next;
        current_is_recovery = recovery;
    }
}

/// Storage-lean variant that orthogonalizes and stores `p` and `q` only.
///
/// The coefficients are `Φ_j = ⟨ỹ_{i+1}, q_j⟩` with `ỹ_{i+1} = H A z_{i+1}`
/// taken before orthogonalization. `y_{i+1} = H q_{i+1}` is recomputed from
/// the orthogonalized `q_{i+1}` and drives `δ` and the update of `z = H r`,
/// at the cost of a second application of `H` per iteration.
pub fn whp_gcr_alt_b<T: Real>(
    sys: &LinearSystem<'_, T>,
    h: &PreconditionerHandle<T>,
    cfg: &SolveConfig<T>,
) -> Result<SolveResult<T>, KrylovError> {
    const P: usize = 0;
    const Q: usize = 1;

    cfg.validate()?;
    require_hermitian(h)?;
    check_dims(sys, h.dim(), None)?;
    let (mut x, mut r, mut z, b_norm_h) = start(sys, h);
    let mut mon = Monitor::new(cfg, b_norm_h, norm2(sys.b));
    mon.iterate(&x);
    let mut res_w = sqrt_clamped(dot(&r, &z));
    if mon.residual(res_w, norm2(&r)) {
        return Ok(mon.finish(x, SolveStatus::Converged));
    }
    if mon.budget_exhausted() {
        return Ok(mon.finish(x, SolveStatus::MaxIter));
    }

    let mut dirs = DirectionSet::new(2, cfg.truncation_window);
    let p = z.clone();
    let q = sys.a.apply_vec(&p);
    let mut y = h.apply_vec(&q);
    mon.direction(&q);
    dirs.push(vec![p, q]);
    let mut current_is_recovery = false;

    loop {
        let iteration = mon.iteration();
        let delta = dot(&y, dirs.last(Q));
        let gamma = dot(dirs.last(Q), &z);
        dirs.set_last_delta(delta);

        let (alpha, recovery) = match gate(cfg, &mut mon, gamma, delta, res_w, current_is_recovery) {
            StepGate::Halt => return Ok(mon.finish(x, SolveStatus::Breakdown)),
            StepGate::Recover => (T::zero(), true),
            StepGate::Proceed => {
                let alpha = gamma / delta;
                axpy(alpha, dirs.last(P), &mut x);
                axpy(-alpha, dirs.last(Q), &mut r);
                axpy(-alpha, &y, &mut z);
                (alpha, false)
            }
        };
        res_w = sqrt_clamped(dot(&r, &z));
        mon.iterate(&x);
        let mut step = blank_step(iteration, alpha, gamma, delta, recovery);
        if mon.residual(res_w, norm2(&r)) {
            mon.step(step);
            return Ok(mon.finish(x, SolveStatus::Converged));
        }
        if mon.budget_exhausted() {
            mon.step(step);
            return Ok(mon.finish(x, SolveStatus::MaxIter));
        }

        let base = if recovery {
            y.clone()
        } else {
            if let NextDirection::Restart = next_direction_kind(cfg, mon.iteration()) {
                dirs.clear();
                mon.restart();
            }
            z.clone()
        };
        let q_raw = sys.a.apply_vec(&base);
        let y_tilde = h.apply_vec(&q_raw);
        let phi: Vec<T> = dirs.active().map(|j| dot(&y_tilde, dirs.get(Q, j))).collect();
        let beta: Vec<T> = phi.iter().zip(dirs.active()).map(|(&f, j)| f / dirs.delta(j)).collect();
        let mut p_new = base;
        let mut q_new = q_raw;
        dirs.subtract(P, &beta, &mut p_new);
        dirs.subtract(Q, &beta, &mut q_new);
        step.beta = beta;
        step.phi = phi;
        mon.step(step);
        mon.direction(&q_new);
        y = h.apply_vec(&q_new);
        dirs.push(vec![p_new, q_new]);
        current_is_recovery = recovery;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseMatrix, LinearOperator};
    use std::sync::Arc;

    #[test]
    fn exact_inverse_preconditioner() {
        let a = DenseMatrix::from_rows(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let inv = crate::linalg::cholesky(&a).unwrap();
        let h = PreconditionerHandle::hermitian(Arc::new(inv) as Arc<dyn LinearOperator<f64>>).unwrap();
        let b = [1.0, 2.0, 3.0];
        let sys = LinearSystem::new(&a, &b);
        for solver in [whp_gcr, whp_gcr_alt_a, whp_gcr_alt_b] {
            let res = solver(&sys, &h, &SolveConfig::default().with_tolerance(1e-12)).unwrap();
            assert!(res.converged());
            assert_eq!(res.iterations, 1);
        }
    }

    #[test]
    fn general_preconditioner_rejected() {
        let a = DenseMatrix::<f64>::identity(2);
        let b = [1.0, 1.0];
        let h = PreconditionerHandle::general(Arc::new(DenseMatrix::<f64>::identity(2)) as Arc<dyn LinearOperator<f64>>);
        let err = whp_gcr(&LinearSystem::new(&a, &b), &h, &SolveConfig::default()).unwrap_err();
        assert_eq!(err, KrylovError::NotHermitianPreconditioner);
    }

    #[test]
    fn two_by_two_contraction() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, 1.0]]);
        let b = [1.0, 0.3];
        let res = whp_gcr(
            &LinearSystem::new(&a, &b),
            &PreconditionerHandle::identity(2),
            &SolveConfig::default().with_tolerance(1e-12),
        )
        .unwrap();
        assert!(res.converged());
        let norms = res.trace.weighted_norms();
        for w in norms.windows(2) {
            assert!(w[1] <= 0.5f64.sqrt() * w[0] * (1.0 + 1e-12));
        }
    }
}
