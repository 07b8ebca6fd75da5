use super::directions::DirectionSet;
use super::{
    check_dims, gate, initial_residual, next_direction_kind, sqrt_clamped, KrylovError, LinearSystem, Monitor,
    NextDirection, SolveConfig, SolveResult, SolveStatus, StepGate, StepRecord,
};
use crate::linalg::vector::{axpy, dot, norm2};
use crate::weighted::{PreconditionerHandle, WeightOperator};
use crate::Real;

const P: usize = 0;
const Q: usize = 1;
const WQ: usize = 2;

/// Weighted GCR with right preconditioning.
///
/// Minimizes `‖b - A x‖_W` over `x_0 + H K_i(A H, r_0)`. The directions
/// `q_j = A p_j` are kept pairwise W-orthogonal; `W q_j` is stored next to
/// them so each step costs one application each of `A`, `H` and `W`.
pub fn wp_gcr_right<T: Real>(
    sys: &LinearSystem<'_, T>,
    h: &PreconditionerHandle<T>,
    w: &WeightOperator<T>,
    cfg: &SolveConfig<T>,
) -> Result<SolveResult<T>, KrylovError> {
    cfg.validate()?;
    check_dims(sys, h.dim(), Some(w.dim()))?;
    let (mut x, mut r) = initial_residual(sys);
    let mut wr = w.apply_vec(&r);
    let b_norm_w = if sys.x0.is_some() {
        sqrt_clamped(dot(&w.apply_vec(sys.b), sys.b))
    } else {
        sqrt_clamped(dot(&r, &wr))
    };
    let mut mon = Monitor::new(cfg, b_norm_w, norm2(sys.b));
    mon.iterate(&x);
    mon.residual_vector(&r);
    let mut res_w = sqrt_clamped(dot(&r, &wr));
    if mon.residual(res_w, norm2(&r)) {
        return Ok(mon.finish(x, SolveStatus::Converged));
    }
    if mon.budget_exhausted() {
        return Ok(mon.finish(x, SolveStatus::MaxIter));
    }

    let mut dirs = DirectionSet::new(3, cfg.truncation_window);
    let z = h.apply_vec(&r);
    let q = sys.a.apply_vec(&z);
    let wq = w.apply_vec(&q);
    mon.direction(&q);
    dirs.push(vec![z, q, wq]);
    let mut current_is_recovery = false;

    loop {
        let iteration = mon.iteration();
        let delta = dot(dirs.last(Q), dirs.last(WQ));
        let gamma = dot(dirs.last(WQ), &r);
        dirs.set_last_delta(delta);

        let (alpha, recovery) = match gate(cfg, &mut mon, gamma, delta, res_w, current_is_recovery) {
            StepGate::Halt => return Ok(mon.finish(x, SolveStatus::Breakdown)),
            StepGate::Recover => (T::zero(), true),
            StepGate::Proceed => {
                let alpha = gamma / delta;
                axpy(alpha, dirs.last(P), &mut x);
                axpy(-alpha, dirs.last(Q), &mut r);
                axpy(-alpha, dirs.last(WQ), &mut wr);
                (alpha, false)
            }
        };
        res_w = sqrt_clamped(dot(&r, &wr));
        mon.iterate(&x);
        mon.residual_vector(&r);
        let mut step = StepRecord {
            iteration,
            alpha,
            gamma,
            delta,
            beta: Vec::new(),
            phi: Vec::new(),
            az_norm_w: None,
            recovery,
        };
        if mon.residual(res_w, norm2(&r)) {
            mon.step(step);
            return Ok(mon.finish(x, SolveStatus::Converged));
        }
        if mon.budget_exhausted() {
            mon.step(step);
            return Ok(mon.finish(x, SolveStatus::MaxIter));
        }

        let z = if recovery {
            h.apply_vec(dirs.last(Q))
        } else {
            if let NextDirection::Restart = next_direction_kind(cfg, mon.iteration()) {
                dirs.clear();
                mon.restart();
            }
            h.apply_vec(&r)
        };
        let az = sys.a.apply_vec(&z);
        let waz = w.apply_vec(&az);
        step.az_norm_w = Some(sqrt_clamped(dot(&az, &waz)));

        let phi: Vec<T> = dirs.active().map(|j| dot(dirs.get(WQ, j), &az)).collect();
        let mut beta: Vec<T> = phi.iter().zip(dirs.active()).map(|(&f, j)| f / dirs.delta(j)).collect();
        let mut new = vec![z, az, waz];
        for (slot, v) in new.iter_mut().enumerate() {
            dirs.subtract(slot, &beta, v);
        }
        if cfg.reorthogonalize {
            dirs.reorthogonalize(Q, WQ, &mut new, &mut beta);
        }
        step.beta = beta;
        step.phi = phi;
        mon.step(step);
        mon.direction(&new[Q]);
        dirs.push(new);
        current_is_recovery = recovery;
    }
}

/// Minimal residual iteration: no orthogonalization history.
pub fn wp_mr<T: Real>(
    sys: &LinearSystem<'_, T>,
    h: &PreconditionerHandle<T>,
    w: &WeightOperator<T>,
    cfg: &SolveConfig<T>,
) -> Result<SolveResult<T>, KrylovError> {
    wp_gcr_right(sys, h, w, &cfg.clone().truncated(0))
}

/// Orthomin(k): orthogonalize against the last `k` directions.
pub fn wp_orthomin_k<T: Real>(
    sys: &LinearSystem<'_, T>,
    h: &PreconditionerHandle<T>,
    w: &WeightOperator<T>,
    k: usize,
    cfg: &SolveConfig<T>,
) -> Result<SolveResult<T>, KrylovError> {
    wp_gcr_right(sys, h, w, &cfg.clone().truncated(k))
}

/// GCR(k): drop all directions every `k` iterations, keeping `x` and `r`.
pub fn wp_gcr_restarted<T: Real>(
    sys: &LinearSystem<'_, T>,
    h: &PreconditionerHandle<T>,
    w: &WeightOperator<T>,
    k: usize,
    cfg: &SolveConfig<T>,
) -> Result<SolveResult<T>, KrylovError> {
    wp_gcr_right(sys, h, w, &cfg.clone().restarted(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{BreakdownPolicy, SolveStatus};
    use crate::linalg::DenseMatrix;

    #[test]
    fn identity_converges_in_one_step() {
        let a = DenseMatrix::<f64>::identity(4);
        let b = [1.0, -2.0, 3.0, 0.5];
        let sys = LinearSystem::new(&a, &b);
        let res = wp_gcr_right(
            &sys,
            &PreconditionerHandle::identity(4),
            &WeightOperator::identity(4),
            &SolveConfig::default(),
        )
        .unwrap();
        assert_eq!(res.status(), SolveStatus::Converged);
        assert_eq!(res.iterations, 1);
        assert_eq!(res.trace.residuals[1].res_w, 0.0);
        assert_eq!(res.x, b.to_vec());
    }

    #[test]
    fn skew_system_breaks_down_at_zero() {
        let a = DenseMatrix::<f64>::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let b = [1.0, 0.0];
        let sys = LinearSystem::new(&a, &b);
        let h = PreconditionerHandle::identity(2);
        let w = WeightOperator::identity(2);
        let res = wp_gcr_right(&sys, &h, &w, &SolveConfig::default()).unwrap();
        assert_eq!(res.status(), SolveStatus::Breakdown);
        assert_eq!(res.trace.breakdown.unwrap().iteration, 0);
        assert_eq!(res.iterations, 0);

        let cfg = SolveConfig::default().with_breakdown_policy(BreakdownPolicy::RestartOrthodirStyle);
        let res = wp_gcr_right(&sys, &h, &w, &cfg).unwrap();
        assert_eq!(res.status(), SolveStatus::Converged);
        assert!(res.trace.steps[0].recovery);
        let ax = a.matvec(&res.x).unwrap();
        assert!((ax[0] - 1.0).abs() < 1e-14 && ax[1].abs() < 1e-14);
    }

    #[test]
    fn zero_rhs_is_already_solved() {
        let a = DenseMatrix::<f64>::identity(3);
        let b = [0.0; 3];
        let res = wp_mr(
            &LinearSystem::new(&a, &b),
            &PreconditionerHandle::identity(3),
            &WeightOperator::identity(3),
            &SolveConfig::default(),
        )
        .unwrap();
        assert!(res.converged());
        assert_eq!(res.iterations, 0);
    }
}
