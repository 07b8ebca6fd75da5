use super::directions::DirectionSet;
use super::{
    check_dims, gate, initial_residual, next_direction_kind, sqrt_clamped, KrylovError, LinearSystem, Monitor,
    NextDirection, SolveConfig, SolveResult, SolveStatus, StepGate, StepRecord,
};
use crate::linalg::vector::{axpy, dot, norm2};
use crate::weighted::{PreconditionerHandle, WeightOperator};
use crate::Real;

const P: usize = 0;
const Y: usize = 1;
const WY: usize = 2;
const Q: usize = 3;

/// Weighted GCR with left preconditioning: GCR on `H A x = H b`.
///
/// Minimizes `‖H (b - A x)‖_W`; the trace's `res_w` is `‖z_i‖_W` with
/// `z_i = H r_i`. The unpreconditioned `q_j = A p_j` are carried along so
/// the Euclidean residual is available by recurrence. With the weighted
/// stopping norm the reference is `‖H b‖_W`.
pub fn wp_gcr_left<T: Real>(
    sys: &LinearSystem<'_, T>,
    h: &PreconditionerHandle<T>,
    w: &WeightOperator<T>,
    cfg: &SolveConfig<T>,
) -> Result<SolveResult<T>, KrylovError> {
    cfg.validate()?;
    check_dims(sys, h.dim(), Some(w.dim()))?;
    let (mut x, mut r) = initial_residual(sys);
    let mut z = h.apply_vec(&r);
    let mut wz = w.apply_vec(&z);
    let hb_norm_w = if sys.x0.is_some() {
        let hb = h.apply_vec(sys.b);
        sqrt_clamped(dot(&w.apply_vec(&hb), &hb))
    } else {
        sqrt_clamped(dot(&z, &wz))
    };
    let mut mon = Monitor::new(cfg, hb_norm_w, norm2(sys.b));
    mon.iterate(&x);
    let mut res_w = sqrt_clamped(dot(&z, &wz));
    if mon.residual(res_w, norm2(&r)) {
        return Ok(mon.finish(x, SolveStatus::Converged));
    }
    if mon.budget_exhausted() {
        return Ok(mon.finish(x, SolveStatus::MaxIter));
    }

    let mut dirs = DirectionSet::new(4, cfg.truncation_window);
    let p = z.clone();
    let q = sys.a.apply_vec(&p);
    let y = h.apply_vec(&q);
    let wy = w.apply_vec(&y);
    mon.direction(&y);
    dirs.push(vec![p, y, wy, q]);
    let mut current_is_recovery = false;

    loop {
        let iteration = mon.iteration();
        let delta = dot(dirs.last(Y), dirs.last(WY));
        let gamma = dot(dirs.last(WY), &z);
        dirs.set_last_delta(delta);

        let (alpha, recovery) = match gate(cfg, &mut mon, gamma, delta, res_w, current_is_recovery) {
            StepGate::Halt => return Ok(mon.finish(x, SolveStatus::Breakdown)),
            StepGate::Recover => (T::zero(), true),
            StepGate::Proceed => {
                let alpha = gamma / delta;
                axpy(alpha, dirs.last(P), &mut x);
                axpy(-alpha, dirs.last(Y), &mut z);
                axpy(-alpha, dirs.last(WY), &mut wz);
                axpy(-alpha, dirs.last(Q), &mut r);
                (alpha, false)
            }
        };
        res_w = sqrt_clamped(dot(&z, &wz));
        mon.iterate(&x);
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

        let base = if recovery {
            dirs.last(Y).to_vec()
        } else {
            if let NextDirection::Restart = next_direction_kind(cfg, mon.iteration()) {
                dirs.clear();
                mon.restart();
            }
            z.clone()
        };
        let az = sys.a.apply_vec(&base);
        let haz = h.apply_vec(&az);
        let whaz = w.apply_vec(&haz);

        let phi: Vec<T> = dirs.active().map(|j| dot(dirs.get(WY, j), &haz)).collect();
        let mut beta: Vec<T> = phi.iter().zip(dirs.active()).map(|(&f, j)| f / dirs.delta(j)).collect();
        let mut new = vec![base, haz, whaz, az];
        for (slot, v) in new.iter_mut().enumerate() {
            dirs.subtract(slot, &beta, v);
        }
        if cfg.reorthogonalize {
            dirs.reorthogonalize(Y, WY, &mut new, &mut beta);
        }
        step.beta = beta;
        step.phi = phi;
        mon.step(step);
        mon.direction(&new[Y]);
        dirs.push(new);
        current_is_recovery = recovery;
    }
}
