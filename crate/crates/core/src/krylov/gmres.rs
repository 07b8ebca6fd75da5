use super::{check_dims, initial_residual, sqrt_clamped, KrylovError, LinearSystem, Monitor, SolveConfig, SolveResult, SolveStatus};
use crate::linalg::vector::{axpy, dot, norm2, scale};
use crate::weighted::{PreconditionerHandle, WeightOperator};
use crate::Real;

const HAPPY_TOL: f64 = 1e-14;

/// Solves `R y = g` for the upper-triangular `R` stored by columns.
fn back_substitute<T: Real>(r_cols: &[Vec<T>], g: &[T]) -> Vec<T> {
    let k = r_cols.len();
    let mut y = g[..k].to_vec();
    for i in (0..k).rev() {
        y[i] /= r_cols[i][i];
        let yi = y[i];
        for (row, yr) in y.iter_mut().enumerate().take(i) {
            *yr -= r_cols[i][row] * yi;
        }
    }
    y
}

/// `x_c + H V y`
fn assemble_iterate<T: Real>(h: &PreconditionerHandle<T>, x_c: &[T], v: &[Vec<T>], y: &[T]) -> Vec<T> {
    let mut vy = vec![T::zero(); x_c.len()];
    for (vi, &yi) in v.iter().zip(y) {
        axpy(yi, vi, &mut vy);
    }
    let mut x = h.apply_vec(&vy);
    axpy(T::one(), x_c, &mut x);
    x
}

/// Right-preconditioned GMRES in the W inner product.
///
/// Modified Gram-Schmidt Arnoldi on `A H` with W-orthonormal basis vectors,
/// least squares by Givens rotations. `res_w` is the rotated right-hand side
/// entry; `res_euclid` comes from the stored images `A H v_j`. A happy
/// breakdown ends the solve as converged. `restart_period` restarts the
/// Arnoldi process from the explicit residual.
pub fn gmres_arnoldi_oracle<T: Real>(
    sys: &LinearSystem<'_, T>,
    h: &PreconditionerHandle<T>,
    w: &WeightOperator<T>,
    cfg: &SolveConfig<T>,
) -> Result<SolveResult<T>, KrylovError> {
    cfg.validate()?;
    check_dims(sys, h.dim(), Some(w.dim()))?;
    let (mut x, mut r) = initial_residual(sys);
    let b_norm_w = if sys.x0.is_some() {
        sqrt_clamped(dot(&w.apply_vec(sys.b), sys.b))
    } else {
        sqrt_clamped(dot(&w.apply_vec(&r), &r))
    };
    let mut mon = Monitor::new(cfg, b_norm_w, norm2(sys.b));
    mon.iterate(&x);
    let cycle_len = cfg.restart_period.unwrap_or(usize::MAX);

    loop {
        let wr = w.apply_vec(&r);
        let beta0 = sqrt_clamped(dot(&r, &wr));
        if mon.trace.residuals.is_empty() {
            if mon.residual(beta0, norm2(&r)) {
                return Ok(mon.finish(x, SolveStatus::Converged));
            }
            if mon.budget_exhausted() {
                return Ok(mon.finish(x, SolveStatus::MaxIter));
            }
        }
        let mut v = vec![r.iter().map(|&ri| ri / beta0).collect::<Vec<T>>()];
        let mut wv = vec![wr.iter().map(|&ri| ri / beta0).collect::<Vec<T>>()];
        let mut u: Vec<Vec<T>> = Vec::new();
        let mut r_cols: Vec<Vec<T>> = Vec::new();
        let mut rot: Vec<(T, T)> = Vec::new();
        let mut g = vec![beta0];
        let x_c = x.clone();
        let r_c = r.clone();

        let mut k = 0;
        loop {
            let hv = h.apply_vec(&v[k]);
            let img = sys.a.apply_vec(&hv);
            let mut wk = img.clone();
            u.push(img);
            let mut col = vec![T::zero(); k + 2];
            for j in 0..=k {
                col[j] = dot(&wv[j], &wk);
                axpy(-col[j], &v[j], &mut wk);
            }
            let wwk = w.apply_vec(&wk);
            let h_next = sqrt_clamped(dot(&wk, &wwk));
            col[k + 1] = h_next;
            let col_norm = norm2(&col);

            for (i, &(c, s)) in rot.iter().enumerate() {
                let t = c * col[i] + s * col[i + 1];
                col[i + 1] = -s * col[i] + c * col[i + 1];
                col[i] = t;
            }
            let denom = col[k].hypot(col[k + 1]);
            if denom == T::zero() {
                mon.breakdown(T::zero());
                return Ok(mon.finish(x, SolveStatus::Breakdown));
            }
            let (c, s) = (col[k] / denom, col[k + 1] / denom);
            col[k] = denom;
            col.truncate(k + 1);
            rot.push((c, s));
            r_cols.push(col);
            let gk = g[k];
            g[k] = c * gk;
            g.push(-s * gk);

            let y = back_substitute(&r_cols, &g);
            let mut res = r_c.clone();
            for (uj, &yj) in u.iter().zip(&y) {
                axpy(-yj, uj, &mut res);
            }
            let res_w = g[k + 1].abs();
            let happy = h_next <= T::tol(HAPPY_TOL) * col_norm;
            if cfg.record_iterates {
                let xk = assemble_iterate(h, &x_c, &v, &y);
                mon.iterate(&xk);
            }
            let converged = mon.residual(res_w, norm2(&res));
            if converged || happy {
                x = assemble_iterate(h, &x_c, &v, &y);
                return Ok(mon.finish(x, SolveStatus::Converged));
            }
            if mon.budget_exhausted() {
                x = assemble_iterate(h, &x_c, &v, &y);
                return Ok(mon.finish(x, SolveStatus::MaxIter));
            }
            k += 1;
            if k == cycle_len {
                x = assemble_iterate(h, &x_c, &v, &y);
                break;
            }
            let inv = T::one() / h_next;
            scale(inv, &mut wk);
            let mut wwk = wwk;
            scale(inv, &mut wwk);
            v.push(wk);
            wv.push(wwk);
        }

        let ax = sys.a.apply_vec(&x);
        r = sys.b.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
        mon.restart();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    #[test]
    fn identity_one_step() {
        let a = DenseMatrix::<f64>::identity(5);
        let b = [1.0, 0.0, 2.0, -1.0, 0.5];
        let res = gmres_arnoldi_oracle(
            &LinearSystem::new(&a, &b),
            &PreconditionerHandle::identity(5),
            &WeightOperator::identity(5),
            &SolveConfig::default(),
        )
        .unwrap();
        assert!(res.converged());
        assert_eq!(res.iterations, 1);
        for (xi, bi) in res.x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-15);
        }
    }

    #[test]
    fn skew_system_does_not_stall() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let b = [1.0, 0.0];
        let res = gmres_arnoldi_oracle(
            &LinearSystem::new(&a, &b),
            &PreconditionerHandle::identity(2),
            &WeightOperator::identity(2),
            &SolveConfig::default().with_tolerance(1e-12),
        )
        .unwrap();
        assert!(res.converged());
        assert_eq!(res.iterations, 2);
        assert_eq!(res.trace.residuals[1].res_w, 1.0);
    }

    #[test]
    fn restarted_keeps_decreasing() {
        let n = 12;
        let a = DenseMatrix::from_fn(n, n, |i, j| if i == j { 3.0 } else if j == i + 1 { 1.0 } else if i == j + 1 { -0.7 } else { 0.0 });
        let b = vec![1.0; n];
        let res = gmres_arnoldi_oracle(
            &LinearSystem::new(&a, &b),
            &PreconditionerHandle::identity(n),
            &WeightOperator::identity(n),
            &SolveConfig::default().restarted(3).with_tolerance(1e-10),
        )
        .unwrap();
        assert!(res.converged());
        assert!(!res.trace.restarts.is_empty());
        let norms = res.trace.weighted_norms();
        assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }
}
