mod common;

use common::*;
use wpgcr::krylov::{self, LinearSystem, SolveConfig, SolveStatus, StoppingNorm};
use wpgcr::linalg::vector::dot;
use wpgcr::linalg::{cholesky, DenseMatrix};
use wpgcr::weighted::{PreconditionerHandle, WeightOperator};

/// `min ‖r0 − AH y‖_W` over `y ∈ K_k(AH, r0)` by dense normal equations on an
/// orthonormalized Krylov basis.
fn least_squares_residual(a: &DenseMatrix<f64>, h: &DenseMatrix<f64>, w: &DenseMatrix<f64>, r0: &[f64], k: usize) -> f64 {
    let ah = a.matmul(h).unwrap();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut v = r0.to_vec();
    for _ in 0..k {
        for _ in 0..2 {
            for u in &basis {
                let c = dot(u, &v);
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        basis.push(v.clone());
        v = ah.matvec(&v).unwrap();
    }
    let cols: Vec<Vec<f64>> = basis.iter().map(|u| ah.matvec(u).unwrap()).collect();
    let wcols: Vec<Vec<f64>> = cols.iter().map(|c| w.matvec(c).unwrap()).collect();
    let normal = DenseMatrix::from_fn(k, k, |i, j| dot(&cols[i], &wcols[j]));
    let rhs: Vec<f64> = wcols.iter().map(|wc| dot(wc, r0)).collect();
    let coef = cholesky(&normal).unwrap().solve(&rhs).unwrap();
    let mut r = r0.to_vec();
    for (c, col) in coef.iter().zip(&cols) {
        r.iter_mut().zip(col).for_each(|(x, y)| *x -= c * y);
    }
    w_norm(w, &r)
}

#[test]
fn gcr_residuals_match_dense_least_squares() {
    for seed in 0..8 {
        let mut g = rng(seed);
        let n = 14;
        let a = random_definite(&mut g, n, 1.0);
        let h = random_spd(&mut g, n, 0.5);
        let w = random_spd(&mut g, n, 0.5);
        let b = random_vector(&mut g, n);
        let cfg = SolveConfig::default().with_tolerance(1e-12).with_max_iterations(50);
        let res = krylov::wp_gcr_right(&LinearSystem::new(&a, &b), &hermitian(&h), &weight(&w), &cfg).unwrap();
        let norms = res.trace.weighted_norms();
        for k in 1..=6 {
            let oracle = least_squares_residual(&a, &h, &w, &b, k);
            assert!(
                (norms[k] - oracle).abs() <= 1e-9 * oracle,
                "seed {seed} step {k}: {} vs {oracle}",
                norms[k]
            );
        }
    }
}

#[test]
fn gcr_agrees_with_arnoldi_gmres() {
    for seed in 10..16 {
        let mut g = rng(seed);
        let n = 16;
        let a = random_definite(&mut g, n, 1.5);
        let h = random_spd(&mut g, n, 0.5);
        let b = random_vector(&mut g, n);
        let cfg = SolveConfig::default().with_tolerance(1e-8);
        let ls = LinearSystem::new(&a, &b);
        let gcr = krylov::wp_gcr_right(&ls, &hermitian(&h), &weight(&h), &cfg).unwrap();
        let gmres = krylov::gmres_arnoldi_oracle(&ls, &hermitian(&h), &weight(&h), &cfg).unwrap();
        assert_eq!(gcr.iterations, gmres.iterations, "seed {seed}");
        for (x, y) in gcr.trace.weighted_norms().iter().zip(gmres.trace.weighted_norms()) {
            assert!((x - y).abs() <= 1e-9 * gcr.trace.weighted_norms()[0]);
        }
    }
}

#[test]
fn every_variant_has_nonincreasing_weighted_residual() {
    let mut g = rng(20);
    let n = 18;
    let a = random_definite(&mut g, n, 1.0);
    let h = random_spd(&mut g, n, 0.3);
    let b = random_vector(&mut g, n);
    let base = SolveConfig::default().with_max_iterations(5000);
    for cfg in [base.clone(), base.clone().truncated(0), base.clone().truncated(2), base.clone().restarted(3)] {
        let res = krylov::wp_gcr_right(&LinearSystem::new(&a, &b), &hermitian(&h), &weight(&h), &cfg).unwrap();
        assert!(res.converged());
        let norms = res.trace.weighted_norms();
        assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let r = residual(&a, &b, &res.x);
        assert!(w_norm(&h, &r) <= 1.01e-6 * w_norm(&h, &b));
    }
}

#[test]
fn mr_and_gcr_share_the_first_step() {
    let mut g = rng(21);
    let a = random_definite(&mut g, 10, 1.0);
    let b = random_vector(&mut g, 10);
    let (h, w) = (PreconditionerHandle::identity(10), WeightOperator::identity(10));
    let ls = LinearSystem::new(&a, &b);
    let cfg = SolveConfig::default().recording();
    let full = krylov::wp_gcr_right(&ls, &h, &w, &cfg).unwrap();
    let mr = krylov::wp_mr(&ls, &h, &w, &cfg).unwrap();
    assert!(rel_diff(&mr.trace.iterates[1], &full.trace.iterates[1]) <= 1e-14);
}

#[test]
fn hermitian_variants_produce_the_same_iterates() {
    for seed in 30..36 {
        let mut g = rng(seed);
        let n = 12;
        let a = random_definite(&mut g, n, 1.0);
        let h = random_spd(&mut g, n, 0.3);
        let b = random_vector(&mut g, n);
        let ls = LinearSystem::new(&a, &b);
        let cfg = SolveConfig::default().with_tolerance(1e-10).recording();
        let base = krylov::whp_gcr(&ls, &hermitian(&h), &cfg).unwrap();
        let rel = base.trace.relative_weighted();
        for alt in [krylov::whp_gcr_alt_a(&ls, &hermitian(&h), &cfg), krylov::whp_gcr_alt_b(&ls, &hermitian(&h), &cfg)] {
            let alt = alt.unwrap();
            assert!(alt.converged());
            assert!(alt.iterations.abs_diff(base.iterations) <= 1);
            for i in 1..base.trace.iterates.len().min(alt.trace.iterates.len()) {
                if rel[i] < 1e-7 {
                    break;
                }
                assert!(rel_diff(&alt.trace.iterates[i], &base.trace.iterates[i]) <= 1e-9, "seed {seed} step {i}");
            }
            // the reported residual is the true one
            let r = residual(&a, &b, &alt.x);
            assert!(w_norm(&h, &r) <= 1.01e-10 * w_norm(&h, &b), "seed {seed}");
        }
    }
}

#[test]
fn left_preconditioning_with_inverse_weight_matches_right() {
    let mut g = rng(40);
    let n = 12;
    let a = random_definite(&mut g, n, 1.0);
    let h = random_spd(&mut g, n, 0.3);
    let b = random_vector(&mut g, n);
    let h_inv = cholesky(&h).unwrap().inverse();
    let ls = LinearSystem::new(&a, &b);
    let cfg = SolveConfig::default().with_tolerance(1e-10).recording();
    let right = krylov::wp_gcr_right(&ls, &hermitian(&h), &weight(&h), &cfg).unwrap();
    let left = krylov::wp_gcr_left(&ls, &hermitian(&h), &weight(&h_inv), &cfg).unwrap();
    for i in 1..4 {
        assert!(rel_diff(&left.trace.iterates[i], &right.trace.iterates[i]) <= 1e-10);
    }
}

#[test]
fn skew_system_breaks_down_immediately() {
    let a = DenseMatrix::from_rows(&[vec![0.0, 2.0], vec![-2.0, 0.0]]);
    let b = [1.0, -1.0];
    let res = krylov::wp_gcr_right(
        &LinearSystem::new(&a, &b),
        &PreconditionerHandle::identity(2),
        &WeightOperator::identity(2),
        &SolveConfig::default(),
    )
    .unwrap();
    assert_eq!(res.status(), SolveStatus::Breakdown);
    assert_eq!(res.trace.breakdown.map(|b| b.iteration), Some(0));
    assert_eq!(res.x, vec![0.0, 0.0]);
}

#[test]
fn euclidean_stopping_uses_the_plain_residual() {
    let mut g = rng(41);
    let n = 15;
    let a = random_definite(&mut g, n, 0.5);
    let h = random_spd(&mut g, n, 0.3);
    let b = random_vector(&mut g, n);
    let cfg = SolveConfig::default().with_stopping_norm(StoppingNorm::Euclidean);
    let res = krylov::whp_gcr(&LinearSystem::new(&a, &b), &hermitian(&h), &cfg).unwrap();
    assert!(res.converged());
    let last = res.trace.residuals.last().unwrap();
    let bn = dot(&b, &b).sqrt();
    assert!(last.res_euclid < 1e-6 * bn);
}

#[test]
fn single_precision_smoke() {
    let mut g = rng(50);
    let n = 20;
    let a = random_definite(&mut g, n, 0.5).map(|v| v as f32);
    let b: Vec<f32> = random_vector(&mut g, n).into_iter().map(|v| v as f32).collect();
    let cfg = SolveConfig::<f32>::default().with_tolerance(1e-4);
    let res = krylov::wp_gcr_right(
        &LinearSystem::new(&a, &b),
        &PreconditionerHandle::identity(n),
        &WeightOperator::identity(n),
        &cfg,
    )
    .unwrap();
    assert!(res.converged());
    let ax = a.matvec(&res.x).unwrap();
    let r: f32 = b.iter().zip(&ax).map(|(b, ax)| (b - ax) * (b - ax)).sum::<f32>().sqrt();
    let bn: f32 = b.iter().map(|v| v * v).sum::<f32>().sqrt();
    assert!(r <= 2e-4 * bn);
}

#[test]
fn full_gcr_keeps_directions_and_residuals_w_orthogonal() {
    for seed in 60..65 {
        let mut g = rng(seed);
        let n = 16;
        let a = random_definite(&mut g, n, 1.0);
        let h = random_spd(&mut g, n, 0.3);
        let w = random_spd(&mut g, n, 0.3);
        let b = random_vector(&mut g, n);
        let cfg = SolveConfig::default().with_tolerance(1e-10).recording();
        let res = krylov::wp_gcr_right(&LinearSystem::new(&a, &b), &hermitian(&h), &weight(&w), &cfg).unwrap();
        let q = &res.trace.directions;
        let wq: Vec<Vec<f64>> = q.iter().map(|v| w.matvec(v).unwrap()).collect();
        let diag_max = (0..q.len()).map(|i| dot(&q[i], &wq[i])).fold(0.0, f64::max);
        for i in 0..q.len() {
            for j in 0..i {
                assert!(dot(&q[i], &wq[j]).abs() <= 1e-8 * diag_max, "seed {seed}: q{i} q{j}");
            }
        }
        let r = &res.trace.residual_vectors;
        // past step n the Krylov space is exhausted and r is rounding noise
        for i in 1..r.len().min(n) {
            let rn = w_norm(&w, &r[i]);
            for j in 0..i.min(q.len()) {
                let qn = dot(&q[j], &wq[j]).sqrt();
                assert!(dot(&r[i], &wq[j]).abs() <= 1e-8 * rn * qn, "seed {seed}: r{i} q{j}");
            }
        }
        // ‖A z_{i+1}‖_W ≥ ‖q_{i+1}‖_W
        for (i, step) in res.trace.steps.iter().enumerate() {
            if let (Some(az), Some(next)) = (step.az_norm_w, q.get(i + 1)) {
                assert!(az >= w_norm(&w, next) * (1.0 - 1e-12));
            }
        }
    }
}
