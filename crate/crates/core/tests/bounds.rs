mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use wpgcr::bounds::{self, HermitianSplit};
use wpgcr::linalg::vector::dot;
use wpgcr::linalg::{cholesky, sym_eigvals, DenseMatrix, LuFactor};
use wpgcr::weighted::{PreconditionerHandle, WeightOperator};

/// Smallest `|⟨Bu, u⟩_W| / ‖u‖²_W` over random complex `u = a + ib`.
fn sampled_fov_distance(b: &DenseMatrix<f64>, w: &DenseMatrix<f64>, samples: usize, seed: u64) -> f64 {
    let mut g = rng(seed);
    let n = b.rows();
    let wb = w.matmul(b).unwrap();
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let re: Vec<f64> = (0..n).map(|_| g.gen_range(-1.0..1.0)).collect();
        let im: Vec<f64> = (0..n).map(|_| g.gen_range(-1.0..1.0)).collect();
        let (wbre, wbim) = (wb.matvec(&re).unwrap(), wb.matvec(&im).unwrap());
        // uᴴ W B u for real W B
        let real = dot(&re, &wbre) + dot(&im, &wbim);
        let imag = dot(&re, &wbim) - dot(&im, &wbre);
        let den = dot(&re, &w.matvec(&re).unwrap()) + dot(&im, &w.matvec(&im).unwrap());
        best = best.min(real.hypot(imag) / den);
    }
    best
}

#[test]
fn fov_distance_is_a_lower_envelope_of_sampled_quotients() {
    for seed in 0..5 {
        let mut g = rng(seed);
        let n = 6;
        let b = random_definite(&mut g, n, 1.0);
        let w = random_spd(&mut g, n, 0.5);
        let d = bounds::fov_distance(&b, &weight(&w)).unwrap();
        let sampled = sampled_fov_distance(&b, &w, 100_000, seed);
        assert!(d > 0.0);
        assert!(d <= sampled * (1.0 + 1e-12), "seed {seed}: {d} above sampled {sampled}");
        assert!(sampled <= 2.0 * d, "seed {seed}: sampled {sampled} far above {d}");
    }
}

#[test]
fn fov_distance_of_symmetric_matrix_is_clipped_lambda_min() {
    for seed in 100..105 {
        let mut g = rng(seed);
        let s = random_spd(&mut g, 9, -0.2 + 0.1 * (seed - 100) as f64);
        let lo = sym_eigvals(&s).unwrap()[0];
        let d = bounds::fov_distance(&s, &WeightOperator::identity(9)).unwrap();
        assert!((d - lo.max(0.0)).abs() <= 1e-10, "{d} vs {lo}");
    }
}

#[test]
fn fov_distance_matches_rotation_search() {
    for seed in 10..16 {
        let mut g = rng(seed);
        let b = random_definite(&mut g, 8, 2.0);
        let w = weight(&random_spd(&mut g, 8, 0.5));
        let direct = bounds::fov_distance(&b, &w).unwrap();
        let grid = bounds::fov_distance_grid(&b, &w).unwrap();
        assert!((direct - grid).abs() <= 1e-8 * (1.0 + direct), "{direct} vs {grid}");
    }
}

#[test]
fn indefinite_symmetric_part_has_zero_distance() {
    let b = DenseMatrix::from_rows(&[vec![1.0, 3.0], vec![-1.0, -2.0]]);
    assert_eq!(bounds::fov_distance(&b, &WeightOperator::identity(2)).unwrap(), 0.0);
}

#[test]
fn contraction_factors_are_ordered() {
    for seed in 20..30 {
        let mut g = rng(seed);
        let n = 10;
        let a = random_definite(&mut g, n, 1.0);
        let h = random_spd(&mut g, n, 0.5);
        let report = bounds::compute_bound_report(&a, &hermitian(&h), &weight(&h)).unwrap();
        let (b1, b2, b3) = (report.bound1.unwrap(), report.bound2.unwrap(), report.bound3.unwrap());
        assert!(b1 <= b2 + 1e-10, "seed {seed}: {b1} > {b2}");
        assert!(b2 <= b3 + 1e-10, "seed {seed}: {b2} > {b3}");
        assert!(b1 <= report.elman + 1e-10);
        assert!(b3 < 1.0);
        assert_eq!(report.bound1_starts, bounds::BOUND1_STARTS + 2);
    }
}

#[test]
fn chain_with_inverse_symmetric_part_as_preconditioner() {
    for seed in 80..85 {
        let mut g = rng(seed);
        let a = random_definite(&mut g, 10, 1.0);
        let h = cholesky(&a.symmetric_part()).unwrap().inverse();
        let report = bounds::compute_bound_report(&a, &hermitian(&h), &weight(&h)).unwrap();
        let (b1, b2, b3) = (report.bound1.unwrap(), report.bound2.unwrap(), report.bound3.unwrap());
        assert!((report.kappa.unwrap() - 1.0).abs() <= 1e-10);
        assert!(b1 <= b2 + 1e-10 && b2 <= b3 + 1e-10, "seed {seed}: {b1} {b2} {b3}");
    }
}

#[test]
fn inverse_preconditioner_gives_a_zero_bound() {
    let mut g = rng(86);
    let a = random_spd(&mut g, 7, 0.5);
    let h = cholesky(&a).unwrap().inverse();
    let report = bounds::compute_bound_report(&a, &hermitian(&h), &weight(&h)).unwrap();
    assert!(report.rho.unwrap() <= 1e-12);
    assert!(report.bound3.unwrap() <= 1e-6);
}

#[test]
fn non_hermitian_weight_leaves_spd_bounds_empty() {
    let mut g = rng(31);
    let a = random_definite(&mut g, 6, 1.0);
    let report =
        bounds::compute_bound_report(&a, &PreconditionerHandle::identity(6), &weight(&random_spd(&mut g, 6, 0.5))).unwrap();
    assert!(report.bound2.is_none() && report.bound3.is_none());
    assert!(report.bound1.is_some());
}

#[test]
fn johnson_identity_on_random_matrices() {
    for (seed, n) in (40..).zip([2, 3, 5, 8, 13, 21, 34, 50]) {
        let mut g = rng(seed);
        let a = random_definite(&mut g, n, 1.5);
        let inv = LuFactor::new(&a).unwrap().inverse();
        let (lhs, rhs) = bounds::johnson_identity_check(&HermitianSplit::from_dense(&a), &inv).unwrap();
        assert!((lhs - rhs).abs() <= 1e-8, "n {n}: {lhs} vs {rhs}");
    }
}

#[test]
fn worked_contraction_example() {
    let b3 = bounds::bound3_from(63.0_f64, 1.0);
    assert!((b3 - 0.99602).abs() < 1e-5);
    assert_eq!(bounds::predicted_iterations(b3, 1e-6), Some(3468));
    assert_eq!(bounds::predicted_iterations(1.0_f64, 1e-6), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_reconstructs(seed in any::<u64>(), n in 1usize..12) {
        let a = random_matrix(&mut rng(seed), n);
        let s = HermitianSplit::from_dense(&a);
        prop_assert!(s.reconstruct().sub(&a).unwrap().max_abs() <= 1e-15);
        prop_assert!(s.m_part.symmetry_defect() == 0.0);
        prop_assert!(s.n_part.add(&s.n_part.transpose()).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn skew_radius_is_scale_invariant(seed in any::<u64>(), n in 2usize..10, c in 0.01f64..100.0) {
        let a = random_definite(&mut rng(seed), n, 1.0);
        let rho = bounds::spectral_radius_skew(&HermitianSplit::from_dense(&a)).unwrap();
        let scaled = bounds::spectral_radius_skew(&HermitianSplit::from_dense(&a.scaled(c))).unwrap();
        prop_assert!((rho - scaled).abs() <= 1e-10 * (1.0 + rho));
    }

    #[test]
    fn bound3_is_monotone(kappa in 1.0f64..1e4, rho in 0.0f64..10.0) {
        let b = bounds::bound3_from(kappa, rho);
        prop_assert!((0.0..1.0).contains(&b));
        prop_assert!(bounds::bound3_from(kappa * 2.0, rho) >= b);
        prop_assert!(bounds::bound3_from(kappa, rho + 0.5) >= b);
    }
}
