mod common;

use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use wpgcr::linalg::{DenseMatrix, FnOperator, LinearOperator};
use wpgcr::weighted::{self, probe_spd, WeightError, WeightOperator};

#[test]
fn gram_matrix_matches_pairwise_products() {
    let mut g = rng(1);
    let w = weight(&random_spd(&mut g, 7, 0.2));
    let vs: Vec<Vec<f64>> = (0..4).map(|_| random_vector(&mut g, 7)).collect();
    let gram = weighted::w_gram(&w, &vs).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let direct = weighted::w_inner(&w, &vs[i], &vs[j]).unwrap();
            assert!((gram[(i, j)] - direct).abs() <= 1e-14 * (1.0 + direct.abs()));
        }
    }
}

#[test]
fn rejects_nonsymmetric_and_indefinite_weights() {
    let skewed = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 2.0]]);
    assert!(WeightOperator::from_dense(skewed).is_err());
    let indefinite = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
    assert!(WeightOperator::from_dense(indefinite).is_err());
}

#[test]
fn probing_catches_a_matrix_free_nonsymmetric_operator() {
    let op = FnOperator::new(3, |x: &[f64], y: &mut [f64]| {
        y[0] = 2.0 * x[0] + x[1];
        y[1] = 2.0 * x[1];
        y[2] = 2.0 * x[2];
    });
    assert!(matches!(probe_spd(&op), Err(WeightError::NotSymmetric { .. })));
    let sym = FnOperator::new(3, |x: &[f64], y: &mut [f64]| y.iter_mut().zip(x).for_each(|(y, x)| *y = 3.0 * x));
    assert!(probe_spd(&sym).is_ok());
    assert!(WeightOperator::new(Arc::new(sym)).is_ok());
}

#[test]
fn identity_weight_is_euclidean() {
    let w = WeightOperator::<f64>::identity(3);
    assert!(w.is_identity());
    assert_eq!(w.norm(&[3.0, 4.0, 0.0]).unwrap(), 5.0);
    assert_eq!(w.operator().dim(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cauchy_schwarz(seed in any::<u64>(), n in 1usize..16) {
        let mut g = rng(seed);
        let w = weight(&random_spd(&mut g, n, 0.1));
        let (x, y) = (random_vector(&mut g, n), random_vector(&mut g, n));
        let ip = w.inner(&x, &y).unwrap();
        let bound = w.norm(&x).unwrap() * w.norm(&y).unwrap();
        prop_assert!(ip.abs() <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn inner_product_is_symmetric(seed in any::<u64>(), n in 1usize..16) {
        let mut g = rng(seed);
        let w = weight(&random_spd(&mut g, n, 0.1));
        let (x, y) = (random_vector(&mut g, n), random_vector(&mut g, n));
        let (a, b) = (w.inner(&x, &y).unwrap(), w.inner(&y, &x).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}

#[test]
fn euclidean_and_dense_agreement() {
    let mut g = rng(2);
    let eye = WeightOperator::<f64>::identity(9);
    let dense = random_spd(&mut g, 9, 0.2);
    let w = weight(&dense);
    for _ in 0..10 {
        let (x, y) = (random_vector(&mut g, 9), random_vector(&mut g, 9));
        let e = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((eye.norm(&x).unwrap() - e).abs() <= 1e-14 * e);
        let direct = wpgcr::linalg::vector::dot(&y, &dense.matvec(&x).unwrap());
        assert!((w.inner(&x, &y).unwrap() - direct).abs() <= 1e-13 * (1.0 + direct.abs()));
    }
}
