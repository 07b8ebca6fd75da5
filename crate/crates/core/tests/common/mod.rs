#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wpgcr::linalg::vector::dot;
use wpgcr::linalg::DenseMatrix;
use wpgcr::weighted::{PreconditionerHandle, WeightOperator};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// `BᵀB / n + shift I`
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DenseMatrix<f64> {
    let b = random_matrix(rng, n);
    let mut s = b.transpose().matmul(&b).unwrap().scaled(1.0 / n as f64);
    for i in 0..n {
        s.row_mut(i)[i] += shift;
    }
    s.symmetrize();
    s
}

/// SPD symmetric part plus a skew part scaled by `strength`.
pub fn random_definite(rng: &mut ChaCha8Rng, n: usize, strength: f64) -> DenseMatrix<f64> {
    let s = random_spd(rng, n, 0.5);
    let k = random_matrix(rng, n).skew_part().scaled(strength);
    s.add(&k).unwrap()
}

pub fn hermitian(h: &DenseMatrix<f64>) -> PreconditionerHandle<f64> {
    PreconditionerHandle::hermitian(Arc::new(h.clone())).unwrap()
}

pub fn weight(w: &DenseMatrix<f64>) -> WeightOperator<f64> {
    WeightOperator::from_dense(w.clone()).unwrap()
}

pub fn w_norm(w: &DenseMatrix<f64>, v: &[f64]) -> f64 {
    dot(&w.matvec(v).unwrap(), v).max(0.0).sqrt()
}

pub fn residual(a: &DenseMatrix<f64>, b: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = a.matvec(x).unwrap();
    b.iter().zip(ax).map(|(b, ax)| b - ax).collect()
}

pub fn rel_diff(x: &[f64], y: &[f64]) -> f64 {
    let num = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}
