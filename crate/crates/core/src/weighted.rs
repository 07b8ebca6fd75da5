//! SPD weight operators and the inner product `⟨x, y⟩_W = yᵀ W x`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::vector::{dot, norm2};
use crate::linalg::{cholesky, densify, DenseMatrix, Identity, LinalgError, LinearOperator};
use crate::Real;

/// Random probes run when a weight or hermitian preconditioner is validated.
pub const PROBE_COUNT: usize = 32;
const PROBE_SEED: u64 = 0xC0FFEE;
const PROBE_SYMMETRY_TOL: f64 = 1e-12;
const RADICAND_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("weight is not positive definite: ⟨Wx, x⟩ = {value:e}")]
    InvalidWeight { value: f64 },
    #[error("operator is not symmetric: relative defect {defect:e}")]
    NotSymmetric { defect: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn check_len(expected: usize, found: usize) -> Result<(), WeightError> {
    if expected == found {
        Ok(())
    } else {
        Err(WeightError::DimensionMismatch { expected, found })
    }
}

/// Runs [`PROBE_COUNT`] seeded symmetry/positivity probes on `op`.
pub fn probe_spd<T: Real>(op: &dyn LinearOperator<T>) -> Result<(), WeightError> {
    let n = op.dim();
    if n == 0 {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let mut draw = || -> Vec<T> { (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect() };
    let tol = T::tol(PROBE_SYMMETRY_TOL);
    for _ in 0..PROBE_COUNT {
        let x = draw();
        let y = draw();
        let wx = op.apply_vec(&x);
        let wy = op.apply_vec(&y);
        let lhs = dot(&wx, &y);
        let rhs = dot(&x, &wy);
        let scale = norm2(&wx) * norm2(&y) + norm2(&x) * norm2(&wy);
        if (lhs - rhs).abs() > tol * scale {
            return Err(WeightError::NotSymmetric {
                defect: ((lhs - rhs).abs() / scale).to_f64_lossy(),
            });
        }
        let q = dot(&wx, &x);
        if !(q > T::zero()) {
            return Err(WeightError::InvalidWeight {
                value: q.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

/// The HPD operator `W` defining `⟨·,·⟩_W`.
#[derive(Clone)]
pub struct WeightOperator<T> {
    op: Arc<dyn LinearOperator<T>>,
    inverse: Option<Arc<dyn LinearOperator<T>>>,
    identity: bool,
}

impl<T: Real> std::fmt::Debug for WeightOperator<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WeightOperator")
            .field("dim", &self.dim())
            .field("identity", &self.identity)
            .field("has_inverse", &self.inverse.is_some())
            .finish()
    }
}

impl<T: Real> WeightOperator<T> {
    /// Euclidean inner product.
    pub fn identity(dim: usize) -> Self {
        Self {
            op: Arc::new(Identity::new(dim)),
            inverse: Some(Arc::new(Identity::new(dim))),
            identity: true,
        }
    }

    /// Wraps `op`, validating it with random probes.
    pub fn new(op: Arc<dyn LinearOperator<T>>) -> Result<Self, WeightError> {
        probe_spd(op.as_ref())?;
        Ok(Self::new_unchecked(op))
    }

    /// Wraps `op` without validation.
    pub fn new_unchecked(op: Arc<dyn LinearOperator<T>>) -> Self {
        Self {
            op,
            inverse: None,
            identity: false,
        }
    }

    /// Weight given by an explicit SPD matrix, with its Cholesky factor serving
    /// as `W⁻¹`.
    pub fn from_dense(w: DenseMatrix<T>) -> Result<Self, WeightError> {
        let factor = cholesky(&w)?;
        let op: Arc<dyn LinearOperator<T>> = Arc::new(w);
        probe_spd(op.as_ref())?;
        Ok(Self {
            op,
            inverse: Some(Arc::new(factor)),
            identity: false,
        })
    }

    pub fn with_inverse(mut self, inverse: Arc<dyn LinearOperator<T>>) -> Self {
        self.inverse = Some(inverse);
        self
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn operator(&self) -> &Arc<dyn LinearOperator<T>> {
        &self.op
    }

    pub fn inverse(&self) -> Option<&Arc<dyn LinearOperator<T>>> {
        self.inverse.as_ref()
    }

    #[inline]
    pub fn apply(&self, x: &[T], y: &mut [T]) {
        if self.identity {
            y.copy_from_slice(x);
        } else {
            self.op.apply(x, y);
        }
    }

    pub fn apply_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); x.len()];
        self.apply(x, &mut y);
        y
    }

    /// `yᵀ W x`
    pub fn inner(&self, x: &[T], y: &[T]) -> Result<T, WeightError> {
        check_len(self.dim(), x.len())?;
        check_len(self.dim(), y.len())?;
        Ok(dot(&self.apply_vec(x), y))
    }

    pub fn norm(&self, x: &[T]) -> Result<T, WeightError> {
        let q = self.inner(x, x)?;
        sqrt_radicand(q, dot(x, x))
    }

    /// Gram matrix `G_ij = ⟨v_i, v_j⟩_W`.
    pub fn gram(&self, vectors: &[Vec<T>]) -> Result<DenseMatrix<T>, WeightError> {
        for v in vectors {
            check_len(self.dim(), v.len())?;
        }
        let wv: Vec<Vec<T>> = vectors.iter().map(|v| self.apply_vec(v)).collect();
        let k = vectors.len();
        let mut g = DenseMatrix::from_fn(k, k, |i, j| dot(&wv[i], &vectors[j]));
        g.symmetrize();
        Ok(g)
    }

    /// Densifies `W` and attempts a Cholesky factorization.
    pub fn validate_cholesky(&self) -> Result<(), WeightError> {
        let dense = densify(self.op.as_ref())?;
        let defect = dense.symmetry_defect();
        if defect > T::tol(1e-12) {
            return Err(WeightError::NotSymmetric {
                defect: defect.to_f64_lossy(),
            });
        }
        cholesky(&dense)?;
        Ok(())
    }
}

/// `sqrt(q)` where `q` should be `‖x‖²_W`; negative values within
/// `1e-14 · ‖x‖²` are treated as zero.
pub(crate) fn sqrt_radicand<T: Real>(q: T, xx: T) -> Result<T, WeightError> {
    if q >= T::zero() {
        Ok(q.sqrt())
    } else if q >= -T::tol(RADICAND_TOL) * xx {
        Ok(T::zero())
    } else {
        Err(WeightError::InvalidWeight {
            value: q.to_f64_lossy(),
        })
    }
}

pub fn w_inner<T: Real>(w: &WeightOperator<T>, x: &[T], y: &[T]) -> Result<T, WeightError> {
    w.inner(x, y)
}

pub fn w_norm<T: Real>(w: &WeightOperator<T>, x: &[T]) -> Result<T, WeightError> {
    w.norm(x)
}

pub fn w_gram<T: Real>(w: &WeightOperator<T>, vectors: &[Vec<T>]) -> Result<DenseMatrix<T>, WeightError> {
    w.gram(vectors)
}

/// The preconditioner `H`, flagged hermitian when it is SPD.
#[derive(Clone)]
pub struct PreconditionerHandle<T> {
    op: Arc<dyn LinearOperator<T>>,
    hermitian: bool,
    identity: bool,
}

impl<T: Real> std::fmt::Debug for PreconditionerHandle<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PreconditionerHandle")
            .field("dim", &self.dim())
            .field("hermitian", &self.hermitian)
            .field("identity", &self.identity)
            .finish()
    }
}

impl<T: Real> PreconditionerHandle<T> {
    pub fn identity(dim: usize) -> Self {
        Self {
            op: Arc::new(Identity::new(dim)),
            hermitian: true,
            identity: true,
        }
    }

    /// A general (possibly non-symmetric) preconditioner.
    pub fn general(op: Arc<dyn LinearOperator<T>>) -> Self {
        Self {
            op,
            hermitian: false,
            identity: false,
        }
    }

    /// An SPD preconditioner, validated with random probes.
    pub fn hermitian(op: Arc<dyn LinearOperator<T>>) -> Result<Self, WeightError> {
        probe_spd(op.as_ref())?;
        Ok(Self::hermitian_unchecked(op))
    }

    pub fn hermitian_unchecked(op: Arc<dyn LinearOperator<T>>) -> Self {
        Self {
            op,
            hermitian: true,
            identity: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn operator(&self) -> &Arc<dyn LinearOperator<T>> {
        &self.op
    }

    #[inline]
    pub fn apply(&self, x: &[T], y: &mut [T]) {
        if self.identity {
            y.copy_from_slice(x);
        } else {
            self.op.apply(x, y);
        }
    }

    pub fn apply_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); x.len()];
        self.apply(x, &mut y);
        y
    }

    /// The same operator viewed as a weight; `None` unless hermitian.
    pub fn as_weight(&self) -> Option<WeightOperator<T>> {
        if !self.hermitian {
            return None;
        }
        if self.identity {
            return Some(WeightOperator::identity(self.dim()));
        }
        Some(WeightOperator::new_unchecked(self.op.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inner_examples() {
        let id = WeightOperator::<f64>::identity(2);
        assert_eq!(w_inner(&id, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(w_norm(&id, &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(w_norm(&id, &[0.0, 0.0]).unwrap(), 0.0);
        let d = WeightOperator::from_dense(DenseMatrix::from_diagonal(&[2.0, 3.0])).unwrap();
        assert_eq!(w_inner(&d, &[1.0, 1.0], &[1.0, 1.0]).unwrap(), 5.0);
        let four = WeightOperator::from_dense(DenseMatrix::from_diagonal(&[4.0])).unwrap();
        assert_eq!(w_norm(&four, &[1.0]).unwrap(), 2.0);
    }

    #[test]
    fn gram_of_basis() {
        let id = WeightOperator::<f64>::identity(3);
        let basis: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| f64::from(i == j)).collect()).collect();
        assert_eq!(w_gram(&id, &basis).unwrap(), DenseMatrix::identity(3));
        let g = w_gram(&id, &[vec![1.0, 2.0, 2.0]]).unwrap();
        assert_eq!(g[(0, 0)], 9.0);
    }

    #[test]
    fn rejects_bad_weights() {
        let indefinite = DenseMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(WeightOperator::new(Arc::new(indefinite)).is_err());
        let skew = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        assert!(matches!(
            WeightOperator::new(Arc::new(skew)),
            Err(WeightError::NotSymmetric { .. })
        ));
        let w = WeightOperator::new_unchecked(Arc::new(DenseMatrix::from_diagonal(&[1.0, -1.0])));
        assert!(matches!(w.norm(&[0.0, 1.0]), Err(WeightError::InvalidWeight { .. })));
        assert!(w.validate_cholesky().is_err());
    }

    #[test]
    fn dimension_checks() {
        let id = WeightOperator::<f64>::identity(2);
        assert_eq!(
            id.inner(&[1.0], &[1.0, 2.0]).unwrap_err(),
            WeightError::DimensionMismatch { expected: 2, found: 1 }
        );
    }

    #[test]
    fn tiny_negative_radicand_forgiven() {
        assert_eq!(sqrt_radicand(-1e-20, 1.0).unwrap(), 0.0);
        assert!(sqrt_radicand(-1e-10, 1.0).is_err());
    }
}
