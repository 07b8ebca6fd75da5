use super::{CholeskyFactor, CsrMatrix, DenseMatrix, LinalgError, LuFactor};
use crate::Real;

/// Operators larger than this are never materialized densely.
pub const DENSIFY_LIMIT: usize = 4096;

/// A square linear map `x -> y`.
pub trait LinearOperator<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `self * x` into `y`. Both slices have length `dim()`.
    fn apply(&self, x: &[T], y: &mut [T]);

    fn apply_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl<T: Real> LinearOperator<T> for CsrMatrix<T> {
    fn dim(&self) -> usize {
        debug_assert_eq!(self.rows(), self.cols());
        self.rows()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.spmv_into(x, y);
    }
}

impl<T: Real> LinearOperator<T> for DenseMatrix<T> {
    fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.matvec_into(x, y);
    }
}

/// Acts as `S⁻¹` for the factored SPD matrix `S`.
impl<T: Real> LinearOperator<T> for CholeskyFactor<T> {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        y.copy_from_slice(x);
        self.solve_in_place(y);
    }
}

/// Acts as `A⁻¹` for the factored matrix `A`.
impl<T: Real> LinearOperator<T> for LuFactor<T> {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        y.copy_from_slice(x);
        self.solve_in_place(y);
    }
}

impl<T: Real, L: LinearOperator<T> + ?Sized> LinearOperator<T> for &L {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (**self).apply(x, y)
    }
}

impl<T: Real, L: LinearOperator<T> + ?Sized> LinearOperator<T> for Box<L> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (**self).apply(x, y)
    }
}

impl<T: Real, L: LinearOperator<T> + ?Sized> LinearOperator<T> for std::sync::Arc<L> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (**self).apply(x, y)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Identity {
    dim: usize,
}

impl Identity {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl<T: Real> LinearOperator<T> for Identity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        y.copy_from_slice(x);
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T: Real, F: Fn(&[T], &mut [T]) + Send + Sync> LinearOperator<T> for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (self.f)(x, y)
    }
}

/// `alpha * A + beta * B`
pub struct ScaledSum<'a, T> {
    pub a: &'a dyn LinearOperator<T>,
    pub alpha: T,
    pub b: &'a dyn LinearOperator<T>,
    pub beta: T,
}

impl<T: Real> LinearOperator<T> for ScaledSum<'_, T> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let mut tmp = vec![T::zero(); y.len()];
        self.a.apply(x, y);
        self.b.apply(x, &mut tmp);
        for (yi, ti) in y.iter_mut().zip(tmp) {
            *yi = self.alpha * *yi + self.beta * ti;
        }
    }
}

/// Materializes an operator by applying it to the canonical basis.
pub fn densify<T: Real>(op: &dyn LinearOperator<T>) -> Result<DenseMatrix<T>, LinalgError> {
    let n = op.dim();
    if n > DENSIFY_LIMIT {
        return Err(LinalgError::TooLargeToDensify {
            dim: n,
            limit: DENSIFY_LIMIT,
        });
    }
    let mut out = DenseMatrix::zeros(n, n);
    let mut e = vec![T::zero(); n];
    let mut col = vec![T::zero(); n];
    for j in 0..n {
        e[j] = T::one();
        op.apply(&e, &mut col);
        e[j] = T::zero();
        for i in 0..n {
            out[(i, j)] = col[i];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn densify_roundtrip() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(densify(&a).unwrap(), a);
        let id = densify::<f64>(&Identity::new(3)).unwrap();
        assert_eq!(id, DenseMatrix::identity(3));
    }

    #[test]
    fn densify_limit() {
        let big = Identity::new(DENSIFY_LIMIT + 1);
        assert!(matches!(
            densify::<f64>(&big),
            Err(LinalgError::TooLargeToDensify { .. })
        ));
    }

    #[test]
    fn scaled_sum() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        let id = Identity::new(2);
        let s = ScaledSum { a: &a, alpha: 2.0, b: &id, beta: -1.0 };
        assert_eq!(s.apply_vec(&[1.0, 1.0]), vec![1.0, 3.0]);
    }
}
