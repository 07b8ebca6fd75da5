//! Slice-level BLAS-1 helpers.

use crate::Real;

#[inline]
pub fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

#[inline]
pub fn norm2<T: Real>(x: &[T]) -> T {
    dot(x, x).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale<T: Real>(alpha: T, x: &mut [T]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// `x - y`
pub fn sub<T: Real>(x: &[T], y: &[T]) -> Vec<T> {
    x.iter().zip(y).map(|(&a, &b)| a - b).collect()
}

pub fn max_abs<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
}

pub fn zeros<T: Real>(n: usize) -> Vec<T> {
    vec![T::zero(); n]
}
