use std::ops::{Index, IndexMut};

use super::{check_dim, LinalgError};
use crate::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major storage, rejecting non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, LinalgError> {
        check_dim(rows * cols, data.len())?;
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: k / cols.max(1),
                col: k % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Convenience constructor from nested rows; panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self::from_row_major(r, c, data).expect("finite entries")
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(columns: &[Vec<T>]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        Self::from_fn(rows, cols, |i, j| columns[j][i])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>, LinalgError> {
        check_dim(self.cols, x.len())?;
        Ok((0..self.rows)
            .map(|i| super::vector::dot(self.row(i), x))
            .collect())
    }

    /// `y = self * x` without allocation; dimensions are the caller's problem.
    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = super::vector::dot(self.row(i), x);
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        check_dim(self.cols, other.rows)?;
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self, LinalgError> {
        check_dim(self.rows, other.rows)?;
        check_dim(self.cols, other.cols)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * alpha).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> T {
        super::vector::norm2(&self.data)
    }

    pub fn max_abs(&self) -> T {
        super::vector::max_abs(&self.data)
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> T {
        if !self.is_square() {
            return T::infinity();
        }
        let mut defect = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                defect = defect.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        let scale = self.max_abs();
        if scale > T::zero() {
            defect / scale
        } else {
            defect
        }
    }

    /// `(A + Aᵀ) / 2`
    pub fn symmetric_part(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| half * (self[(i, j)] + self[(j, i)]))
    }

    /// `(A - Aᵀ) / 2`
    pub fn skew_part(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| half * (self[(i, j)] - self[(j, i)]))
    }

    /// Overwrites the matrix with its symmetric part in place.
    pub fn symmetrize(&mut self) {
        let half = T::lit(0.5);
        for i in 0..self.rows {
            for j in 0..i {
                let v = half * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        let err = DenseMatrix::from_row_major(2, 2, vec![1.0, f64::NAN, 0.0, 1.0]).unwrap_err();
        assert_eq!(err, LinalgError::NonFinite { row: 0, col: 1 });
        assert!(DenseMatrix::<f64>::from_row_major(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn matmul_and_transpose() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = a.matmul(&a.transpose()).unwrap();
        assert_eq!(b, DenseMatrix::from_rows(&[vec![5.0, 11.0], vec![11.0, 25.0]]));
        assert_eq!(a.matvec(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    }

    #[test]
    fn split_parts() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert_eq!(a.symmetric_part(), DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]));
        assert_eq!(a.skew_part(), DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]));
    }
}
