use super::{check_dim, DenseMatrix, LinalgError};
use crate::Real;

/// Lower-triangular factor `L` with `L Lᵀ = S`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor<T> {
    l: DenseMatrix<T>,
}

/// Factors a symmetric positive definite matrix. Only the lower triangle of
/// `s` is read. A pivot below `n · eps · max diag` is reported as
/// [`LinalgError::NotPositiveDefinite`].
pub fn cholesky<T: Real>(s: &DenseMatrix<T>) -> Result<CholeskyFactor<T>, LinalgError> {
    if !s.is_square() {
        return Err(LinalgError::NotSquare {
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    let n = s.rows();
    let max_diag = (0..n).fold(T::zero(), |m, i| m.max(s[(i, i)].abs()));
    let threshold = T::from_usize(n.max(1)).unwrap() * T::epsilon() * max_diag;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let lj = l.row(j)[..j].to_vec();
        let pivot = s[(j, j)] - super::vector::dot(&lj, &lj);
        if !(pivot > threshold) {
            return Err(LinalgError::NotPositiveDefinite { pivot: j });
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let li = &l.row(i)[..j];
            let v = (s[(i, j)] - super::vector::dot(li, &lj)) / d;
            l[(i, j)] = v;
        }
    }
    Ok(CholeskyFactor { l })
}

impl<T: Real> CholeskyFactor<T> {
    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn lower(&self) -> &DenseMatrix<T> {
        &self.l
    }

    /// `L Lᵀ`
    pub fn reconstruct(&self) -> DenseMatrix<T> {
        self.l.matmul(&self.l.transpose()).expect("square factor")
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.l.row(i);
            let s = super::vector::dot(&row[..i], &b[..i]);
            b[i] = (b[i] - s) / row[i];
        }
    }

    /// Solves `Lᵀ y = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        for i in (0..n).rev() {
            b[i] /= self.l[(i, i)];
            let bi = b[i];
            let row = self.l.row(i);
            for k in 0..i {
                b[k] -= row[k] * bi;
            }
        }
    }

    /// Solves `L Lᵀ x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        self.solve_lower_in_place(b);
        self.solve_upper_in_place(b);
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        check_dim(self.dim(), b.len())?;
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    /// `L⁻¹ S L⁻ᵀ` for symmetric `S`, symmetrized to remove round-off skew.
    pub fn congruence_inverse(&self, s: &DenseMatrix<T>) -> Result<DenseMatrix<T>, LinalgError> {
        check_dim(self.dim(), s.rows())?;
        check_dim(self.dim(), s.cols())?;
        let x = self.inverse_lower_times(s);
        let mut c = self.inverse_lower_times(&x.transpose());
        c.symmetrize();
        Ok(c)
    }

    /// `L⁻¹ B`, column by column (done on rows of `Bᵀ`).
    pub fn inverse_lower_times(&self, b: &DenseMatrix<T>) -> DenseMatrix<T> {
        let mut bt = b.transpose();
        for j in 0..bt.rows() {
            self.solve_lower_in_place(bt.row_mut(j));
        }
        bt.transpose()
    }

    /// Dense `S⁻¹`.
    pub fn inverse(&self) -> DenseMatrix<T> {
        let n = self.dim();
        let mut inv = DenseMatrix::identity(n);
        for j in 0..n {
            self.solve_in_place(inv.row_mut(j));
        }
        inv.symmetrize();
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_factor() {
        let f = cholesky(&DenseMatrix::<f64>::identity(4)).unwrap();
        assert_eq!(f.lower(), &DenseMatrix::identity(4));
    }

    #[test]
    fn hand_example() {
        let s = DenseMatrix::<f64>::from_rows(&[vec![4.0, 2.0], vec![2.0, 5.0]]);
        let f = cholesky(&s).unwrap();
        assert_eq!(f.lower(), &DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![1.0, 2.0]]));
        let x = f.solve(&[6.0, 7.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn indefinite_rejected() {
        let s = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert_eq!(cholesky(&s).unwrap_err(), LinalgError::NotPositiveDefinite { pivot: 1 });
        let z = DenseMatrix::<f64>::zeros(2, 2);
        assert_eq!(cholesky(&z).unwrap_err(), LinalgError::NotPositiveDefinite { pivot: 0 });
    }
}
