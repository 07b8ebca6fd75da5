use super::{check_dim, DenseMatrix, LinalgError};
use crate::Real;

/// `P A = L U` with partial pivoting, stored packed.
#[derive(Debug, Clone)]
pub struct LuFactor<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> LuFactor<T> {
    pub fn new(a: &DenseMatrix<T>) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        let threshold = T::from_usize(n.max(1)).unwrap() * T::epsilon() * scale;
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -T::one()), |best, c| if c.1 > best.1 { c } else { best });
            if !(pv > threshold) {
                return Err(LinalgError::Singular { pivot: k });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
            }
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in (k + 1)..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= f * u;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s = super::vector::dot(&row[..i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s = super::vector::dot(&row[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / row[i];
        }
        b.copy_from_slice(&x);
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        check_dim(self.dim(), b.len())?;
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    /// Dense `A⁻¹`.
    pub fn inverse(&self) -> DenseMatrix<T> {
        let n = self.dim();
        let mut inv_t = DenseMatrix::identity(n);
        for j in 0..n {
            self.solve_in_place(inv_t.row_mut(j));
        }
        inv_t.transpose()
    }
}

pub fn lu_solve<T: Real>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>, LinalgError> {
    LuFactor::new(a)?.solve(b)
}
