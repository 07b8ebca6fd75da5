use super::{check_dim, DenseMatrix, LinalgError};
use crate::Real;

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Assembles from `(row, col, value)` triplets. Duplicates are summed in
    /// input order; explicit zeros are kept.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, T)],
    ) -> Result<Self, LinalgError> {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(LinalgError::InvalidStructure(format!(
                    "entry ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            if !v.is_finite() {
                return Err(LinalgError::NonFinite { row: r, col: c });
            }
        }
        // stable: duplicates accumulate in input order
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));

        let mut row_offsets = vec![0usize; rows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = triplets[k];
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds from raw CSR arrays, validating the structural invariants.
    pub fn from_raw_parts(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self, LinalgError> {
        let bad = |msg: &str| Err(LinalgError::InvalidStructure(msg.to_string()));
        if row_offsets.len() != rows + 1 || row_offsets[0] != 0 {
            return bad("row_offsets must have rows+1 entries starting at 0");
        }
        if *row_offsets.last().unwrap() != col_indices.len() || col_indices.len() != values.len() {
            return bad("last row offset must equal nnz");
        }
        for i in 0..rows {
            if row_offsets[i] > row_offsets[i + 1] {
                return bad("row_offsets must be nondecreasing");
            }
            let row = &col_indices[row_offsets[i]..row_offsets[i + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return bad("column indices must be strictly increasing within a row");
            }
            if row.iter().any(|&c| c >= cols) {
                return bad("column index out of range");
            }
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_offsets: vec![0; rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_dense(m: &DenseMatrix<T>) -> Self {
        let mut triplets = Vec::new();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let v = m[(i, j)];
                if v != T::zero() {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.rows(), m.cols(), &triplets).expect("dense entries are in range")
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
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[range.clone()], &self.values[range])
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            out.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, j, v)));
        }
        out
    }

    pub fn spmv(&self, x: &[T]) -> Result<Vec<T>, LinalgError> {
        check_dim(self.cols, x.len())?;
        let mut y = vec![T::zero(); self.rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = self * x`; lengths are checked in debug builds only.
    pub fn spmv_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols
                .iter()
                .zip(vals)
                .fold(T::zero(), |acc, (&j, &v)| acc + v * x[j]);
        }
    }

    pub fn transpose(&self) -> Self {
        let mut triplets: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        triplets.sort_by_key(|t| (t.0, t.1));
        Self::from_triplets(self.cols, self.rows, &triplets).expect("transpose stays in range")
    }

    /// `alpha * self + beta * other`
    pub fn linear_combination(&self, alpha: T, other: &Self, beta: T) -> Result<Self, LinalgError> {
        check_dim(self.rows, other.rows)?;
        check_dim(self.cols, other.cols)?;
        let mut triplets: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(i, j, v)| (i, j, alpha * v))
            .collect();
        triplets.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, beta * v)));
        Self::from_triplets(self.rows, self.cols, &triplets)
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.linear_combination(T::one(), other, T::one())
    }

    /// `(A + Aᵀ) / 2`
    pub fn symmetric_part(&self) -> Result<Self, LinalgError> {
        let half = T::lit(0.5);
        self.linear_combination(half, &self.transpose(), half)
    }

    /// `(A - Aᵀ) / 2`
    pub fn skew_part(&self) -> Result<Self, LinalgError> {
        let half = T::lit(0.5);
        self.linear_combination(half, &self.transpose(), -half)
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// Dense block `R A Rᵀ` where `R` selects the rows/columns in `indices`.
    pub fn extract_block(&self, indices: &[usize]) -> DenseMatrix<T> {
        let mut local = vec![usize::MAX; self.cols];
        for (k, &g) in indices.iter().enumerate() {
            local[g] = k;
        }
        let n = indices.len();
        let mut block = DenseMatrix::zeros(n, n);
        for (k, &g) in indices.iter().enumerate() {
            let (cols, vals) = self.row(g);
            for (&j, &v) in cols.iter().zip(vals) {
                let l = local[j];
                if l != usize::MAX {
                    block[(k, l)] = v;
                }
            }
        }
        block
    }

    pub fn scaled(&self, alpha: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= alpha;
        }
        out
    }
}
