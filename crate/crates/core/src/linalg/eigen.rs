use super::{cholesky, DenseMatrix, LinalgError};
use crate::Real;

const JACOBI_MAX_SWEEPS: usize = 100;
const QL_MAX_ITER: usize = 64;

/// Above this order [`sym_eig`] switches from Jacobi to tridiagonal QL.
pub const JACOBI_DIM_LIMIT: usize = 128;

/// Eigen-decomposition of a symmetric matrix. Eigenvalues ascend; column `k`
/// of `vectors` pairs with `values[k]`.
#[derive(Debug, Clone)]
pub struct SymEig<T> {
    pub values: Vec<T>,
    pub vectors: DenseMatrix<T>,
}

impl<T: Real> SymEig<T> {
    pub fn vector(&self, k: usize) -> Vec<T> {
        self.vectors.column(k)
    }

    pub fn min(&self) -> T {
        self.values[0]
    }

    pub fn max(&self) -> T {
        *self.values.last().expect("non-empty spectrum")
    }
}

fn check_square<T: Real>(s: &DenseMatrix<T>) -> Result<(), LinalgError> {
    if s.is_square() {
        Ok(())
    } else {
        Err(LinalgError::NotSquare {
            rows: s.rows(),
            cols: s.cols(),
        })
    }
}

/// Full symmetric eigen-decomposition. Small orders use cyclic Jacobi, larger
/// ones Householder tridiagonalization followed by implicit QL.
pub fn sym_eig<T: Real>(s: &DenseMatrix<T>) -> Result<SymEig<T>, LinalgError> {
    if s.rows() <= JACOBI_DIM_LIMIT {
        jacobi_eig(s)
    } else {
        tridiagonal_eig(s, true)
    }
}

/// Eigenvalues only, ascending.
pub fn sym_eigvals<T: Real>(s: &DenseMatrix<T>) -> Result<Vec<T>, LinalgError> {
    if s.rows() <= JACOBI_DIM_LIMIT {
        Ok(jacobi_eig(s)?.values)
    } else {
        Ok(tridiagonal_eig(s, false)?.values)
    }
}

/// Eigenvalues of the pencil `S y = λ M y` for SPD `M`, ascending.
pub fn gen_sym_eig<T: Real>(s: &DenseMatrix<T>, m: &DenseMatrix<T>) -> Result<Vec<T>, LinalgError> {
    check_square(s)?;
    super::check_dim(s.rows(), m.rows())?;
    let l = cholesky(m)?;
    let c = l.congruence_inverse(s)?;
    sym_eigvals(&c)
}

/// Cyclic Jacobi. Stops when the off-diagonal Frobenius norm drops below
/// `1e-12 · ‖S‖_F`.
pub fn jacobi_eig<T: Real>(s: &DenseMatrix<T>) -> Result<SymEig<T>, LinalgError> {
    check_square(s)?;
    let n = s.rows();
    let mut a = s.symmetric_part();
    let mut v = DenseMatrix::identity(n);
    let target = T::tol(1e-12) * s.frobenius_norm();

    let off_norm = |a: &DenseMatrix<T>| {
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..i {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
        (acc + acc).sqrt()
    };

    let mut converged = off_norm(&a) <= target;
    let mut sweep = 0;
    while !converged {
        if sweep == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps: sweep });
        }
        sweep += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (apq + apq);
                let t = {
                    let mag = T::one() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    if theta < T::zero() {
                        -mag
                    } else {
                        mag
                    }
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = T::zero();
                a[(q, p)] = T::zero();
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
        converged = off_norm(&a) <= target;
    }
    Ok(sorted(a.diagonal(), Some(v)))
}

/// Householder reduction to tridiagonal form and implicit QL iteration.
/// With `want_vectors == false` the returned `vectors` is empty (0×0).
pub fn tridiagonal_eig<T: Real>(s: &DenseMatrix<T>, want_vectors: bool) -> Result<SymEig<T>, LinalgError> {
    check_square(s)?;
    let n = s.rows();
    if n == 0 {
        return Ok(SymEig {
            values: Vec::new(),
            vectors: DenseMatrix::zeros(0, 0),
        });
    }
    let mut v = s.symmetric_part();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut v, &mut d, &mut e, want_vectors);
    // rows of `vt` are eigenvectors so the QL rotations touch contiguous memory
    let mut vt = if want_vectors { Some(v.transpose()) } else { None };
    tql2(&mut d, &mut e, vt.as_mut())?;
    Ok(sorted(d, vt.map(|m| m.transpose())))
}

fn sorted<T: Real>(values: Vec<T>, vectors: Option<DenseMatrix<T>>) -> SymEig<T> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite eigenvalues"));
    let sorted_values = order.iter().map(|&k| values[k]).collect();
    let vectors = match vectors {
        Some(v) => DenseMatrix::from_fn(n, n, |i, j| v[(i, order[j])]),
        None => DenseMatrix::zeros(0, 0),
    };
    SymEig {
        values: sorted_values,
        vectors,
    }
}

fn tred2<T: Real>(v: &mut DenseMatrix<T>, d: &mut [T], e: &mut [T], want_vectors: bool) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
                v[(j, i)] = T::zero();
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[(k, j)] -= upd;
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
            }
        }
        d[i] = h;
    }

    if !want_vectors {
        for j in 0..n {
            d[j] = v[(j, j)];
        }
        e[0] = T::zero();
        return;
    }

    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[(k, j)] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = T::zero();
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

/// `vt` holds eigenvectors as rows.
fn tql2<T: Real>(d: &mut [T], e: &mut [T], mut vt: Option<&mut DenseMatrix<T>>) -> Result<(), LinalgError> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();

    let two = T::lit(2.0);
    let eps = T::epsilon();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(LinalgError::NoConvergence { sweeps: iter });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(vt) = vt.as_deref_mut() {
                        let cols = vt.cols();
                        let (lo, hi) = vt.as_mut_slice().split_at_mut((i + 1) * cols);
                        let row_i = &mut lo[i * cols..];
                        let row_i1 = &mut hi[..cols];
                        for (a, b) in row_i.iter_mut().zip(row_i1.iter_mut()) {
                            let hk = *b;
                            *b = s * *a + c * hk;
                            *a = c * *a - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    Ok(())
}
