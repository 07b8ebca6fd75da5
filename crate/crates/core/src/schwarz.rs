//! Additive Schwarz preconditioners on structured partitions.
//!
//! Subdomains are lattice-row strips or `p × q` blocks of the dof lattice,
//! grown by layers of matrix-graph adjacency. The two-level variant uses a
//! partition-of-unity coarse space and the deflated form
//!
//! `H = Π (Σ_s R_sᵀ (R_s M R_sᵀ)⁻¹ R_s) Πᵀ + R_0ᵀ (R_0 M R_0ᵀ)⁻¹ R_0`,
//! `Π = I − R_0ᵀ (R_0 M R_0ᵀ)⁻¹ R_0 M`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::vector::dot;
use crate::linalg::{cholesky, densify, sym_eigvals, CholeskyFactor, CsrMatrix, DenseMatrix, LinalgError, LinearOperator, LuFactor};
use crate::weighted::PreconditionerHandle;
use crate::Real;

/// Largest local problem accepted for a dense factorization.
pub const SUBDOMAIN_CAP: usize = 4096;
/// Coarse Gram pivots below this fraction of the largest diagonal are dropped.
pub const COARSE_PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchwarzError {
    #[error("{requested} subdomains requested for {available} lattice lines/dofs")]
    TooManySubdomains { requested: usize, available: usize },
    #[error("grid layout {p}x{q} does not match {n} subdomains")]
    LayoutMismatch { p: usize, q: usize, n: usize },
    #[error("subdomain {0} is empty")]
    EmptySubdomain(usize),
    #[error("subdomain {subdomain} has {size} dofs, above the cap of {cap}")]
    SubdomainTooLarge { subdomain: usize, size: usize, cap: usize },
    #[error("coarse space is empty")]
    EmptyCoarseSpace,
    #[error("local matrix of subdomain {0} is not positive definite")]
    LocalNotPositiveDefinite(usize),
    #[error("local matrix of subdomain {0} is singular")]
    LocalSingular(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Strips,
    Grid { p: usize, q: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub n_subdomains: usize,
    pub layout: Layout,
    pub overlap_layers: usize,
}

impl PartitionSpec {
    pub fn strips(n_subdomains: usize) -> Self {
        Self {
            n_subdomains,
            layout: Layout::Strips,
            overlap_layers: 1,
        }
    }

    pub fn grid(p: usize, q: usize) -> Self {
        Self {
            n_subdomains: p * q,
            layout: Layout::Grid { p, q },
            overlap_layers: 1,
        }
    }

    pub fn with_overlap(mut self, layers: usize) -> Self {
        self.overlap_layers = layers;
        self
    }
}

/// Overlapping subdomains as sorted dof lists (the rows of `R_s`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubdomainMaps {
    pub dof_count: usize,
    pub subdomains: Vec<Vec<usize>>,
    /// Number of subdomains containing each dof.
    pub multiplicity: Vec<usize>,
    /// Largest multiplicity.
    pub k0: usize,
}

impl SubdomainMaps {
    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    /// Subdomains containing each dof, in increasing order.
    pub fn memberships(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.dof_count];
        for (s, dofs) in self.subdomains.iter().enumerate() {
            for &d in dofs {
                out[d].push(s);
            }
        }
        out
    }

    /// `{"dof_count": .., "k0": .., "memberships": [[s, ..], ..]}`
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "dof_count": self.dof_count,
            "n_subdomains": self.subdomains.len(),
            "k0": self.k0,
            "memberships": self.memberships(),
        })
    }

    fn from_subdomains(dof_count: usize, subdomains: Vec<Vec<usize>>) -> Self {
        let mut multiplicity = vec![0; dof_count];
        for dofs in &subdomains {
            for &d in dofs {
                multiplicity[d] += 1;
            }
        }
        let k0 = multiplicity.iter().copied().max().unwrap_or(0);
        Self {
            dof_count,
            subdomains,
            multiplicity,
            k0,
        }
    }
}

/// Splits `0..count` into `parts` contiguous near-equal ranges; returns the
/// part of each position.
fn band(pos: usize, count: usize, parts: usize) -> usize {
    pos * parts / count
}

fn rank_of(values: impl Iterator<Item = usize>) -> (Vec<usize>, usize) {
    let mut distinct: Vec<usize> = values.collect();
    distinct.sort_unstable();
    distinct.dedup();
    let top = distinct.last().map_or(0, |&v| v + 1);
    let mut rank = vec![usize::MAX; top];
    for (r, &v) in distinct.iter().enumerate() {
        rank[v] = r;
    }
    (rank, distinct.len())
}

/// Structured partition of the dofs at lattice positions `lattice[d] = (i, j)`
/// with overlap grown along the sparsity graph of `adjacency`.
pub fn build_partition<T: Real>(
    lattice: &[(usize, usize)],
    adjacency: &CsrMatrix<T>,
    spec: &PartitionSpec,
) -> Result<SubdomainMaps, SchwarzError> {
    let n = lattice.len();
    if adjacency.rows() != n {
        return Err(SchwarzError::DimensionMismatch {
            expected: n,
            found: adjacency.rows(),
        });
    }
    let parts = spec.n_subdomains;
    if parts == 0 || parts > n {
        return Err(SchwarzError::TooManySubdomains {
            requested: parts,
            available: n,
        });
    }
    let (row_rank, rows) = rank_of(lattice.iter().map(|p| p.1));
    let (col_rank, cols) = rank_of(lattice.iter().map(|p| p.0));
    let owner: Vec<usize> = match spec.layout {
        Layout::Strips => {
            if parts > rows {
                return Err(SchwarzError::TooManySubdomains {
                    requested: parts,
                    available: rows,
                });
            }
            lattice.iter().map(|&(_, j)| band(row_rank[j], rows, parts)).collect()
        }
        Layout::Grid { p, q } => {
            if p * q != parts {
                return Err(SchwarzError::LayoutMismatch { p, q, n: parts });
            }
            if p > cols || q > rows {
                return Err(SchwarzError::TooManySubdomains {
                    requested: parts,
                    available: cols.min(rows),
                });
            }
            lattice
                .iter()
                .map(|&(i, j)| band(row_rank[j], rows, q) * p + band(col_rank[i], cols, p))
                .collect()
        }
    };

    let mut subdomains = Vec::with_capacity(parts);
    for s in 0..parts {
        let mut inside = vec![false; n];
        let mut members: Vec<usize> = (0..n).filter(|&d| owner[d] == s).collect();
        if members.is_empty() {
            return Err(SchwarzError::EmptySubdomain(s));
        }
        for &d in &members {
            inside[d] = true;
        }
        for _ in 0..spec.overlap_layers {
            let mut added = Vec::new();
            for &d in &members {
                for &c in adjacency.row(d).0 {
                    if !inside[c] {
                        inside[c] = true;
                        added.push(c);
                    }
                }
            }
            members.extend(added);
        }
        members.sort_unstable();
        subdomains.push(members);
    }
    Ok(SubdomainMaps::from_subdomains(n, subdomains))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarseKind {
    /// One vector per subdomain: `1 / multiplicity` on its dofs.
    PouConstants,
}

/// Coarse basis (columns of `R_0ᵀ`) in sparse form, and the factor of
/// `R_0 M R_0ᵀ`.
#[derive(Debug, Clone)]
pub struct CoarseSpace<T> {
    pub basis: Vec<Vec<(usize, T)>>,
    /// Subdomain each kept vector came from.
    pub sources: Vec<usize>,
    factor: CholeskyFactor<T>,
}

impl<T: Real> CoarseSpace<T> {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `R_0 v`
    pub fn restrict(&self, v: &[T]) -> Vec<T> {
        self.basis.iter().map(|b| b.iter().fold(T::zero(), |acc, &(i, w)| acc + w * v[i])).collect()
    }

    /// `y += R_0ᵀ c`
    pub fn prolong_add(&self, c: &[T], y: &mut [T]) {
        for (b, &ck) in self.basis.iter().zip(c) {
            for &(i, w) in b {
                y[i] += w * ck;
            }
        }
    }

    /// `R_0ᵀ (R_0 M R_0ᵀ)⁻¹ R_0 v`
    pub fn correction(&self, v: &[T]) -> Vec<T> {
        let mut c = self.restrict(v);
        self.factor.solve_in_place(&mut c);
        let mut y = vec![T::zero(); v.len()];
        self.prolong_add(&c, &mut y);
        y
    }

    pub fn dense_basis(&self, n: usize) -> Vec<Vec<T>> {
        self.basis
            .iter()
            .map(|b| {
                let mut v = vec![T::zero(); n];
                for &(i, w) in b {
                    v[i] = w;
                }
                v
            })
            .collect()
    }
}

pub fn build_coarse_space<T: Real>(
    maps: &SubdomainMaps,
    m_matrix: &CsrMatrix<T>,
    kind: CoarseKind,
) -> Result<CoarseSpace<T>, SchwarzError> {
    let CoarseKind::PouConstants = kind;
    if m_matrix.rows() != maps.dof_count {
        return Err(SchwarzError::DimensionMismatch {
            expected: maps.dof_count,
            found: m_matrix.rows(),
        });
    }
    let n = maps.dof_count;
    let candidates: Vec<Vec<(usize, T)>> = maps
        .subdomains
        .iter()
        .map(|dofs| dofs.iter().map(|&d| (d, T::one() / T::lit(maps.multiplicity[d] as f64))).collect())
        .collect();
    let images: Vec<Vec<T>> = candidates
        .par_iter()
        .map(|b| {
            let mut v = vec![T::zero(); n];
            for &(i, w) in b {
                v[i] = w;
            }
            m_matrix.spmv(&v).expect("square")
        })
        .collect();
    let gram = |a: usize, b: usize| candidates[a].iter().fold(T::zero(), |acc, &(i, w)| acc + w * images[b][i]);

    let max_diag = (0..candidates.len()).map(|k| gram(k, k)).fold(T::zero(), T::max);
    let tol = T::tol(COARSE_PIVOT_TOL) * max_diag;
    // incremental Cholesky: keep a candidate only if its pivot survives
    let mut kept: Vec<usize> = Vec::new();
    let mut rows: Vec<Vec<T>> = Vec::new();
    for c in 0..candidates.len() {
        let mut l = Vec::with_capacity(kept.len());
        for (r, &k) in kept.iter().enumerate() {
            let s = (0..r).fold(gram(c, k), |acc, t| acc - l[t] * rows[r][t]);
            l.push(s / rows[r][r]);
        }
        let pivot = gram(c, c) - dot(&l, &l);
        if pivot > tol {
            l.push(pivot.sqrt());
            rows.push(l);
            kept.push(c);
        }
    }
    if kept.is_empty() {
        return Err(SchwarzError::EmptyCoarseSpace);
    }
    let e = DenseMatrix::from_fn(kept.len(), kept.len(), |a, b| {
        let g = gram(kept[a], kept[b]);
        let h = gram(kept[b], kept[a]);
        T::lit(0.5) * (g + h)
    });
    let factor = cholesky(&e)?;
    let basis = kept.iter().map(|&k| candidates[k].clone()).collect();
    Ok(CoarseSpace {
        basis,
        sources: kept,
        factor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchwarzMode {
    OneLevelSym,
    TwoLevelSym,
    OneLevelNonsym,
}

impl SchwarzMode {
    pub fn is_symmetric(self) -> bool {
        !matches!(self, SchwarzMode::OneLevelNonsym)
    }
}

#[derive(Debug, Clone)]
enum LocalSolver<T> {
    Cholesky(CholeskyFactor<T>),
    Lu(LuFactor<T>),
}

impl<T: Real> LocalSolver<T> {
    fn solve_in_place(&self, b: &mut [T]) {
        match self {
            LocalSolver::Cholesky(f) => f.solve_in_place(b),
            LocalSolver::Lu(f) => f.solve_in_place(b),
        }
    }
}

/// Immutable once built; application is thread-safe.
#[derive(Debug, Clone)]
pub struct SchwarzPreconditioner<T> {
    pub mode: SchwarzMode,
    pub maps: SubdomainMaps,
    local: Vec<LocalSolver<T>>,
    coarse: Option<CoarseSpace<T>>,
    m_matrix: Option<CsrMatrix<T>>,
    /// GenEO threshold of the reference setup; not used by this coarse space.
    pub tau: Option<f64>,
}

/// Factorizes the local blocks of `matrix` (the symmetric part for the
/// symmetric modes, the full operator for [`SchwarzMode::OneLevelNonsym`]).
pub fn build_preconditioner<T: Real>(
    matrix: &CsrMatrix<T>,
    maps: &SubdomainMaps,
    mode: SchwarzMode,
) -> Result<SchwarzPreconditioner<T>, SchwarzError> {
    if matrix.rows() != maps.dof_count {
        return Err(SchwarzError::DimensionMismatch {
            expected: maps.dof_count,
            found: matrix.rows(),
        });
    }
    for (s, dofs) in maps.subdomains.iter().enumerate() {
        if dofs.len() > SUBDOMAIN_CAP {
            return Err(SchwarzError::SubdomainTooLarge {
                subdomain: s,
                size: dofs.len(),
                cap: SUBDOMAIN_CAP,
            });
        }
    }
    let local = maps
        .subdomains
        .par_iter()
        .enumerate()
        .map(|(s, dofs)| {
            let block = matrix.extract_block(dofs);
            if mode.is_symmetric() {
                cholesky(&block).map(LocalSolver::Cholesky).map_err(|_| SchwarzError::LocalNotPositiveDefinite(s))
            } else {
                LuFactor::new(&block).map(LocalSolver::Lu).map_err(|_| SchwarzError::LocalSingular(s))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (coarse, m_matrix) = if let SchwarzMode::TwoLevelSym = mode {
        (Some(build_coarse_space(maps, matrix, CoarseKind::PouConstants)?), Some(matrix.clone()))
    } else {
        (None, None)
    };
    Ok(SchwarzPreconditioner {
        mode,
        maps: maps.clone(),
        local,
        coarse,
        m_matrix,
        tau: None,
    })
}

impl<T: Real> SchwarzPreconditioner<T> {
    pub fn dim(&self) -> usize {
        self.maps.dof_count
    }

    pub fn coarse(&self) -> Option<&CoarseSpace<T>> {
        self.coarse.as_ref()
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = Some(tau);
        self
    }

    /// `Σ_s R_sᵀ (R_s B R_sᵀ)⁻¹ R_s v`, summed in subdomain order.
    pub fn apply_local(&self, v: &[T]) -> Vec<T> {
        let pieces: Vec<Vec<T>> = self
            .maps
            .subdomains
            .par_iter()
            .zip(self.local.par_iter())
            .map(|(dofs, solver)| {
                let mut r: Vec<T> = dofs.iter().map(|&d| v[d]).collect();
                solver.solve_in_place(&mut r);
                r
            })
            .collect();
        let mut y = vec![T::zero(); v.len()];
        for (dofs, piece) in self.maps.subdomains.iter().zip(pieces) {
            for (&d, p) in dofs.iter().zip(piece) {
                y[d] += p;
            }
        }
        y
    }

    /// `Π x = x − R_0ᵀ E⁻¹ R_0 M x`; identity without a coarse space.
    pub fn project(&self, x: &[T]) -> Vec<T> {
        match (&self.coarse, &self.m_matrix) {
            (Some(c), Some(m)) => {
                let mx = m.spmv(x).expect("square");
                let corr = c.correction(&mx);
                x.iter().zip(corr).map(|(&a, b)| a - b).collect()
            }
            _ => x.to_vec(),
        }
    }

    /// `Πᵀ v = v − M R_0ᵀ E⁻¹ R_0 v`
    pub fn project_transpose(&self, v: &[T]) -> Vec<T> {
        match (&self.coarse, &self.m_matrix) {
            (Some(c), Some(m)) => {
                let corr = c.correction(v);
                let mc = m.spmv(&corr).expect("square");
                v.iter().zip(mc).map(|(&a, b)| a - b).collect()
            }
            _ => v.to_vec(),
        }
    }

    pub fn into_handle(self) -> PreconditionerHandle<T> {
        let symmetric = self.mode.is_symmetric();
        let op: Arc<dyn LinearOperator<T>> = Arc::new(self);
        if symmetric {
            PreconditionerHandle::hermitian_unchecked(op)
        } else {
            PreconditionerHandle::general(op)
        }
    }
}

impl<T: Real> LinearOperator<T> for SchwarzPreconditioner<T> {
    fn dim(&self) -> usize {
        self.maps.dof_count
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let out = match &self.coarse {
            Some(c) => {
                let inner = self.apply_local(&self.project_transpose(x));
                let mut out = self.project(&inner);
                let corr = c.correction(x);
                out.iter_mut().zip(corr).for_each(|(o, k)| *o += k);
                out
            }
            None => self.apply_local(x),
        };
        y.copy_from_slice(&out);
    }
}

/// `κ(H M)` from the eigenvalues of `L_Hᵀ M L_H`, `H = L_H L_Hᵀ`.
pub fn condition_number<T: Real>(h: &dyn LinearOperator<T>, m_matrix: &CsrMatrix<T>) -> Result<T, SchwarzError> {
    if h.dim() != m_matrix.rows() {
        return Err(SchwarzError::DimensionMismatch {
            expected: h.dim(),
            found: m_matrix.rows(),
        });
    }
    let mut hd = densify(h)?;
    hd.symmetrize();
    let l = cholesky(&hd)?;
    let md = m_matrix.to_dense();
    let mut s = l.lower().transpose().matmul(&md)?.matmul(l.lower())?;
    s.symmetrize();
    let vals = sym_eigvals(&s)?;
    Ok(*vals.last().unwrap() / vals[0])
}

/// The GenEO estimate `k₀ (1 + k₀ / τ)`.
pub fn geneo_kappa_estimate(k0: usize, tau: f64) -> f64 {
    let k = k0 as f64;
    k * (1.0 + k / tau)
}
