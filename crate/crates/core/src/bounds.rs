//! Hermitian/skew splitting and residual contraction bounds for weighted,
//! preconditioned GCR/GMRES.
//!
//! Everything here is dense and meant for desk-scale problems. The three
//! per-iteration contraction factors of [`BoundReport`] satisfy
//! `bound1 ≤ bound2 ≤ bound3` whenever all three apply:
//!
//! * `bound1 = sqrt(1 − inf |⟨AHy, y⟩_W|² / (‖AHy‖²_W ‖y‖²_W))`
//! * `bound2 = sqrt(1 − inf |⟨M(A⁻¹)y, y⟩|/⟨Hy, y⟩ · inf |⟨M(A)y, y⟩|/⟨H⁻¹y, y⟩)`
//!   for SPD `H = W`
//! * `bound3 = sqrt(1 − κ(H M(A))⁻¹ / (1 + ρ(M(A)⁻¹N(A))²))` when in
//!   addition `M(A)` is positive definite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{build_mesh, CdrProblemSpec};
use crate::linalg::vector::{dot, norm2};
use crate::linalg::{
    cholesky, densify, gen_sym_eig, sym_eig, sym_eigvals, CholeskyFactor, CsrMatrix, DenseMatrix, LinalgError,
    LinearOperator, LuFactor,
};
use crate::weighted::{PreconditionerHandle, WeightOperator};
use crate::Real;

/// Random starts for the `bound1` minimization (plus one eigenvector start).
pub const BOUND1_STARTS: usize = 64;
/// Largest order for which `bound1` is attempted.
pub const BOUND1_DIM_LIMIT: usize = 512;
const BOUND1_SEED: u64 = 0xC0FFEE;
const BOUND1_MAX_ITER: usize = 3000;
const FOV_ANGLES: usize = 256;
const GOLDEN_ITERS: usize = 60;
const SAME_WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("symmetric part is not positive definite")]
    NotPositiveDefinite,
    #[error("{what} must be positive, got {value}")]
    NonPositiveCoefficient { what: &'static str, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn check_dim(expected: usize, found: usize) -> Result<(), BoundsError> {
    if expected == found {
        Ok(())
    } else {
        Err(BoundsError::DimensionMismatch { expected, found })
    }
}

fn spd_factor<T: Real>(m: &DenseMatrix<T>) -> Result<CholeskyFactor<T>, BoundsError> {
    cholesky(m).map_err(|e| match e {
        LinalgError::NotPositiveDefinite { .. } => BoundsError::NotPositiveDefinite,
        other => BoundsError::Linalg(other),
    })
}

/// `A = M(A) + N(A)` with `M = (A + Aᵀ)/2` and `N = (A − Aᵀ)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianSplit<T> {
    pub m_part: DenseMatrix<T>,
    pub n_part: DenseMatrix<T>,
}

impl<T: Real> HermitianSplit<T> {
    pub fn from_dense(a: &DenseMatrix<T>) -> Self {
        Self {
            m_part: a.symmetric_part(),
            n_part: a.skew_part(),
        }
    }

    /// Takes parts assembled separately (as the FEM module does).
    pub fn from_parts(m: &CsrMatrix<T>, n: &CsrMatrix<T>) -> Result<Self, BoundsError> {
        check_dim(m.rows(), n.rows())?;
        Ok(Self {
            m_part: m.to_dense(),
            n_part: n.to_dense(),
        })
    }

    pub fn dim(&self) -> usize {
        self.m_part.rows()
    }

    pub fn reconstruct(&self) -> DenseMatrix<T> {
        self.m_part.add(&self.n_part).expect("parts share dimensions")
    }
}

/// Densifies `a` and splits it.
pub fn split<T: Real>(a: &dyn LinearOperator<T>) -> Result<HermitianSplit<T>, BoundsError> {
    Ok(HermitianSplit::from_dense(&densify(a)?))
}

/// `L⁻¹ B L⁻ᵀ` without symmetrization.
fn congruence_raw<T: Real>(l: &CholeskyFactor<T>, b: &DenseMatrix<T>) -> DenseMatrix<T> {
    let x = l.inverse_lower_times(b);
    l.inverse_lower_times(&x.transpose()).transpose()
}

/// `ρ(M⁻¹N)`: the largest singular value of the skew matrix `L⁻¹ N L⁻ᵀ`,
/// `M = L Lᵀ`.
pub fn spectral_radius_skew<T: Real>(split: &HermitianSplit<T>) -> Result<T, BoundsError> {
    let l = spd_factor(&split.m_part)?;
    let k = congruence_raw(&l, &split.n_part);
    let mut ktk = k.transpose().matmul(&k)?;
    ktk.symmetrize();
    let top = sym_eigvals(&ktk)?.last().copied().unwrap_or(T::zero());
    Ok(top.max(T::zero()).sqrt())
}

/// `C = Lᵀ B L⁻ᵀ` for `W = L Lᵀ`: the matrix of `B` in a W-orthonormal basis.
fn w_representation<T: Real>(b: &DenseMatrix<T>, w: &DenseMatrix<T>, identity: bool) -> Result<DenseMatrix<T>, BoundsError> {
    if identity {
        return Ok(b.clone());
    }
    let l = spd_factor(w).map_err(|_| BoundsError::Linalg(LinalgError::NotPositiveDefinite { pivot: 0 }))?;
    let lt_b = l.lower().transpose().matmul(b)?;
    Ok(l.inverse_lower_times(&lt_b.transpose()).transpose())
}

fn fov_from_representation<T: Real>(c: &DenseMatrix<T>) -> Result<T, BoundsError> {
    let vals = sym_eigvals(&c.symmetric_part())?;
    let lo = vals[0];
    let hi = *vals.last().unwrap();
    Ok(T::zero().max(lo).max(-hi))
}

/// Distance from 0 to the W-field of values of `b`.
///
/// For a real operator the field of values is symmetric about the real axis,
/// so its nearest point to the origin is real and the distance is
/// `max(0, λ_min(M_W(b)), −λ_max(M_W(b)))`.
pub fn fov_distance<T: Real>(b: &dyn LinearOperator<T>, w: &WeightOperator<T>) -> Result<T, BoundsError> {
    check_dim(b.dim(), w.dim())?;
    let bd = densify(b)?;
    let wd = if w.is_identity() { DenseMatrix::identity(w.dim()) } else { densify(w.operator().as_ref())? };
    fov_from_representation(&w_representation(&bd, &wd, w.is_identity())?)
}

/// `λ_min` of the Hermitian part of `e^{iθ} C`, through the `2n × 2n` real
/// embedding `[[cos θ S, −sin θ K], [sin θ K, cos θ S]]`.
fn rotated_min<T: Real>(s: &DenseMatrix<T>, k: &DenseMatrix<T>, theta: T) -> Result<T, BoundsError> {
    let n = s.rows();
    let (sin, cos) = theta.sin_cos();
    let emb = DenseMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        match (bi, bj) {
            (0, 0) | (1, 1) => cos * s[(ii, jj)],
            (0, 1) => -sin * k[(ii, jj)],
            _ => sin * k[(ii, jj)],
        }
    });
    Ok(sym_eigvals(&emb)?[0])
}

/// Same distance as [`fov_distance`] from the support function over complex
/// rotations: `max(0, max_θ λ_min(M(e^{iθ} C)))` on a 256-angle grid with a
/// golden-section refinement around the best angle.
pub fn fov_distance_grid<T: Real>(b: &dyn LinearOperator<T>, w: &WeightOperator<T>) -> Result<T, BoundsError> {
    check_dim(b.dim(), w.dim())?;
    let bd = densify(b)?;
    let wd = if w.is_identity() { DenseMatrix::identity(w.dim()) } else { densify(w.operator().as_ref())? };
    let c = w_representation(&bd, &wd, w.is_identity())?;
    let s = c.symmetric_part();
    let k = c.skew_part();
    let step = T::lit(2.0 * std::f64::consts::PI / FOV_ANGLES as f64);
    let values = (0..FOV_ANGLES)
        .into_par_iter()
        .map(|j| rotated_min(&s, &k, step * T::lit(j as f64)))
        .collect::<Result<Vec<T>, _>>()?;
    let (best_j, mut best) = values
        .iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
    let centre = step * T::lit(best_j as f64);
    let (mut lo, mut hi) = (centre - step, centre + step);
    let ratio = T::lit(0.618_033_988_749_894_8);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = rotated_min(&s, &k, x1)?;
    let mut f2 = rotated_min(&s, &k, x2)?;
    for _ in 0..GOLDEN_ITERS {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = rotated_min(&s, &k, x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = rotated_min(&s, &k, x1)?;
        }
    }
    best = best.max(f1).max(f2);
    Ok(best.max(T::zero()))
}

/// `f(v) = (vᵀ S v)² / (vᵀ G v · vᵀ v)` with `S = sym(C)`, `G = CᵀC`.
struct Quotient<'a, T> {
    s: &'a DenseMatrix<T>,
    g: &'a DenseMatrix<T>,
}

impl<T: Real> Quotient<'_, T> {
    fn eval(&self, v: &[T]) -> (T, Vec<T>, Vec<T>) {
        let sv = self.s.matvec(v).expect("square");
        let gv = self.g.matvec(v).expect("square");
        let a = dot(v, &sv);
        let gq = dot(v, &gv);
        let vv = dot(v, v);
        (a * a / (gq * vv), sv, gv)
    }

    /// Projected gradient descent with Armijo backtracking on the unit sphere.
    fn minimize(&self, mut v: Vec<T>) -> T {
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let (mut f, mut sv, mut gv) = self.eval(&v);
        let mut t = T::one();
        let two = T::lit(2.0);
        for _ in 0..BOUND1_MAX_ITER {
            if f <= T::epsilon() * T::epsilon() {
                return T::zero();
            }
            let a = dot(&v, &sv);
            let gq = dot(&v, &gv);
            // ∇f = f (4 S v / a − 2 G v / g − 2 v) on ‖v‖ = 1
            let mut grad: Vec<T> = (0..v.len())
                .map(|i| f * (two * two * sv[i] / a - two * gv[i] / gq - two * v[i]))
                .collect();
            let radial = dot(&grad, &v);
            grad.iter_mut().zip(&v).for_each(|(g, &vi)| *g -= radial * vi);
            let gnorm2 = dot(&grad, &grad);
            if gnorm2.sqrt() <= T::tol(1e-13) * f.max(T::tol(1e-300)) {
                break;
            }
            t = t * two;
            let mut accepted = false;
            for _ in 0..60 {
                let mut trial: Vec<T> = v.iter().zip(&grad).map(|(&vi, &gi)| vi - t * gi).collect();
                let tn = norm2(&trial);
                trial.iter_mut().for_each(|x| *x /= tn);
                let (ft, svt, gvt) = self.eval(&trial);
                if ft <= f - T::lit(1e-4) * t * gnorm2 {
                    v = trial;
                    f = ft;
                    sv = svt;
                    gv = gvt;
                    accepted = true;
                    break;
                }
                t = t / two;
            }
            if !accepted {
                break;
            }
        }
        f
    }
}

/// Numerical infimum of `|⟨Cv, v⟩|² / (‖Cv‖² ‖v‖²)` over real `v`, and the
/// number of starts used.
fn quotient_infimum<T: Real>(c: &DenseMatrix<T>) -> Result<(T, usize), BoundsError> {
    let n = c.rows();
    let s = c.symmetric_part();
    let mut g = c.transpose().matmul(c)?;
    g.symmetrize();
    let q = Quotient { s: &s, g: &g };
    let eig = sym_eig(&s)?;
    let mut starts = vec![eig.vector(0), eig.vector(n - 1)];
    let mut rng = ChaCha8Rng::seed_from_u64(BOUND1_SEED);
    for _ in 0..BOUND1_STARTS {
        starts.push((0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect());
    }
    let count = starts.len();
    let best = starts
        .into_par_iter()
        .map(|v| q.minimize(v))
        .collect::<Vec<T>>()
        .into_iter()
        .fold(T::infinity(), T::min);
    Ok((best.max(T::zero()).min(T::one()), count))
}

/// Smallest `|λ|` of the pencil `(S, P)` if the spectrum has one sign, else 0:
/// `inf |yᵀ S y| / yᵀ P y`.
fn definite_infimum<T: Real>(s: &DenseMatrix<T>, p: &DenseMatrix<T>) -> Result<T, BoundsError> {
    let vals = gen_sym_eig(s, p)?;
    let lo = vals[0];
    let hi = *vals.last().unwrap();
    Ok(if lo > T::zero() {
        lo
    } else if hi < T::zero() {
        -hi
    } else {
        T::zero()
    })
}

/// Contraction factor `sqrt(1 − (1/κ)/(1 + ρ²))`.
pub fn bound3_from<T: Real>(kappa: T, rho: T) -> T {
    (T::one() - (T::one() / kappa) / (T::one() + rho * rho)).max(T::zero()).sqrt()
}

/// Iterations `i` with `factor^i < tol`: `⌈ln tol / ln factor⌉`, at least 1.
/// `None` when the factor does not contract.
pub fn predicted_iterations<T: Real>(factor: T, tol: T) -> Option<usize> {
    if !(factor < T::one()) || factor.is_nan() {
        return None;
    }
    if factor <= T::zero() {
        return Some(1);
    }
    let n = (tol.ln() / factor.ln()).ceil();
    Some(n.to_f64_lossy().max(1.0) as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport<T> {
    pub dim: usize,
    /// Extreme eigenvalues of `H M(A)`.
    pub lambda_min: Option<T>,
    pub lambda_max: Option<T>,
    pub kappa: Option<T>,
    pub rho: Option<T>,
    pub fov_distance: T,
    /// `‖AH‖_W`
    pub op_norm: T,
    pub bound1: Option<T>,
    pub bound1_starts: usize,
    /// `sqrt(1 − d²/‖AH‖²_W)`, the field of values estimate.
    pub elman: T,
    pub bound2: Option<T>,
    pub bound3: Option<T>,
    pub alpha_analytic: Option<T>,
}

impl<T: Real> BoundReport<T> {
    pub fn with_analytic(mut self, alpha: T) -> Self {
        self.alpha_analytic = Some(alpha);
        self
    }

    pub fn predicted_iterations(&self, tol: T) -> Option<usize> {
        self.bound3.and_then(|b| predicted_iterations(b, tol))
    }
}

fn same_matrix<T: Real>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> bool {
    let scale = a.max_abs().max(b.max_abs());
    a.sub(b).map(|d| d.max_abs() <= T::tol(SAME_WEIGHT_TOL) * scale).unwrap_or(false)
}

/// Every bound that applies to `(A, H, W)`. Quantities whose preconditions
/// fail are left as `None`.
pub fn compute_bound_report<T: Real>(
    a: &dyn LinearOperator<T>,
    h: &PreconditionerHandle<T>,
    w: &WeightOperator<T>,
) -> Result<BoundReport<T>, BoundsError> {
    let n = a.dim();
    check_dim(n, h.dim())?;
    check_dim(n, w.dim())?;
    let ad = densify(a)?;
    let hd = if h.is_identity() { DenseMatrix::identity(n) } else { densify(h.operator().as_ref())? };
    let wd = if w.is_identity() { DenseMatrix::identity(n) } else { densify(w.operator().as_ref())? };

    let ah = ad.matmul(&hd)?;
    let c = w_representation(&ah, &wd, w.is_identity())?;
    let fov = fov_from_representation(&c)?;
    let mut ctc = c.transpose().matmul(&c)?;
    ctc.symmetrize();
    let op_norm = sym_eigvals(&ctc)?.last().copied().unwrap_or(T::zero()).max(T::zero()).sqrt();
    let elman = if op_norm > T::zero() {
        let r = fov / op_norm;
        (T::one() - r * r).max(T::zero()).sqrt()
    } else {
        T::one()
    };
    let (bound1, bound1_starts) = if n <= BOUND1_DIM_LIMIT && n > 0 {
        let (inf, starts) = quotient_infimum(&c)?;
        (Some((T::one() - inf).max(T::zero()).sqrt()), starts)
    } else {
        (None, 0)
    };

    let sp = HermitianSplit::from_dense(&ad);
    let m_factor = cholesky(&sp.m_part).ok();
    let hermitian_h = h.is_hermitian() && same_matrix(&hd, &wd);

    let mut report = BoundReport {
        dim: n,
        lambda_min: None,
        lambda_max: None,
        kappa: None,
        rho: None,
        fov_distance: fov,
        op_norm,
        bound1,
        bound1_starts,
        elman,
        bound2: None,
        bound3: None,
        alpha_analytic: None,
    };
    if m_factor.is_some() {
        report.rho = Some(spectral_radius_skew(&sp)?);
    }
    if !hermitian_h {
        return Ok(report);
    }
    let Ok(h_factor) = cholesky(&hd) else {
        return Ok(report);
    };

    // eigenvalues of H M(A) are those of Lᵀ M(A) L for H = L Lᵀ
    let lt = h_factor.lower().transpose();
    let mut hm = lt.matmul(&sp.m_part)?.matmul(h_factor.lower())?;
    hm.symmetrize();
    let hm_vals = sym_eigvals(&hm)?;
    let lam_min = hm_vals[0];
    let lam_max = *hm_vals.last().unwrap();
    report.lambda_min = Some(lam_min);
    report.lambda_max = Some(lam_max);
    let inf2 = if lam_min > T::zero() {
        lam_min
    } else if lam_max < T::zero() {
        -lam_max
    } else {
        T::zero()
    };

    if let Ok(lu) = LuFactor::new(&ad) {
        let m_inv_a = lu.inverse().symmetric_part();
        let inf1 = definite_infimum(&m_inv_a, &hd)?;
        report.bound2 = Some((T::one() - inf1 * inf2).max(T::zero()).sqrt());
    }
    if m_factor.is_some() && lam_min > T::zero() {
        let kappa = lam_max / lam_min;
        report.kappa = Some(kappa);
        report.bound3 = Some(bound3_from(kappa, report.rho.unwrap_or(T::zero())));
    }
    Ok(report)
}

/// Both sides of `inf ⟨M(A⁻¹)y, y⟩/⟨M(A)⁻¹y, y⟩ = 1/(1 + ρ(M(A)⁻¹N(A))²)`.
pub fn johnson_identity_check<T: Real>(split: &HermitianSplit<T>, a_inv: &DenseMatrix<T>) -> Result<(T, T), BoundsError> {
    check_dim(split.dim(), a_inv.rows())?;
    let m_inv = spd_factor(&split.m_part)?.inverse();
    let lhs = gen_sym_eig(&a_inv.symmetric_part(), &m_inv)?[0];
    let rho = spectral_radius_skew(split)?;
    Ok((lhs, T::one() / (T::one() + rho * rho)))
}

/// `½ ‖a‖_∞ / sqrt(inf ν · inf(c₀ + ½ div a))`, the infima and maximum taken
/// over the vertices of the spec's mesh.
pub fn analytic_rho_bound<T: Real>(spec: &CdrProblemSpec<T>) -> Result<T, BoundsError> {
    let mesh = build_mesh::<T>(spec.mesh_divisions.max(2)).map_err(|_| BoundsError::NonPositiveCoefficient {
        what: "mesh divisions",
        value: spec.mesh_divisions as f64,
    })?;
    let mut a_max = T::zero();
    let mut nu_min = T::infinity();
    let mut c_min = T::infinity();
    for &[x, y] in &mesh.vertices {
        let a = (spec.a_field)(x, y);
        a_max = a_max.max((a[0] * a[0] + a[1] * a[1]).sqrt());
        nu_min = nu_min.min((spec.nu)(x, y));
        c_min = c_min.min(spec.effective_reaction(x, y));
    }
    if a_max == T::zero() {
        return Ok(T::zero());
    }
    if !(nu_min > T::zero()) {
        return Err(BoundsError::NonPositiveCoefficient {
            what: "viscosity",
            value: nu_min.to_f64_lossy(),
        });
    }
    if !(c_min > T::zero()) {
        return Err(BoundsError::NonPositiveCoefficient {
            what: "c0 + div(a)/2",
            value: c_min.to_f64_lossy(),
        });
    }
    Ok(T::lit(0.5) * a_max / (nu_min * c_min).sqrt())
}
