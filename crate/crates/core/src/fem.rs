//! P1 finite elements for `-div(ν ∇u) + a·∇u + c₀ u = f` on the unit square
//! with homogeneous Dirichlet conditions.
//!
//! The bilinear form is split as assembled: the symmetric part
//! `∫ ν ∇u·∇v + (c₀ + ½ div a) u v` and the skew part
//! `½ ∫ (a·∇u v − a·∇v u)`, so `A = M + N` with `N = −Nᵀ` exactly.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{CsrMatrix, LinalgError};
use crate::Real;

pub type ScalarField<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;
pub type VectorField<T> = Arc<dyn Fn(T, T) -> [T; 2] + Send + Sync>;

/// Default penalty factor, relative to the largest diagonal entry of `M`.
pub const PENALTY_FACTOR: f64 = 1e10;
const DIV_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FemError {
    #[error("mesh needs at least 2 divisions per side, got {0}")]
    InvalidMesh(usize),
    #[error("viscosity must be positive, got {value} at ({x}, {y})")]
    NonPositiveViscosity { x: f64, y: f64, value: f64 },
    #[error("c0 + div(a)/2 must be nonnegative, got {value} at ({x}, {y})")]
    NegativeReaction { x: f64, y: f64, value: f64 },
    #[error("{what} has length {found}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// Boundary vertices are removed; only interior vertices carry dofs.
    #[default]
    Elimination,
    /// Every vertex is a dof; boundary rows of `M` get `factor · max diag(M)`
    /// added to the diagonal and a zero right-hand side.
    Penalization { factor: f64 },
}

/// Where a problem's coefficients came from, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdrDescription {
    pub kind: String,
    pub mesh_divisions: usize,
    pub nu: Option<f64>,
    pub c0: Option<f64>,
    pub bc: BoundaryCondition,
}

#[derive(Clone)]
pub struct CdrProblemSpec<T> {
    pub mesh_divisions: usize,
    pub nu: ScalarField<T>,
    pub c0: ScalarField<T>,
    pub a_field: VectorField<T>,
    pub f_rhs: ScalarField<T>,
    pub bc: BoundaryCondition,
    pub kind: String,
    nu_const: Option<T>,
    c0_const: Option<T>,
}

impl<T: Real> fmt::Debug for CdrProblemSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CdrProblemSpec")
            .field("kind", &self.kind)
            .field("mesh_divisions", &self.mesh_divisions)
            .field("nu", &self.nu_const)
            .field("c0", &self.c0_const)
            .field("bc", &self.bc)
            .finish()
    }
}

fn constant<T: Real>(v: T) -> ScalarField<T> {
    Arc::new(move |_, _| v)
}

/// `a(x, y) = 2π (−(y − 0.1), x − 0.5)`: a rotation about `(0.5, 0.1)`.
pub fn rotating_convection<T: Real>(x: T, y: T) -> [T; 2] {
    let two_pi = T::lit(2.0 * PI);
    [-two_pi * (y - T::lit(0.1)), two_pi * (x - T::lit(0.5))]
}

/// `f(x, y) = exp(−10((x − 0.5)² + (y − 0.1)²))`
pub fn gaussian_source<T: Real>(x: T, y: T) -> T {
    let dx = x - T::lit(0.5);
    let dy = y - T::lit(0.1);
    (T::lit(-10.0) * (dx * dx + dy * dy)).exp()
}

/// The reference experiment: rotating convection, Gaussian source and
/// constant `ν`, `c₀`.
pub fn paper_coefficients<T: Real>(mesh_divisions: usize, nu: T, c0: T) -> CdrProblemSpec<T> {
    CdrProblemSpec {
        mesh_divisions,
        nu: constant(nu),
        c0: constant(c0),
        a_field: Arc::new(rotating_convection),
        f_rhs: Arc::new(gaussian_source),
        bc: BoundaryCondition::Elimination,
        kind: "rotating".into(),
        nu_const: Some(nu),
        c0_const: Some(c0),
    }
}

/// `-Δu = 2π² sin(πx) sin(πy)`, whose solution is `sin(πx) sin(πy)`.
pub fn poisson_manufactured<T: Real>(mesh_divisions: usize) -> CdrProblemSpec<T> {
    let pi = T::lit(PI);
    CdrProblemSpec {
        mesh_divisions,
        nu: constant(T::one()),
        c0: constant(T::zero()),
        a_field: Arc::new(|_, _| [T::zero(); 2]),
        f_rhs: Arc::new(move |x, y| T::lit(2.0) * pi * pi * (pi * x).sin() * (pi * y).sin()),
        bc: BoundaryCondition::Elimination,
        kind: "poisson".into(),
        nu_const: Some(T::one()),
        c0_const: Some(T::zero()),
    }
}

pub fn manufactured_solution<T: Real>(x: T, y: T) -> T {
    let pi = T::lit(PI);
    (pi * x).sin() * (pi * y).sin()
}

impl<T: Real> CdrProblemSpec<T> {
    pub fn with_mesh_divisions(mut self, m: usize) -> Self {
        self.mesh_divisions = m;
        self
    }

    pub fn with_bc(mut self, bc: BoundaryCondition) -> Self {
        self.bc = bc;
        self
    }

    pub fn with_constant_coefficients(mut self, nu: T, c0: T) -> Self {
        self.nu = constant(nu);
        self.c0 = constant(c0);
        self.nu_const = Some(nu);
        self.c0_const = Some(c0);
        self
    }

    pub fn with_convection(mut self, a: VectorField<T>) -> Self {
        self.a_field = a;
        self.kind = format!("{}+custom_convection", self.kind);
        self
    }

    pub fn without_convection(mut self) -> Self {
        self.a_field = Arc::new(|_, _| [T::zero(); 2]);
        self.kind = format!("{}+no_convection", self.kind);
        self
    }

    pub fn with_source(mut self, f: ScalarField<T>) -> Self {
        self.f_rhs = f;
        self
    }

    pub fn h(&self) -> T {
        T::one() / T::lit(self.mesh_divisions as f64)
    }

    /// `div a` by central differences with step `1e-6`.
    pub fn div_a(&self, x: T, y: T) -> T {
        let d = T::lit(DIV_STEP);
        let two_d = d + d;
        let ax = (self.a_field)(x + d, y)[0] - (self.a_field)(x - d, y)[0];
        let ay = (self.a_field)(x, y + d)[1] - (self.a_field)(x, y - d)[1];
        ax / two_d + ay / two_d
    }

    /// `c₀ + ½ div a`
    pub fn effective_reaction(&self, x: T, y: T) -> T {
        (self.c0)(x, y) + T::lit(0.5) * self.div_a(x, y)
    }

    pub fn describe(&self) -> CdrDescription {
        CdrDescription {
            kind: self.kind.clone(),
            mesh_divisions: self.mesh_divisions,
            nu: self.nu_const.map(Real::to_f64_lossy),
            c0: self.c0_const.map(Real::to_f64_lossy),
            bc: self.bc,
        }
    }
}

/// Uniform triangulation of `[0, 1]²`. Vertex `(i, j)` sits at `(i h, j h)`
/// with index `j (m + 1) + i`; each square is cut from its bottom-left to its
/// top-right corner into two counter-clockwise triangles.
#[derive(Debug, Clone)]
pub struct StructuredMesh<T> {
    pub m: usize,
    pub vertices: Vec<[T; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
}

pub fn build_mesh<T: Real>(m: usize) -> Result<StructuredMesh<T>, FemError> {
    if m < 2 {
        return Err(FemError::InvalidMesh(m));
    }
    let h = T::one() / T::lit(m as f64);
    let side = m + 1;
    let mut vertices = Vec::with_capacity(side * side);
    let mut boundary = Vec::with_capacity(side * side);
    for j in 0..side {
        for i in 0..side {
            vertices.push([T::lit(i as f64) * h, T::lit(j as f64) * h]);
            boundary.push(i == 0 || j == 0 || i == m || j == m);
        }
    }
    let mut triangles = Vec::with_capacity(2 * m * m);
    for j in 0..m {
        for i in 0..m {
            let v00 = j * side + i;
            let v10 = v00 + 1;
            let v01 = v00 + side;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Ok(StructuredMesh {
        m,
        vertices,
        triangles,
        boundary,
    })
}

impl<T: Real> StructuredMesh<T> {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_index(&self, i: usize, j: usize) -> usize {
        j * (self.m + 1) + i
    }

    /// `(i, j)` lattice position of a vertex.
    pub fn lattice(&self, v: usize) -> (usize, usize) {
        (v % (self.m + 1), v / (self.m + 1))
    }

    /// Signed area; positive for counter-clockwise triangles.
    pub fn signed_area(&self, t: usize) -> T {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        T::lit(0.5) * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }
}

/// Assembled system `(M + N) u = b` over the dofs.
#[derive(Debug, Clone)]
pub struct AssembledCdr<T> {
    pub m_matrix: CsrMatrix<T>,
    pub n_matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    pub dof_count: usize,
    pub mesh: StructuredMesh<T>,
    /// Mesh vertex carried by each dof.
    pub dof_vertices: Vec<usize>,
    pub bc: BoundaryCondition,
}

impl<T: Real> AssembledCdr<T> {
    pub fn a_matrix(&self) -> CsrMatrix<T> {
        self.m_matrix.add(&self.n_matrix).expect("M and N share dimensions")
    }

    /// Lattice coordinates of each dof.
    pub fn dof_lattice(&self) -> Vec<(usize, usize)> {
        self.dof_vertices.iter().map(|&v| self.mesh.lattice(v)).collect()
    }

    /// Extends a dof vector to all mesh vertices, with zeros on eliminated
    /// boundary vertices.
    pub fn to_vertex_values(&self, u: &[T]) -> Result<Vec<T>, FemError> {
        if u.len() != self.dof_count {
            return Err(FemError::LengthMismatch {
                what: "solution",
                expected: self.dof_count,
                found: u.len(),
            });
        }
        let mut out = vec![T::zero(); self.mesh.vertex_count()];
        for (&v, &val) in self.dof_vertices.iter().zip(u) {
            out[v] = val;
        }
        Ok(out)
    }

    /// `‖u_h − u‖_{L²}` with a 7-point degree-5 rule on every triangle.
    pub fn l2_error(&self, u: &[T], exact: impl Fn(T, T) -> T) -> Result<T, FemError> {
        let values = self.to_vertex_values(u)?;
        let mut total = T::zero();
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let area = self.mesh.signed_area(t).abs();
            let p = tri.map(|v| self.mesh.vertices[v]);
            let uh = tri.map(|v| values[v]);
            for &(bary, w) in SEVEN_POINT.iter() {
                let l = bary.map(T::lit);
                let x = l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0];
                let y = l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1];
                let e = l[0] * uh[0] + l[1] * uh[1] + l[2] * uh[2] - exact(x, y);
                total += T::lit(w) * area * e * e;
            }
        }
        Ok(total.sqrt())
    }
}

const A1: f64 = 0.059_715_871_789_770;
const B1: f64 = 0.470_142_064_105_115;
const W1: f64 = 0.132_394_152_788_506;
const A2: f64 = 0.797_426_985_353_087;
const B2: f64 = 0.101_286_507_323_456;
const W2: f64 = 0.125_939_180_544_827;

const SEVEN_POINT: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([A1, B1, B1], W1),
    ([B1, A1, B1], W1),
    ([B1, B1, A1], W1),
    ([A2, B2, B2], W2),
    ([B2, A2, B2], W2),
    ([B2, B2, A2], W2),
];

struct ElementMatrices<T> {
    sym: [[T; 3]; 3],
    skew: [[T; 3]; 3],
    load: [T; 3],
}

/// Mid-edge rule: weights `|T|/3`, basis values `(½, ½, 0)` and permutations.
fn element<T: Real>(spec: &CdrProblemSpec<T>, p: [[T; 2]; 3]) -> Result<ElementMatrices<T>, FemError> {
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let grads = [
        [(p[1][1] - p[2][1]) / area2, (p[2][0] - p[1][0]) / area2],
        [(p[2][1] - p[0][1]) / area2, (p[0][0] - p[2][0]) / area2],
        [(p[0][1] - p[1][1]) / area2, (p[1][0] - p[0][0]) / area2],
    ];
    let half = T::lit(0.5);
    let w = area2.abs() * half / T::lit(3.0);
    let mut sym = [[T::zero(); 3]; 3];
    let mut skew = [[T::zero(); 3]; 3];
    let mut load = [T::zero(); 3];
    let mut a_phi = [[T::zero(); 2]; 3];

    for (e0, e1) in [(0usize, 1usize), (1, 2), (2, 0)] {
        let x = half * (p[e0][0] + p[e1][0]);
        let y = half * (p[e0][1] + p[e1][1]);
        let mut phi = [T::zero(); 3];
        phi[e0] = half;
        phi[e1] = half;
        let nu = (spec.nu)(x, y);
        if !(nu > T::zero()) {
            return Err(FemError::NonPositiveViscosity {
                x: x.to_f64_lossy(),
                y: y.to_f64_lossy(),
                value: nu.to_f64_lossy(),
            });
        }
        let c = spec.effective_reaction(x, y);
        if c < T::zero() || c.is_nan() {
            return Err(FemError::NegativeReaction {
                x: x.to_f64_lossy(),
                y: y.to_f64_lossy(),
                value: c.to_f64_lossy(),
            });
        }
        let a = (spec.a_field)(x, y);
        let f = (spec.f_rhs)(x, y);
        for k in 0..3 {
            for l in 0..3 {
                let stiff = grads[k][0] * grads[l][0] + grads[k][1] * grads[l][1];
                sym[k][l] += w * (nu * stiff + c * phi[k] * phi[l]);
            }
            a_phi[k][0] += w * a[0] * phi[k];
            a_phi[k][1] += w * a[1] * phi[k];
            load[k] += w * f * phi[k];
        }
    }
    // row k tests, column l is the trial function
    for k in 0..3 {
        for l in 0..3 {
            let conv_l_k = grads[l][0] * a_phi[k][0] + grads[l][1] * a_phi[k][1];
            let conv_k_l = grads[k][0] * a_phi[l][0] + grads[k][1] * a_phi[l][1];
            skew[k][l] = half * (conv_l_k - conv_k_l);
        }
    }
    Ok(ElementMatrices { sym, skew, load })
}

/// Assembles `M`, `N` and `b`. Dofs are numbered lexicographically by lattice
/// row then column: interior vertex `(i, j)` gets `(j − 1)(m − 1) + (i − 1)`
/// under elimination, every vertex keeps its mesh index under penalization.
pub fn assemble<T: Real>(spec: &CdrProblemSpec<T>) -> Result<AssembledCdr<T>, FemError> {
    let mesh = build_mesh::<T>(spec.mesh_divisions)?;
    let nv = mesh.vertex_count();
    let eliminate = matches!(spec.bc, BoundaryCondition::Elimination);
    let mut dof_of_vertex = vec![usize::MAX; nv];
    let mut dof_vertices = Vec::new();
    for v in 0..nv {
        if !eliminate || !mesh.boundary[v] {
            dof_of_vertex[v] = dof_vertices.len();
            dof_vertices.push(v);
        }
    }
    let n = dof_vertices.len();

    let mut m_trip = Vec::with_capacity(mesh.triangles.len() * 9);
    let mut n_trip = Vec::with_capacity(mesh.triangles.len() * 6);
    let mut rhs = vec![T::zero(); n];
    for tri in &mesh.triangles {
        let p = tri.map(|v| mesh.vertices[v]);
        let el = element(spec, p)?;
        let dofs = tri.map(|v| dof_of_vertex[v]);
        for k in 0..3 {
            let gk = dofs[k];
            if gk == usize::MAX {
                continue;
            }
            rhs[gk] += el.load[k];
            m_trip.push((gk, gk, el.sym[k][k]));
            for l in (k + 1)..3 {
                let gl = dofs[l];
                if gl == usize::MAX {
                    continue;
                }
                // mirrored entries pushed together keep exact (anti)symmetry
                let s = T::lit(0.5) * (el.sym[k][l] + el.sym[l][k]);
                m_trip.push((gk, gl, s));
                m_trip.push((gl, gk, s));
                let v = el.skew[k][l];
                n_trip.push((gk, gl, v));
                n_trip.push((gl, gk, -v));
            }
        }
    }

    if let BoundaryCondition::Penalization { factor } = spec.bc {
        let mut diag = vec![T::zero(); n];
        for &(i, j, v) in &m_trip {
            if i == j {
                diag[i] += v;
            }
        }
        let max_diag = diag.iter().fold(T::zero(), |acc, d| acc.max(d.abs()));
        let weight = T::lit(factor) * max_diag;
        for (dof, &v) in dof_vertices.iter().enumerate() {
            if mesh.boundary[v] {
                m_trip.push((dof, dof, weight));
                rhs[dof] = T::zero();
            }
        }
    }

    let m_matrix = CsrMatrix::from_triplets(n, n, &m_trip)?;
    let n_matrix = CsrMatrix::from_triplets(n, n, &n_trip)?;
    Ok(AssembledCdr {
        m_matrix,
        n_matrix,
        rhs,
        dof_count: n,
        mesh,
        dof_vertices,
        bc: spec.bc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_counts_and_areas() {
        let mesh = build_mesh::<f64>(2).unwrap();
        assert_eq!(mesh.vertex_count(), 9);
        assert_eq!(mesh.triangles.len(), 8);
        assert_eq!(build_mesh::<f64>(10).unwrap().vertex_count(), 121);
        let mesh = build_mesh::<f64>(3).unwrap();
        for t in 0..mesh.triangles.len() {
            assert!((mesh.signed_area(t) - 1.0 / 18.0).abs() < 1e-15);
        }
        assert!(build_mesh::<f64>(1).is_err());
    }

    #[test]
    fn single_interior_vertex_laplacian() {
        let spec = paper_coefficients::<f64>(2, 1.0, 0.0).without_convection();
        let sys = assemble(&spec).unwrap();
        assert_eq!(sys.dof_count, 1);
        assert!((sys.m_matrix.get(0, 0) - 4.0).abs() < 1e-14);
        assert_eq!(sys.n_matrix.nnz(), 0);
    }

    #[test]
    fn rotating_fields() {
        assert_eq!(gaussian_source(0.5, 0.1), 1.0);
        assert_eq!(rotating_convection(0.5, 0.1), [0.0, 0.0]);
        let a = rotating_convection(1.0, 1.0);
        assert!((a[0] + 2.0 * PI * 0.9).abs() < 1e-14);
        assert!((a[1] - 2.0 * PI * 0.5).abs() < 1e-14);
        assert!(((a[0] * a[0] + a[1] * a[1]).sqrt() - 6.469).abs() < 1e-3);
        let spec = paper_coefficients::<f64>(4, 1.0, 1.0);
        assert_eq!(spec.div_a(0.3, 0.7), 0.0);
    }

    #[test]
    fn exact_symmetry_of_parts() {
        let sys = assemble(&paper_coefficients::<f64>(6, 0.5, 2.0)).unwrap();
        for (i, j, v) in sys.n_matrix.triplets() {
            assert_eq!(sys.n_matrix.get(j, i), -v);
        }
        for (i, j, v) in sys.m_matrix.triplets() {
            assert_eq!(sys.m_matrix.get(j, i), v);
        }
    }

    #[test]
    fn penalization_keeps_all_vertices() {
        let spec = paper_coefficients::<f64>(3, 1.0, 1.0).with_bc(BoundaryCondition::Penalization { factor: PENALTY_FACTOR });
        let sys = assemble(&spec).unwrap();
        assert_eq!(sys.dof_count, 16);
        assert!(sys.m_matrix.get(0, 0) > 1e9);
        assert_eq!(sys.rhs[0], 0.0);
    }

    #[test]
    fn rejects_bad_coefficients() {
        let spec = paper_coefficients::<f64>(3, 0.0, 1.0);
        assert!(matches!(assemble(&spec), Err(FemError::NonPositiveViscosity { .. })));
        let spec = paper_coefficients::<f64>(3, 1.0, -1.0);
        assert!(matches!(assemble(&spec), Err(FemError::NegativeReaction { .. })));
    }
}
