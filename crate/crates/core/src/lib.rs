//! Weighted, preconditioned Krylov solvers of the GCR/GMRES family.
//!
//! The crate covers:
//!
//! * [`linalg`]: dense and CSR kernels, Cholesky/LU factorizations and
//!   symmetric (generalized) eigensolvers;
//! * [`weighted`]: SPD weight operators and the inner product they induce;
//! * [`krylov`]: right/left preconditioned weighted GCR, the Hermitian
//!   preconditioned variant with `W = H` and its two storage-lean
//!   rearrangements, truncated/restarted versions, and an Arnoldi GMRES used as
//!   an independent reference;
//! * [`bounds`]: Hermitian/skew splitting and the residual contraction bounds;
//! * [`fem`]: P1 assembly of a 2D convection-diffusion-reaction problem;
//! * [`schwarz`]: one- and two-level additive Schwarz preconditioners;
//! * [`io`]: Matrix Market, vector and experiment report files.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the experiments use.

pub mod bounds;
pub mod fem;
pub mod io;
pub mod krylov;
pub mod linalg;
pub mod scalar;
pub mod schwarz;
pub mod weighted;

pub use scalar::Real;

pub type DenseMatrixF64 = linalg::DenseMatrix<f64>;
pub type CsrMatrixF64 = linalg::CsrMatrix<f64>;
pub type SolveConfigF64 = krylov::SolveConfig<f64>;
pub type SolveResultF64 = krylov::SolveResult<f64>;
pub type BoundReportF64 = bounds::BoundReport<f64>;
pub type CdrProblemSpecF64 = fem::CdrProblemSpec<f64>;
pub type AssembledCdrF64 = fem::AssembledCdr<f64>;
pub type SchwarzPreconditionerF64 = schwarz::SchwarzPreconditioner<f64>;

pub type DenseMatrixF32 = linalg::DenseMatrix<f32>;
pub type CsrMatrixF32 = linalg::CsrMatrix<f32>;
pub type SolveConfigF32 = krylov::SolveConfig<f32>;
pub type SolveResultF32 = krylov::SolveResult<f32>;
