//! Auxiliary-space preconditioning for high-order Lagrange discretizations.
//!
//! The P^k Poisson system is smoothed with Gauss–Seidel and corrected in
//! the P1 space on the same mesh, whose operator is solved by classical
//! algebraic multigrid. Stokes systems reuse the same engine inside block
//! preconditioners. All kernels are generic over [`Real`]; the aliases at
//! the bottom of this file fix the scalar to `f64`.

pub mod amg;
pub mod error;
pub mod fem;
pub mod gamg;
pub mod harness;
pub mod krylov;
pub mod mesh;
pub mod poisson;
pub mod scalar;
pub mod sparse;
pub mod stokes;
pub mod transfer;

pub use error::{Error, Result};
pub use scalar::{Rational, Real};

pub type CsrMatrix64 = sparse::CsrMatrix<f64>;
pub type DenseMatrix64 = sparse::DenseMatrix<f64>;
pub type TransferOperator64 = transfer::TransferOperator<f64>;
pub type AmgHierarchy64 = amg::AmgHierarchy<f64>;
pub type TwoLevelPreconditioner64 = gamg::TwoLevelPreconditioner<f64>;
pub type AugmentedSystem64 = gamg::AugmentedSystem<f64>;
pub type PoissonProblem64 = poisson::PoissonProblem<f64>;
pub type StokesSystem64 = stokes::StokesSystem<f64>;
