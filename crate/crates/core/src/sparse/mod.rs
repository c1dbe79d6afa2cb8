//! Sparse CSR and small dense kernels.
//!
//! Every reduction runs in ascending index order with no internal
//! threading, so repeated runs are bit-identical on one machine.

mod csr;
mod dense;
pub mod matrix_market;

pub use csr::{symmetry_tolerance, CsrMatrix};
pub use dense::{Cholesky, DenseMatrix, Lu};
pub use matrix_market::{parse_matrix_market, read_matrix_market, write_matrix_market, MmSymmetry};
