//! Prolongation from the P1 auxiliary space into P^k and the Galerkin coarse operator.

use crate::error::{check_dim, Error, Result};
use crate::fem::{FeSpace, LatticeNode};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

/// `I_P` (fine × coarse) with entries `ψ_j(x_i)` and its transpose `I_R`.
#[derive(Debug, Clone)]
pub struct TransferOperator<T> {
    prolongation: CsrMatrix<T>,
    restriction: CsrMatrix<T>,
}

impl<T: Real> TransferOperator<T> {
    /// Wraps an explicit prolongation matrix; the restriction is its transpose.
    pub fn from_prolongation(prolongation: CsrMatrix<T>) -> Self {
        let restriction = prolongation.transpose();
        Self {
            prolongation,
            restriction,
        }
    }

    pub fn prolongation(&self) -> &CsrMatrix<T> {
        &self.prolongation
    }

    pub fn restriction(&self) -> &CsrMatrix<T> {
        &self.restriction
    }

    pub fn n_fine(&self) -> usize {
        self.prolongation.nrows()
    }

    pub fn n_coarse(&self) -> usize {
        self.prolongation.ncols()
    }

    pub fn prolong(&self, coarse: &[T]) -> Result<Vec<T>> {
        self.prolongation.spmv(coarse)
    }

    pub fn restrict(&self, fine: &[T]) -> Result<Vec<T>> {
        self.restriction.spmv(fine)
    }

    /// Restricts to eliminated index sets: keeps `fine_rows` and the coarse
    /// columns mapped by `coarse_map`.
    pub fn restricted(&self, fine_rows: &[usize], coarse_map: &[Option<usize>], n_coarse: usize) -> Result<Self> {
        Ok(Self::from_prolongation(self.prolongation.submatrix(fine_rows, coarse_map, n_coarse)?))
    }
}

/// Builds `I_P` between a P^k space and the P1 space on the same mesh.
/// Each fine node's row holds its barycentric weights, read off the node's
/// lattice key, so every containing tet gives the same row.
pub fn build_prolongation<T: Real>(fine: &FeSpace, coarse: &FeSpace) -> Result<TransferOperator<T>> {
    if coarse.order() != 1 {
        return Err(Error::InvalidArgument(format!("coarse space must be P1, got P{}", coarse.order())));
    }
    if fine.order() < 2 {
        return Err(Error::InvalidArgument("fine space must have order >= 2".into()));
    }
    if !std::sync::Arc::ptr_eq(fine.mesh(), coarse.mesh()) && fine.mesh() != coarse.mesh() {
        return Err(Error::InvalidArgument("fine and coarse spaces live on different meshes".into()));
    }
    let k = T::from_usize_lossy(fine.order() as usize);
    let vertex_dof: Vec<usize> = (0..fine.mesh().n_vertices())
        .map(|v| coarse.find(&LatticeNode(vec![(v, 1)])).unwrap_or(usize::MAX))
        .collect();
    let mut triplets = Vec::new();
    for i in 0..fine.n_dofs() {
        for &(v, c) in &fine.node(i).0 {
            let j = vertex_dof[v];
            if j == usize::MAX {
                return Err(Error::InvalidArgument(format!("vertex {v} missing from coarse space")));
            }
            triplets.push((i, j, T::from_usize_lossy(c as usize) / k));
        }
    }
    let p = CsrMatrix::from_triplets(fine.n_dofs(), coarse.n_dofs(), &triplets)?;
    if cfg!(debug_assertions) {
        // geometric cross-check: each tet's local lattice point has the same weights
        let kk = fine.order() as usize;
        for t in 0..fine.mesh().n_tets() {
            let tet = fine.mesh().tets()[t];
            for (alpha, &dof) in fine.local_nodes().iter().zip(fine.element_dofs(t)) {
                for a in 0..4 {
                    let w = T::from_usize_lossy(alpha[a] as usize) / T::from_usize_lossy(kk);
                    debug_assert!(p.get(dof, vertex_dof[tet[a]]) == w, "prolongation disagrees across tets");
                }
            }
        }
    }
    Ok(TransferOperator::from_prolongation(p))
}

/// `A_H = I_R A_h I_P`.
pub fn galerkin_coarse<T: Real>(a_h: &CsrMatrix<T>, transfer: &TransferOperator<T>) -> Result<CsrMatrix<T>> {
    check_dim("galerkin_coarse", transfer.n_fine(), a_h.nrows())?;
    CsrMatrix::triple_product(transfer.restriction(), a_h, transfer.prolongation())
}
