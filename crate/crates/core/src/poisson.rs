//! Dirichlet Poisson problems on tetrahedral meshes together with the P1
//! auxiliary space used by the two-level method.

use std::sync::Arc;

use crate::error::Result;
use crate::fem::{assemble_load, assemble_operator, boundary_lift, build_space, eliminate_dirichlet, AssembledSystem, FeSpace, Form};
use crate::mesh::{build_cube_mesh, TetMesh};
use crate::scalar::Real;
use crate::transfer::{build_prolongation, TransferOperator};

#[derive(Debug, Clone)]
pub struct PoissonProblem<T> {
    pub fine: FeSpace,
    /// P1 space on the same mesh (present for k ≥ 2).
    pub coarse: Option<FeSpace>,
    pub system: AssembledSystem<T>,
    /// Interior-to-interior prolongation from `coarse` (present for k ≥ 2).
    pub transfer: Option<TransferOperator<T>>,
    pub lift: Vec<T>,
}

impl<T: Real> PoissonProblem<T> {
    /// `−Δu = f` with `u = g` on the boundary.
    pub fn new(mesh: Arc<TetMesh>, k: u8, f: impl Fn([T; 3]) -> T, g: impl Fn([T; 3]) -> T) -> Result<Self> {
        let fine = build_space(&mesh, k)?;
        let a = assemble_operator::<T>(&fine, Form::Stiffness)?;
        let load = assemble_load(&fine, f)?;
        let lift = boundary_lift(&fine, g);
        let system = eliminate_dirichlet(&a, &load, &fine, &lift)?;
        let (coarse, transfer) = if k >= 2 {
            let coarse = build_space(&mesh, 1)?;
            let t = eliminated_transfer(&fine, &coarse)?;
            (Some(coarse), Some(t))
        } else {
            (None, None)
        };
        Ok(PoissonProblem { fine, coarse, system, transfer, lift })
    }

    /// Homogeneous problem (zero load, zero boundary data) on the unit cube mesh.
    pub fn homogeneous_cube(n: usize, k: u8) -> Result<Self> {
        Self::new(Arc::new(build_cube_mesh(n)?), k, |_| T::zero(), |_| T::zero())
    }

    pub fn n_interior(&self) -> usize {
        self.system.n_interior()
    }

    /// Interior solution expanded with the boundary values.
    pub fn full_solution(&self, interior: &[T]) -> Result<Vec<T>> {
        self.system.expand(interior, &self.lift)
    }
}

/// Prolongation between the interior DOFs of a P^k space and those of the P1 space.
pub fn eliminated_transfer<T: Real>(fine: &FeSpace, coarse: &FeSpace) -> Result<TransferOperator<T>> {
    let full = build_prolongation::<T>(fine, coarse)?;
    let (fine_int, _) = fine.interior_maps();
    let (coarse_int, coarse_map) = coarse.interior_maps();
    full.restricted(&fine_int, &coarse_map, coarse_int.len())
}
