//! Continuous P^k Lagrange spaces and their exact assembly.

mod assembly;
pub mod poly;
pub mod quadrature;
mod space;

pub use assembly::{
    assemble_load, assemble_operator, barycentric_gradients, boundary_lift, element_matrix, eliminate_dirichlet,
    l2_error, AssembledSystem, Form, ReferenceElement,
};
pub(crate) use assembly::checked_geometry;
pub use poly::integrate_barycentric_monomial;
pub use space::{build_space, FeSpace, LatticeNode};
