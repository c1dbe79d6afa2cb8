//! Exact stiffness/mass assembly by barycentric monomial expansion, load
//! vectors by quadrature, and Dirichlet elimination.

use crate::error::{check_dim, Error, Result};
use crate::fem::poly::{eval_lagrange, lagrange_basis, lattice_nodes, BaryPoly, Exponents};
use crate::fem::quadrature::TetQuadrature;
use crate::fem::FeSpace;
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    Stiffness,
    Mass,
}

/// Reference integrals of one Lagrange element, divided by the element volume.
#[derive(Debug, Clone)]
pub struct ReferenceElement<T> {
    pub order: u8,
    pub nodes: Vec<Exponents>,
    /// `mass[i][j] = ∫ φ_i φ_j / |T|`
    pub mass: Vec<Vec<T>>,
    /// `grad[a][b][i][j] = ∫ ∂_a φ_i ∂_b φ_j / |T|` (derivatives in barycentric variables)
    pub grad: Vec<Vec<Vec<Vec<T>>>>,
}

impl<T: Real> ReferenceElement<T> {
    pub fn new(order: u8) -> Self {
        let nodes = lattice_nodes(order);
        let basis: Vec<BaryPoly> = nodes.iter().map(|a| lagrange_basis(order, *a)).collect();
        let n = basis.len();
        let mass = (0..n)
            .map(|i| (0..n).map(|j| T::from_rational(&basis[i].mul(&basis[j]).mean())).collect())
            .collect();
        let derivs: Vec<Vec<BaryPoly>> = (0..4).map(|a| basis.iter().map(|p| p.derivative(a)).collect()).collect();
        let grad = (0..4)
            .map(|a| {
                (0..4)
                    .map(|b| {
                        (0..n)
                            .map(|i| (0..n).map(|j| T::from_rational(&derivs[a][i].mul(&derivs[b][j]).mean())).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { order, nodes, mass, grad }
    }

    pub fn n_local(&self) -> usize {
        self.nodes.len()
    }
}

/// Volume and the gradients of the four barycentric coordinates of a tet.
pub fn barycentric_gradients<T: Real>(x: &[[f64; 3]; 4]) -> (T, [[T; 3]; 4]) {
    let p: [[T; 3]; 4] = x.map(|v| v.map(T::lit));
    let col = |a: usize| [p[a][0] - p[0][0], p[a][1] - p[0][1], p[a][2] - p[0][2]];
    let (c1, c2, c3) = (col(1), col(2), col(3));
    // Jacobian J has columns c1, c2, c3; rows of J^{-1} are ∇λ1..∇λ3
    let cross = |u: [T; 3], v: [T; 3]| [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    let det = c1[0] * (c2[1] * c3[2] - c2[2] * c3[1]) - c1[1] * (c2[0] * c3[2] - c2[2] * c3[0])
        + c1[2] * (c2[0] * c3[1] - c2[1] * c3[0]);
    let g1 = cross(c2, c3).map(|v| v / det);
    let g2 = cross(c3, c1).map(|v| v / det);
    let g3 = cross(c1, c2).map(|v| v / det);
    let g0 = [-(g1[0] + g2[0] + g3[0]), -(g1[1] + g2[1] + g3[1]), -(g1[2] + g2[2] + g3[2])];
    (det / T::lit(6.0), [g0, g1, g2, g3])
}

pub(crate) fn checked_geometry<T: Real>(space: &FeSpace, t: usize) -> Result<(T, [[T; 3]; 4])> {
    let (vol, g) = barycentric_gradients::<T>(&space.mesh().tet_coords(t));
    if !(vol > T::zero()) {
        return Err(Error::DegenerateElement { tet: t, volume: vol.as_f64() });
    }
    Ok((vol, g))
}

/// Local element matrix for tet `t`.
pub fn element_matrix<T: Real>(reference: &ReferenceElement<T>, vol: T, grads: &[[T; 3]; 4], form: Form) -> Vec<Vec<T>> {
    let n = reference.n_local();
    match form {
        Form::Mass => (0..n).map(|i| (0..n).map(|j| reference.mass[i][j] * vol).collect()).collect(),
        Form::Stiffness => {
            let mut g = [[T::zero(); 4]; 4];
            for a in 0..4 {
                for b in 0..4 {
                    g[a][b] = (0..3).map(|d| grads[a][d] * grads[b][d]).sum::<T>() * vol;
                }
            }
            let mut out = vec![vec![T::zero(); n]; n];
            for a in 0..4 {
                for b in 0..4 {
                    let w = &reference.grad[a][b];
                    for i in 0..n {
                        for j in 0..n {
                            out[i][j] += g[a][b] * w[i][j];
                        }
                    }
                }
            }
            out
        }
    }
}

/// Assembles the stiffness `∫ ∇φ_j·∇φ_i` or mass `∫ φ_j φ_i` matrix over the full DOF set.
pub fn assemble_operator<T: Real>(space: &FeSpace, form: Form) -> Result<CsrMatrix<T>> {
    let reference = ReferenceElement::<T>::new(space.order());
    let n = reference.n_local();
    let mut triplets = Vec::with_capacity(space.mesh().n_tets() * n * n);
    for t in 0..space.mesh().n_tets() {
        let (vol, grads) = checked_geometry::<T>(space, t)?;
        let local = element_matrix(&reference, vol, &grads, form);
        let dofs = space.element_dofs(t);
        for i in 0..n {
            for j in 0..n {
                triplets.push((dofs[i], dofs[j], local[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(space.n_dofs(), space.n_dofs(), &triplets)
}

/// Physical point of a barycentric coordinate on tet `t`.
pub(crate) fn map_point<T: Real>(x: &[[f64; 3]; 4], lam: &[T; 4]) -> [T; 3] {
    let mut p = [T::zero(); 3];
    for a in 0..4 {
        for d in 0..3 {
            p[d] += lam[a] * T::lit(x[a][d]);
        }
    }
    p
}

/// Load vector `f_i = ∫ f φ_i` with a rule exact for degree `2k + 1`.
pub fn assemble_load<T: Real>(space: &FeSpace, f: impl Fn([T; 3]) -> T) -> Result<Vec<T>> {
    let k = space.order();
    let quad = TetQuadrature::<T>::exact_for_degree(2 * k as usize + 1);
    let nodes = space.local_nodes();
    let phi: Vec<Vec<T>> = quad.points.iter().map(|l| nodes.iter().map(|a| eval_lagrange(k, a, l)).collect()).collect();
    let mut rhs = vec![T::zero(); space.n_dofs()];
    for t in 0..space.mesh().n_tets() {
        let (vol, _) = checked_geometry::<T>(space, t)?;
        let x = space.mesh().tet_coords(t);
        let dofs = space.element_dofs(t);
        for (q, lam) in quad.points.iter().enumerate() {
            let fw = f(map_point(&x, lam)) * quad.weights[q] * vol;
            for (i, &d) in dofs.iter().enumerate() {
                rhs[d] += fw * phi[q][i];
            }
        }
    }
    Ok(rhs)
}

/// `‖u_h − u‖_{L²}` for a full coefficient vector `coeffs`.
pub fn l2_error<T: Real>(space: &FeSpace, coeffs: &[T], exact: impl Fn([T; 3]) -> T) -> Result<T> {
    check_dim("l2_error coefficients", space.n_dofs(), coeffs.len())?;
    let k = space.order();
    let quad = TetQuadrature::<T>::exact_for_degree(2 * k as usize + 4);
    let nodes = space.local_nodes();
    let phi: Vec<Vec<T>> = quad.points.iter().map(|l| nodes.iter().map(|a| eval_lagrange(k, a, l)).collect()).collect();
    let mut err = T::zero();
    for t in 0..space.mesh().n_tets() {
        let (vol, _) = checked_geometry::<T>(space, t)?;
        let x = space.mesh().tet_coords(t);
        let dofs = space.element_dofs(t);
        for (q, lam) in quad.points.iter().enumerate() {
            let uh: T = dofs.iter().enumerate().map(|(i, &d)| coeffs[d] * phi[q][i]).sum();
            let e = uh - exact(map_point(&x, lam));
            err += e * e * quad.weights[q] * vol;
        }
    }
    Ok(err.sqrt())
}

/// Interior system after eliminating Dirichlet DOFs.
#[derive(Debug, Clone)]
pub struct AssembledSystem<T> {
    pub a: CsrMatrix<T>,
    pub rhs: Vec<T>,
    pub interior_to_full: Vec<usize>,
    pub full_to_interior: Vec<Option<usize>>,
}

impl<T: Real> AssembledSystem<T> {
    pub fn n_interior(&self) -> usize {
        self.interior_to_full.len()
    }

    /// Interior solution plus boundary values back onto the full DOF set.
    pub fn expand(&self, interior: &[T], lift: &[T]) -> Result<Vec<T>> {
        check_dim("expand interior", self.n_interior(), interior.len())?;
        check_dim("expand lift", self.full_to_interior.len(), lift.len())?;
        Ok(self
            .full_to_interior
            .iter()
            .enumerate()
            .map(|(i, m)| match m {
                Some(j) => interior[*j],
                None => lift[i],
            })
            .collect())
    }
}

/// Boundary lift vector: `g` evaluated at boundary DOFs, zero elsewhere.
pub fn boundary_lift<T: Real>(space: &FeSpace, g: impl Fn([T; 3]) -> T) -> Vec<T> {
    space
        .dof_coords()
        .iter()
        .zip(space.is_boundary())
        .map(|(p, &b)| if b { g(p.map(T::lit)) } else { T::zero() })
        .collect()
}

/// Restricts `A u = rhs` to interior DOFs with `rhs_int = (rhs − A ĝ)|_int`.
/// Only the boundary entries of `lift` are used.
pub fn eliminate_dirichlet<T: Real>(a: &CsrMatrix<T>, rhs: &[T], space: &FeSpace, lift: &[T]) -> Result<AssembledSystem<T>> {
    let n = space.n_dofs();
    check_dim("eliminate_dirichlet matrix rows", n, a.nrows())?;
    check_dim("eliminate_dirichlet matrix cols", n, a.ncols())?;
    check_dim("eliminate_dirichlet rhs", n, rhs.len())?;
    check_dim("eliminate_dirichlet lift", n, lift.len())?;
    let (interior, full_to_int) = space.interior_maps();
    let ghat: Vec<T> = lift
        .iter()
        .zip(space.is_boundary())
        .map(|(v, &b)| if b { *v } else { T::zero() })
        .collect();
    let ag = a.spmv(&ghat)?;
    let a_int = a.submatrix(&interior, &full_to_int, interior.len())?;
    let rhs_int = interior.iter().map(|&i| rhs[i] - ag[i]).collect();
    Ok(AssembledSystem {
        a: a_int,
        rhs: rhs_int,
        interior_to_full: interior,
        full_to_interior: full_to_int,
    })
}
