//! Taylor–Hood P^k/P^{k−1} discretization of the Stokes lid-driven cavity and
//! block preconditioners built from the Poisson engines.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::amg::{build_hierarchy, AmgConfig, AmgHierarchy};
use crate::error::{check_dim, Error, Result};
use crate::fem::poly::{lagrange_basis, lattice_nodes};
use crate::fem::{assemble_operator, build_space, checked_geometry, FeSpace, Form};
use crate::gamg::{Engine, TwoLevelConfig, TwoLevelPreconditioner};
use crate::krylov::{fgmres, minres, pcg, JacobiPreconditioner, Method, Preconditioner, SolveReport, SolverConfig};
use crate::mesh::TetMesh;
use crate::poisson::eliminated_transfer;
use crate::scalar::Real;
use crate::sparse::{CsrMatrix, DenseMatrix};

const FACE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct StokesSystem<T> {
    pub velocity_space: FeSpace,
    pub pressure_space: FeSpace,
    /// Scalar Laplacian on interior velocity DOFs.
    pub a_scalar: CsrMatrix<T>,
    /// Block-diagonal vector Laplacian, component-major.
    pub a: CsrMatrix<T>,
    /// Discrete `−div`, pressure rows by velocity columns.
    pub b: CsrMatrix<T>,
    pub bt: CsrMatrix<T>,
    pub m_p: CsrMatrix<T>,
    /// `[[A, Bᵀ], [B, 0]]`.
    pub operator: CsrMatrix<T>,
    pub rhs: Vec<T>,
    /// Boundary values of each velocity component on the full DOF set.
    pub lift: [Vec<T>; 3],
    pub interior_to_full: Vec<usize>,
    pub full_to_interior: Vec<Option<usize>>,
}

/// Unit lid velocity `(1, 0, 0)`.
pub fn unit_lid<T: Real>(_: [T; 3]) -> [T; 3] {
    [T::one(), T::zero(), T::zero()]
}

/// `ψ_q ∂φ_i/∂λ_a` means on the reference element, indexed `[q][i][a]`.
fn mixed_reference<T: Real>(k: u8) -> Vec<Vec<[T; 4]>> {
    let vel: Vec<_> = lattice_nodes(k).into_iter().map(|a| lagrange_basis(k, a)).collect();
    let dvel: Vec<Vec<_>> = vel.iter().map(|p| (0..4).map(|a| p.derivative(a)).collect()).collect();
    lattice_nodes(k - 1)
        .into_iter()
        .map(|q| {
            let psi = lagrange_basis(k - 1, q);
            dvel.iter().map(|d| std::array::from_fn(|a| T::from_rational(&psi.mul(&d[a]).mean()))).collect()
        })
        .collect()
}

/// `B_full[d]`: the `−∫ q ∂_d v` matrices over full pressure and velocity DOF sets.
fn assemble_divergence<T: Real>(vel: &FeSpace, pre: &FeSpace) -> Result<[CsrMatrix<T>; 3]> {
    let w = mixed_reference::<T>(vel.order());
    let mut trip: [Vec<(usize, usize, T)>; 3] = Default::default();
    for t in 0..vel.mesh().n_tets() {
        let (vol, g) = checked_geometry::<T>(vel, t)?;
        let vd = vel.element_dofs(t);
        let pd = pre.element_dofs(t);
        for (q, &pq) in pd.iter().enumerate() {
            for (i, &vi) in vd.iter().enumerate() {
                for (d, tr) in trip.iter_mut().enumerate() {
                    let mut s = T::zero();
                    for a in 0..4 {
                        s += w[q][i][a] * g[a][d];
                    }
                    tr.push((pq, vi, -vol * s));
                }
            }
        }
    }
    let (np, nv) = (pre.n_dofs(), vel.n_dofs());
    let [t0, t1, t2] = trip;
    Ok([CsrMatrix::from_triplets(np, nv, &t0)?, CsrMatrix::from_triplets(np, nv, &t1)?, CsrMatrix::from_triplets(np, nv, &t2)?])
}

/// Assembles the cavity on `mesh` (assumed to fill the unit cube). The lid is
/// the face `z = 1`; lid nodes on its rim take the wall value 0.
pub fn assemble_stokes<T: Real>(mesh: Arc<TetMesh>, k: u8, lid: impl Fn([T; 3]) -> [T; 3]) -> Result<StokesSystem<T>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("velocity order {k} is not stable; need k >= 2")));
    }
    let velocity_space = build_space(&mesh, k)?;
    let pressure_space = build_space(&mesh, k - 1)?;
    let a_full = assemble_operator::<T>(&velocity_space, Form::Stiffness)?;
    let m_p = assemble_operator::<T>(&pressure_space, Form::Mass)?;
    let b_full = assemble_divergence::<T>(&velocity_space, &pressure_space)?;

    let nv = velocity_space.n_dofs();
    let mut lift: [Vec<T>; 3] = std::array::from_fn(|_| vec![T::zero(); nv]);
    for (i, (p, &bnd)) in velocity_space.dof_coords().iter().zip(velocity_space.is_boundary()).enumerate() {
        let on_lid = bnd && p[2] >= 1.0 - FACE_TOL;
        let on_rim = p[0] <= FACE_TOL || p[0] >= 1.0 - FACE_TOL || p[1] <= FACE_TOL || p[1] >= 1.0 - FACE_TOL;
        if on_lid && !on_rim {
            let u = lid(p.map(T::lit));
            for d in 0..3 {
                lift[d][i] = u[d];
            }
        }
    }

    let (interior, full_to_int) = velocity_space.interior_maps();
    let ni = interior.len();
    let a_scalar = a_full.submatrix(&interior, &full_to_int, ni)?;
    let all_p: Vec<usize> = (0..pressure_space.n_dofs()).collect();
    let b_int: Vec<CsrMatrix<T>> = b_full.iter().map(|bd| bd.submatrix(&all_p, &full_to_int, ni)).collect::<Result<_>>()?;
    let a = CsrMatrix::block(&[
        vec![Some(&a_scalar), None, None],
        vec![None, Some(&a_scalar), None],
        vec![None, None, Some(&a_scalar)],
    ])?;
    let b = CsrMatrix::block(&[vec![Some(&b_int[0]), Some(&b_int[1]), Some(&b_int[2])]])?;
    let bt = b.transpose();
    let operator = CsrMatrix::block(&[vec![Some(&a), Some(&bt)], vec![Some(&b), None]])?;

    let mut rhs = Vec::with_capacity(3 * ni + pressure_space.n_dofs());
    for g in &lift {
        let ag = a_full.spmv(g)?;
        rhs.extend(interior.iter().map(|&i| -ag[i]));
    }
    let mut rp = vec![T::zero(); pressure_space.n_dofs()];
    for (bd, g) in b_full.iter().zip(&lift) {
        for (r, v) in rp.iter_mut().zip(bd.spmv(g)?) {
            *r -= v;
        }
    }
    rhs.extend(rp);
    Ok(StokesSystem {
        velocity_space,
        pressure_space,
        a_scalar,
        a,
        b,
        bt,
        m_p,
        operator,
        rhs,
        lift,
        interior_to_full: interior,
        full_to_interior: full_to_int,
    })
}

impl<T: Real> StokesSystem<T> {
    pub fn n_velocity(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_pressure(&self) -> usize {
        self.m_p.nrows()
    }

    pub fn dim(&self) -> usize {
        self.n_velocity() + self.n_pressure()
    }

    /// Velocity components on the full DOF set, boundary values included.
    pub fn velocity_fields(&self, x: &[T]) -> Result<[Vec<T>; 3]> {
        check_dim("stokes solution", self.dim(), x.len())?;
        let ni = self.interior_to_full.len();
        Ok(std::array::from_fn(|d| {
            let mut u = self.lift[d].clone();
            for (j, &i) in self.interior_to_full.iter().enumerate() {
                u[i] = x[d * ni + j];
            }
            u
        }))
    }

    pub fn pressure<'a>(&self, x: &'a [T]) -> &'a [T] {
        &x[self.n_velocity()..]
    }

    /// Solves with one pressure DOF pinned using dense LU, then removes the pressure mean.
    pub fn dense_pinned_solve(&self) -> Result<Vec<T>> {
        let n = self.dim();
        let pin = self.n_velocity();
        let f = self.operator.to_dense();
        let keep: Vec<usize> = (0..n).filter(|&i| i != pin).collect();
        let mut m = DenseMatrix::zeros(n - 1, n - 1);
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                m[(a, b)] = f[(i, j)];
            }
        }
        let rhs: Vec<T> = keep.iter().map(|&i| self.rhs[i]).collect();
        let y = m.lu()?.solve(&rhs)?;
        let mut x = vec![T::zero(); n];
        for (a, &i) in keep.iter().enumerate() {
            x[i] = y[a];
        }
        let p = project_pressure_mean(&x[pin..], &self.m_p)?;
        x[pin..].copy_from_slice(&p);
        Ok(x)
    }

    /// Dense `B A⁻¹ Bᵀ`.
    pub fn schur_dense(&self) -> Result<DenseMatrix<T>> {
        let chol = self.a.to_dense().cholesky()?;
        let bt = self.bt.to_dense();
        let np = self.n_pressure();
        let cols = DenseMatrix::from_columns_of(np, self.n_velocity(), |e| chol.solve(&bt.matvec(e)?))?;
        let mut s = self.b.to_dense().matmul(&cols)?;
        s.symmetrize();
        Ok(s)
    }
}

/// `p − (1ᵀM p / 1ᵀM 1)·1`.
pub fn project_pressure_mean<T: Real>(p: &[T], m_p: &CsrMatrix<T>) -> Result<Vec<T>> {
    check_dim("pressure projection", m_p.nrows(), p.len())?;
    let ones = vec![T::one(); p.len()];
    let m1 = m_p.spmv(&ones)?;
    let den: T = m1.iter().copied().sum();
    if den == T::zero() {
        return Ok(p.to_vec());
    }
    let num: T = m1.iter().zip(p).map(|(a, b)| *a * *b).sum();
    let c = num / den;
    Ok(p.iter().map(|v| *v - c).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    /// Block upper triangular, used with FGMRES.
    Qt,
    /// Block diagonal, used with MINRES.
    Qd,
}

impl std::str::FromStr for BlockKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qt" => Ok(BlockKind::Qt),
            "qd" => Ok(BlockKind::Qd),
            _ => Err(Error::InvalidArgument(format!("unknown block preconditioner '{s}'"))),
        }
    }
}

/// Approximate inverse of the scalar velocity Laplacian.
#[derive(Debug, Clone)]
pub enum VelocitySolver<T> {
    Amg(AmgHierarchy<T>),
    Gamg(TwoLevelPreconditioner<T>),
}

impl<T: Real> VelocitySolver<T> {
    pub fn build(sys: &StokesSystem<T>, engine: Engine, theta: f64) -> Result<Self> {
        Ok(match engine {
            Engine::Amg => VelocitySolver::Amg(build_hierarchy(&sys.a_scalar, &AmgConfig::with_theta(theta))?),
            Engine::Gamg => {
                let p1 = build_space(sys.velocity_space.mesh(), 1)?;
                let t = eliminated_transfer(&sys.velocity_space, &p1)?;
                VelocitySolver::Gamg(TwoLevelPreconditioner::new(sys.a_scalar.clone(), t, TwoLevelConfig::with_theta(theta))?)
            }
        })
    }

    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()> {
        match self {
            VelocitySolver::Amg(h) => h.apply(r, z),
            VelocitySolver::Gamg(g) => g.apply(r, z),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockPreconditioner<T> {
    pub kind: BlockKind,
    velocity: VelocitySolver<T>,
    m_p: CsrMatrix<T>,
    jacobi: JacobiPreconditioner<T>,
    bt: CsrMatrix<T>,
    inner: SolverConfig,
    n_component: usize,
}

impl<T: Real> BlockPreconditioner<T> {
    /// Inner pressure-mass CG: loose for `Qt` (inside FGMRES), tight for `Qd`
    /// so that MINRES sees an essentially fixed operator.
    pub fn new(sys: &StokesSystem<T>, kind: BlockKind, velocity: VelocitySolver<T>) -> Self {
        let inner = match kind {
            BlockKind::Qt => SolverConfig::new(Method::Cg, 1e-2).with_max_iters(50),
            BlockKind::Qd => SolverConfig::new(Method::Cg, 1e-12).with_max_iters(500),
        };
        Self::with_inner(sys, kind, velocity, inner)
    }

    pub fn with_inner(sys: &StokesSystem<T>, kind: BlockKind, velocity: VelocitySolver<T>, inner: SolverConfig) -> Self {
        BlockPreconditioner {
            kind,
            velocity,
            m_p: sys.m_p.clone(),
            jacobi: JacobiPreconditioner::new(&sys.m_p),
            bt: sys.bt.clone(),
            inner,
            n_component: sys.a_scalar.nrows(),
        }
    }

    fn mass_solve(&self, r: &[T]) -> Result<Vec<T>> {
        if r.iter().all(|v| *v == T::zero()) {
            return Ok(vec![T::zero(); r.len()]);
        }
        let (y, rep) = pcg(&self.m_p, &self.jacobi, r, None, &self.inner)?;
        if !rep.converged {
            return Err(Error::InnerSolve { report: Box::new(rep) });
        }
        Ok(y)
    }

    fn velocity_solve(&self, r: &[T], z: &mut [T]) -> Result<()> {
        let n = self.n_component;
        for d in 0..3 {
            self.velocity.apply(&r[d * n..(d + 1) * n], &mut z[d * n..(d + 1) * n])?;
        }
        Ok(())
    }
}

impl<T: Real> Preconditioner<T> for BlockPreconditioner<T> {
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()> {
        let nu = 3 * self.n_component;
        check_dim("block preconditioner", nu + self.m_p.nrows(), r.len())?;
        let (ru, rp) = r.split_at(nu);
        let y = self.mass_solve(rp)?;
        let zp = match self.kind {
            BlockKind::Qt => {
                let zp: Vec<T> = y.iter().map(|v| -*v).collect();
                let btz = self.bt.spmv(&zp)?;
                let rhs: Vec<T> = ru.iter().zip(&btz).map(|(a, b)| *a - *b).collect();
                self.velocity_solve(&rhs, &mut z[..nu])?;
                zp
            }
            BlockKind::Qd => {
                self.velocity_solve(ru, &mut z[..nu])?;
                y
            }
        };
        z[nu..].copy_from_slice(&project_pressure_mean(&zp, &self.m_p)?);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CavitySolution<T> {
    /// Interior velocity (component-major) followed by pressure.
    pub x: Vec<T>,
    pub report: SolveReport,
    pub setup_time: f64,
}

/// FGMRES with `Qt` or MINRES with `Qd`; the pressure mean is removed from the result.
pub fn solve_cavity<T: Real>(
    sys: &StokesSystem<T>,
    kind: BlockKind,
    engine: Engine,
    theta: f64,
    rel_tol: f64,
) -> Result<CavitySolution<T>> {
    let start = std::time::Instant::now();
    let vel = VelocitySolver::build(sys, engine, theta)?;
    let m = BlockPreconditioner::new(sys, kind, vel);
    let setup_time = start.elapsed().as_secs_f64();
    let (mut x, report) = match kind {
        BlockKind::Qt => fgmres(&sys.operator, &m, &sys.rhs, None, &SolverConfig::new(Method::Fgmres, rel_tol))?,
        BlockKind::Qd => minres(&sys.operator, &m, &sys.rhs, None, &SolverConfig::new(Method::Minres, rel_tol))?,
    };
    let nu = sys.n_velocity();
    let p = project_pressure_mean(&x[nu..], &sys.m_p)?;
    x[nu..].copy_from_slice(&p);
    Ok(CavitySolution { x, report, setup_time })
}

/// Legacy VTK unstructured grid with vertex values of velocity and pressure.
pub fn vtk_string<T: Real>(sys: &StokesSystem<T>, x: &[T]) -> Result<String> {
    let mesh = sys.velocity_space.mesh();
    let u = sys.velocity_fields(x)?;
    let p = sys.pressure(x);
    let nv = mesh.n_vertices();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\nstokes cavity\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {nv} double");
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?} {:?}", v[0], v[1], v[2]);
    }
    let nt = mesh.n_tets();
    let _ = writeln!(s, "CELLS {nt} {}", 5 * nt);
    for t in mesh.tets() {
        let _ = writeln!(s, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(s, "10");
    }
    // vertex DOFs come first in both spaces
    let _ = writeln!(s, "POINT_DATA {nv}\nVECTORS velocity double");
    for i in 0..nv {
        let _ = writeln!(s, "{:?} {:?} {:?}", u[0][i].as_f64(), u[1][i].as_f64(), u[2][i].as_f64());
    }
    let _ = writeln!(s, "SCALARS pressure double 1\nLOOKUP_TABLE default");
    for v in &p[..nv] {
        let _ = writeln!(s, "{:?}", v.as_f64());
    }
    Ok(s)
}

pub fn write_vtk<T: Real>(sys: &StokesSystem<T>, x: &[T], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = vtk_string(sys, x)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
