//! Two-level auxiliary-space preconditioner (Gauss–Seidel on the P^k system,
//! correction in the P1 space) and the augmented block system that
//! describes it as a Gauss–Seidel iteration.

use serde::{Deserialize, Serialize};

use crate::amg::{build_hierarchy, gauss_seidel_backward, gauss_seidel_forward, AmgConfig, AmgHierarchy, DENSE_COARSE_LIMIT};
use crate::error::{check_dim, Error, Result};
use crate::krylov::{random_vector, Preconditioner};
use crate::scalar::{dot, Real};
use crate::sparse::{Cholesky, CsrMatrix, DenseMatrix};
use crate::transfer::{galerkin_coarse, TransferOperator};

/// Largest total augmented dimension handled by the dense rate oracle.
pub const DENSE_ORACLE_LIMIT: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepDirection {
    Forward,
    Backward,
}

impl SweepDirection {
    pub fn transposed(self) -> Self {
        match self {
            SweepDirection::Forward => SweepDirection::Backward,
            SweepDirection::Backward => SweepDirection::Forward,
        }
    }
}

fn sweep<T: Real>(a: &CsrMatrix<T>, b: &[T], x: &mut [T], dir: SweepDirection, count: usize) {
    for _ in 0..count {
        match dir {
            SweepDirection::Forward => gauss_seidel_forward(a, b, x),
            SweepDirection::Backward => gauss_seidel_backward(a, b, x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum CoarseSolver {
    /// Dense Cholesky of the coarse operator.
    Exact,
    /// `cycles` V-cycles of an AMG hierarchy built on the coarse operator.
    Amg { config: AmgConfig, cycles: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelConfig {
    pub presmooth: bool,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    pub post_direction: SweepDirection,
    pub coarse: CoarseSolver,
}

impl Default for TwoLevelConfig {
    fn default() -> Self {
        TwoLevelConfig {
            presmooth: true,
            pre_sweeps: 1,
            post_sweeps: 1,
            post_direction: SweepDirection::Backward,
            coarse: CoarseSolver::Amg { config: AmgConfig::default(), cycles: 1 },
        }
    }
}

impl TwoLevelConfig {
    pub fn with_theta(theta: f64) -> Self {
        TwoLevelConfig { coarse: CoarseSolver::Amg { config: AmgConfig::with_theta(theta), cycles: 1 }, ..Default::default() }
    }

    /// No presmoothing, exact coarse solve, one forward sweep afterwards.
    pub fn plain_exact() -> Self {
        TwoLevelConfig {
            presmooth: false,
            pre_sweeps: 0,
            post_sweeps: 1,
            post_direction: SweepDirection::Forward,
            coarse: CoarseSolver::Exact,
        }
    }

    /// Forward presmoothing, exact coarse solve, backward postsmoothing.
    pub fn symmetric_exact() -> Self {
        TwoLevelConfig { coarse: CoarseSolver::Exact, ..Default::default() }
    }
}

#[derive(Debug, Clone)]
enum CoarseImpl<T> {
    Empty,
    Exact(Cholesky<T>),
    Amg { hierarchy: AmgHierarchy<T>, cycles: usize },
}

#[derive(Debug, Clone)]
pub struct TwoLevelPreconditioner<T> {
    a_h: CsrMatrix<T>,
    transfer: TransferOperator<T>,
    a_coarse: CsrMatrix<T>,
    coarse: CoarseImpl<T>,
    config: TwoLevelConfig,
}

impl<T: Real> TwoLevelPreconditioner<T> {
    pub fn new(a_h: CsrMatrix<T>, transfer: TransferOperator<T>, config: TwoLevelConfig) -> Result<Self> {
        check_dim("two-level operator", a_h.nrows(), a_h.ncols())?;
        check_dim("two-level transfer", a_h.nrows(), transfer.n_fine())?;
        let a_coarse = galerkin_coarse(&a_h, &transfer)?;
        let coarse = if a_coarse.nrows() == 0 {
            CoarseImpl::Empty
        } else {
            match config.coarse {
                CoarseSolver::Exact => {
                    if a_coarse.nrows() > DENSE_COARSE_LIMIT {
                        return Err(Error::DenseLimit { dim: a_coarse.nrows(), limit: DENSE_COARSE_LIMIT });
                    }
                    CoarseImpl::Exact(a_coarse.to_dense().cholesky()?)
                }
                CoarseSolver::Amg { config: amg, cycles } => {
                    if cycles == 0 {
                        return Err(Error::InvalidArgument("coarse V-cycle count must be positive".into()));
                    }
                    CoarseImpl::Amg { hierarchy: build_hierarchy(&a_coarse, &amg)?, cycles }
                }
            }
        };
        Ok(TwoLevelPreconditioner { a_h, transfer, a_coarse, coarse, config })
    }

    pub fn fine_operator(&self) -> &CsrMatrix<T> {
        &self.a_h
    }

    pub fn coarse_operator(&self) -> &CsrMatrix<T> {
        &self.a_coarse
    }

    pub fn transfer(&self) -> &TransferOperator<T> {
        &self.transfer
    }

    pub fn config(&self) -> &TwoLevelConfig {
        &self.config
    }

    pub fn coarse_hierarchy(&self) -> Option<&AmgHierarchy<T>> {
        match &self.coarse {
            CoarseImpl::Amg { hierarchy, .. } => Some(hierarchy),
            _ => None,
        }
    }

    /// `1 + C_op(coarse) · nnz(A_H) / nnz(A_h)`, with `C_op(coarse) = 1` for a direct coarse solve.
    pub fn operator_complexity(&self) -> f64 {
        let inner = self.coarse_hierarchy().map_or(1.0, |h| h.operator_complexity());
        if self.a_h.nnz() == 0 {
            return 1.0;
        }
        1.0 + inner * self.a_coarse.nnz() as f64 / self.a_h.nnz() as f64
    }

    /// Number of levels including the fine one.
    pub fn n_levels(&self) -> usize {
        1 + self.coarse_hierarchy().map_or(1, |h| h.n_levels())
    }

    fn coarse_solve(&self, b: &[T]) -> Result<Vec<T>> {
        match &self.coarse {
            CoarseImpl::Empty => Ok(Vec::new()),
            CoarseImpl::Exact(c) => c.solve(b),
            CoarseImpl::Amg { hierarchy, cycles } => {
                let mut x = hierarchy.vcycle(b)?;
                let mut ax = vec![T::zero(); b.len()];
                for _ in 1..*cycles {
                    self.a_coarse.spmv_into(&x, &mut ax);
                    let res: Vec<T> = b.iter().zip(&ax).map(|(bi, ai)| *bi - *ai).collect();
                    for (xi, ci) in x.iter_mut().zip(hierarchy.vcycle(&res)?) {
                        *xi += ci;
                    }
                }
                Ok(x)
            }
        }
    }

    fn run(&self, r: &[T], pre: (SweepDirection, usize), post: (SweepDirection, usize)) -> Result<Vec<T>> {
        check_dim("two-level residual", self.a_h.nrows(), r.len())?;
        let n = r.len();
        let mut x = vec![T::zero(); n];
        sweep(&self.a_h, r, &mut x, pre.0, pre.1);
        let mut res = r.to_vec();
        if pre.1 > 0 {
            let mut ax = vec![T::zero(); n];
            self.a_h.spmv_into(&x, &mut ax);
            for (ri, ai) in res.iter_mut().zip(&ax) {
                *ri -= *ai;
            }
        }
        let ec = self.coarse_solve(&self.transfer.restrict(&res)?)?;
        if !ec.is_empty() {
            for (xi, ci) in x.iter_mut().zip(self.transfer.prolong(&ec)?) {
                *xi += ci;
            }
        }
        sweep(&self.a_h, r, &mut x, post.0, post.1);
        Ok(x)
    }

    fn pre_stage(&self) -> (SweepDirection, usize) {
        (SweepDirection::Forward, if self.config.presmooth { self.config.pre_sweeps } else { 0 })
    }

    /// One application with zero initial guess.
    pub fn two_level_apply(&self, r: &[T]) -> Result<Vec<T>> {
        self.run(r, self.pre_stage(), (self.config.post_direction, self.config.post_sweeps))
    }

    /// Action of the transposed operator: reversed stages, each sweep transposed.
    pub fn apply_transpose(&self, r: &[T]) -> Result<Vec<T>> {
        let pre = self.pre_stage();
        self.run(r, (self.config.post_direction.transposed(), self.config.post_sweeps), (pre.0.transposed(), pre.1))
    }
}

impl<T: Real> Preconditioner<T> for TwoLevelPreconditioner<T> {
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()> {
        z.copy_from_slice(&self.two_level_apply(r)?);
        Ok(())
    }
}

/// A preconditioner whose transpose can also be applied.
pub trait AdjointPreconditioner<T>: Preconditioner<T> {
    fn apply_transpose(&self, r: &[T], z: &mut [T]) -> Result<()>;
}

impl<T: Real> AdjointPreconditioner<T> for TwoLevelPreconditioner<T> {
    fn apply_transpose(&self, r: &[T], z: &mut [T]) -> Result<()> {
        z.copy_from_slice(&TwoLevelPreconditioner::apply_transpose(self, r)?);
        Ok(())
    }
}

/// One step of the stationary iteration `u + M(f − A u)`.
pub fn stationary_step<T: Real, P: Preconditioner<T> + ?Sized>(a: &CsrMatrix<T>, m: &P, f: &[T], u: &[T]) -> Result<Vec<T>> {
    let au = a.spmv(u)?;
    let r: Vec<T> = f.iter().zip(&au).map(|(fi, ai)| *fi - *ai).collect();
    let mut z = vec![T::zero(); r.len()];
    m.apply(&r, &mut z)?;
    Ok(u.iter().zip(&z).map(|(ui, zi)| *ui + *zi).collect())
}

/// Block system on the coarse-plus-fine product space.
#[derive(Debug, Clone)]
pub struct AugmentedSystem<T> {
    n_coarse: usize,
    n_fine: usize,
    matrix: CsrMatrix<T>,
    coarse_block: CsrMatrix<T>,
    fine_coarse: CsrMatrix<T>,
    fine_block: CsrMatrix<T>,
    transfer: TransferOperator<T>,
    coarse_factor: Cholesky<T>,
}

pub fn build_augmented<T: Real>(a_h: &CsrMatrix<T>, t: &TransferOperator<T>) -> Result<AugmentedSystem<T>> {
    check_dim("augmented operator", a_h.nrows(), a_h.ncols())?;
    check_dim("augmented transfer", a_h.nrows(), t.n_fine())?;
    let coarse_block = galerkin_coarse(a_h, t)?;
    if coarse_block.nrows() > DENSE_COARSE_LIMIT {
        return Err(Error::DenseLimit { dim: coarse_block.nrows(), limit: DENSE_COARSE_LIMIT });
    }
    let fine_coarse = a_h.matmul(t.prolongation())?;
    let coarse_fine = t.restriction().matmul(a_h)?;
    let matrix = CsrMatrix::block(&[vec![Some(&coarse_block), Some(&coarse_fine)], vec![Some(&fine_coarse), Some(a_h)]])?;
    let coarse_factor = coarse_block.to_dense().cholesky()?;
    Ok(AugmentedSystem {
        n_coarse: t.n_coarse(),
        n_fine: t.n_fine(),
        matrix,
        coarse_block,
        fine_coarse,
        fine_block: a_h.clone(),
        transfer: t.clone(),
        coarse_factor,
    })
}

impl<T: Real> AugmentedSystem<T> {
    pub fn n_coarse(&self) -> usize {
        self.n_coarse
    }

    pub fn n_fine(&self) -> usize {
        self.n_fine
    }

    pub fn dim(&self) -> usize {
        self.n_coarse + self.n_fine
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    pub fn coarse_block(&self) -> &CsrMatrix<T> {
        &self.coarse_block
    }

    /// `(c, −I_P c)`, which the augmented matrix annihilates.
    pub fn null_vector(&self, c: &[T]) -> Result<Vec<T>> {
        let pc = self.transfer.prolong(c)?;
        Ok(c.iter().copied().chain(pc.into_iter().map(|v| -v)).collect())
    }

    /// `(I_R f, f)`.
    pub fn augmented_rhs(&self, f: &[T]) -> Result<Vec<T>> {
        let rf = self.transfer.restrict(f)?;
        Ok(rf.into_iter().chain(f.iter().copied()).collect())
    }

    /// `I_P v̄ + v̂`.
    pub fn reconstruct(&self, v: &[T]) -> Result<Vec<T>> {
        check_dim("augmented vector", self.dim(), v.len())?;
        let (vc, vf) = v.split_at(self.n_coarse);
        let pc = self.transfer.prolong(vc)?;
        Ok(pc.iter().zip(vf).map(|(a, b)| *a + *b).collect())
    }

    /// Solves `(𝒟 − ℒ) w = g`: exact coarse block, then one forward sweep worth of fine substitution.
    fn lower_solve(&self, g: &[T]) -> Result<Vec<T>> {
        let (gc, gf) = g.split_at(self.n_coarse);
        let wc = self.coarse_factor.solve(gc)?;
        let mut rhs = gf.to_vec();
        if !wc.is_empty() {
            let c = self.fine_coarse.spmv(&wc)?;
            for (ri, ci) in rhs.iter_mut().zip(&c) {
                *ri -= *ci;
            }
        }
        let mut wf = vec![T::zero(); self.n_fine];
        gauss_seidel_forward(&self.fine_block, &rhs, &mut wf);
        Ok(wc.into_iter().chain(wf).collect())
    }

    /// `v + (𝒟 − ℒ)⁻¹ (f − 𝒜 v)`.
    pub fn gs_step(&self, v: &[T], f: &[T]) -> Result<Vec<T>> {
        check_dim("augmented iterate", self.dim(), v.len())?;
        check_dim("augmented rhs", self.dim(), f.len())?;
        let av = self.matrix.spmv(v)?;
        let res: Vec<T> = f.iter().zip(&av).map(|(a, b)| *a - *b).collect();
        let w = self.lower_solve(&res)?;
        Ok(v.iter().zip(&w).map(|(a, b)| *a + *b).collect())
    }

    /// Dense `𝒟 − ℒ`.
    pub fn lower_dense(&self) -> DenseMatrix<T> {
        let nc = self.n_coarse;
        let mut m = DenseMatrix::zeros(self.dim(), self.dim());
        for i in 0..nc {
            let (cols, vals) = self.coarse_block.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        for i in 0..self.n_fine {
            let (cols, vals) = self.fine_coarse.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(nc + i, j)] = v;
            }
            let (cols, vals) = self.fine_block.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    m[(nc + i, nc + j)] = v;
                }
            }
        }
        m
    }

    /// Dense `𝒟⁻¹`: inverse coarse block and inverse fine diagonal.
    pub fn block_diagonal_inverse_dense(&self) -> Result<DenseMatrix<T>> {
        let nc = self.n_coarse;
        let mut m = DenseMatrix::zeros(self.dim(), self.dim());
        let inv = DenseMatrix::from_columns_of(nc, nc, |e| self.coarse_factor.solve(e))?;
        for i in 0..nc {
            for j in 0..nc {
                m[(i, j)] = inv[(i, j)];
            }
        }
        for (i, d) in self.fine_block.diagonal().into_iter().enumerate() {
            m[(nc + i, nc + i)] = T::one() / d;
        }
        Ok(m)
    }

    /// Dense `ℒ` (negated strictly lower block-triangular part).
    pub fn strictly_lower_dense(&self) -> DenseMatrix<T> {
        let n = self.dim();
        let nc = self.n_coarse;
        let mut l = self.lower_dense().scaled(-T::one());
        for i in 0..n {
            for j in 0..n {
                if (i < nc && j < nc) || i == j {
                    l[(i, j)] = T::zero();
                }
            }
        }
        l
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateIdentity {
    /// Squared seminorm of the error propagator on the range.
    pub lhs: f64,
    /// `1 − μ⁺_min` from the pencil `𝒜x = μ(𝒜 + 𝒮)x`.
    pub rhs: f64,
    pub null_dim: usize,
}

impl RateIdentity {
    pub fn abs_diff(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// Computes both sides of the convergence-rate identity with dense linear algebra.
pub fn rate_identity_oracle<T: Real>(s: &AugmentedSystem<T>) -> Result<RateIdentity> {
    let n = s.dim();
    if n > DENSE_ORACLE_LIMIT {
        return Err(Error::DenseLimit { dim: n, limit: DENSE_ORACLE_LIMIT });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty augmented system".into()));
    }
    let a = s.matrix.to_dense();

    // left side: E = I − (𝒟−ℒ)⁻¹𝒜 in the eigenbasis of 𝒜 restricted to its range
    let (vals, q) = a.sym_eigen()?;
    let lmax = vals[n - 1];
    let cut = T::lit(1e-10) * lmax;
    let range: Vec<usize> = (0..n).filter(|&i| vals[i] > cut).collect();
    let r = range.len();
    let lu = s.lower_dense().lu()?;
    let dla = DenseMatrix::from_columns_of(n, n, |e| lu.solve(&a.matvec(e)?))?;
    let e = DenseMatrix::identity(n).sub(&dla)?;
    let mut qp = DenseMatrix::zeros(n, r);
    for (c, &i) in range.iter().enumerate() {
        for row in 0..n {
            qp[(row, c)] = q[(row, i)];
        }
    }
    let mut x = qp.transpose().matmul(&e)?.matmul(&qp)?;
    for i in 0..r {
        let si = vals[range[i]].sqrt();
        for j in 0..r {
            let sj = vals[range[j]].sqrt();
            x[(i, j)] = x[(i, j)] * si / sj;
        }
    }
    let mut xtx = x.transpose().matmul(&x)?;
    xtx.symmetrize();
    let (xv, _) = xtx.sym_eigen()?;
    let lhs = xv[r - 1];

    // right side: pencil with 𝒜 + ℒ𝒟⁻¹ℒᵀ
    let l = s.strictly_lower_dense();
    let sm = l.matmul(&s.block_diagonal_inverse_dense()?)?.matmul(&l.transpose())?;
    let mut apls = a.add(&sm)?;
    apls.symmetrize();
    let c = apls.cholesky()?;
    let mut w = a.clone();
    for j in 0..n {
        let mut col = w.column(j);
        c.forward_in_place(&mut col);
        for i in 0..n {
            w[(i, j)] = col[i];
        }
    }
    let mut w = w.transpose();
    for j in 0..n {
        let mut col = w.column(j);
        c.forward_in_place(&mut col);
        for i in 0..n {
            w[(i, j)] = col[i];
        }
    }
    w.symmetrize();
    let (mu, _) = w.sym_eigen()?;
    let mu_min = mu.iter().copied().find(|m| *m > T::lit(1e-10)).ok_or(Error::InvalidStructure("zero pencil".into()))?;
    Ok(RateIdentity { lhs: lhs.as_f64(), rhs: 1.0 - mu_min.as_f64(), null_dim: n - r })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionEstimate {
    /// Estimated `‖E‖_A`.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest eigenvalue of `E*E`, `E = I − M A`, by Lanczos in the `A` inner
/// product with full reorthogonalization. `value` is its square root.
pub fn contraction_factor_estimate<T: Real, P: AdjointPreconditioner<T> + ?Sized>(
    m: &P,
    a: &CsrMatrix<T>,
    iters: usize,
    seed: u64,
) -> Result<ContractionEstimate> {
    let n = a.nrows();
    check_dim("contraction operator", n, a.ncols())?;
    let mut x: Vec<T> = random_vector(n, seed);
    let nx = dot(&x, &a.spmv(&x)?).max(T::zero()).sqrt();
    if n == 0 || nx == T::zero() {
        return Ok(ContractionEstimate { value: 0.0, iterations: 0, converged: true });
    }
    x.iter_mut().for_each(|v| *v /= nx);
    let mut tmp = vec![T::zero(); n];
    // basis q_j with A q_j alongside
    let mut q: Vec<Vec<T>> = Vec::new();
    let mut aq: Vec<Vec<T>> = Vec::new();
    let (mut alpha, mut beta) = (Vec::<f64>::new(), Vec::<f64>::new());
    let mut est = f64::NAN;
    for it in 1..=iters.min(n) {
        let ax = a.spmv(&x)?;
        m.apply(&ax, &mut tmp)?;
        let ex: Vec<T> = x.iter().zip(&tmp).map(|(a, b)| *a - *b).collect();
        let aex = a.spmv(&ex)?;
        m.apply_transpose(&aex, &mut tmp)?;
        let mut w: Vec<T> = ex.iter().zip(&tmp).map(|(a, b)| *a - *b).collect();
        alpha.push(dot(&w, &ax).as_f64());
        q.push(x);
        aq.push(ax);
        for _ in 0..2 {
            for (qj, aqj) in q.iter().zip(&aq) {
                let c = dot(&w, aqj);
                w.iter_mut().zip(qj).for_each(|(wi, qi)| *wi -= c * *qi);
            }
        }
        let b = dot(&w, &a.spmv(&w)?).max(T::zero()).sqrt();
        let k = alpha.len();
        let mut t = DenseMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let ritz = t.sym_eigen()?.0.into_iter().fold(0.0f64, f64::max);
        let done = b.as_f64() <= 1e-14 * ritz.max(1e-300) || (ritz - est).abs() <= 1e-13 * ritz;
        est = ritz;
        if done {
            return Ok(ContractionEstimate { value: est.max(0.0).sqrt(), iterations: it, converged: true });
        }
        beta.push(b.as_f64());
        x = w.into_iter().map(|v| v / b).collect();
    }
    Ok(ContractionEstimate { value: est.max(0.0).sqrt(), iterations: iters.min(n), converged: false })
}

/// Solver engine used for (blocks of) the Poisson operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Classical AMG applied directly to the P^k operator.
    Amg,
    /// Two-level method with AMG on the P1 auxiliary operator.
    Gamg,
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Engine::Amg => "amg",
            Engine::Gamg => "gamg",
        })
    }
}

impl std::str::FromStr for Engine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amg" => Ok(Engine::Amg),
            "gamg" => Ok(Engine::Gamg),
            _ => Err(Error::InvalidArgument(format!("unknown engine '{s}'"))),
        }
    }
}

/// One oracle comparison for verification reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_diff: f64,
    pub tol: f64,
    pub pass: bool,
}

impl OracleRecord {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let abs_diff = (lhs - rhs).abs();
        OracleRecord { name: name.into(), lhs, rhs, abs_diff, tol, pass: abs_diff <= tol }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cube_mesh;
    use crate::poisson::PoissonProblem;
    use std::sync::Arc;

    fn problem(n: usize, k: u8) -> PoissonProblem<f64> {
        PoissonProblem::homogeneous_cube(n, k).unwrap()
    }

    fn perturbed(n: usize, k: u8, seed: u64) -> PoissonProblem<f64> {
        let mesh = build_cube_mesh(n).unwrap().perturb_interior(0.2, seed).unwrap();
        PoissonProblem::new(Arc::new(mesh), k, |_| 0.0, |_| 0.0).unwrap()
    }

    fn two_level(p: &PoissonProblem<f64>, cfg: TwoLevelConfig) -> TwoLevelPreconditioner<f64> {
        TwoLevelPreconditioner::new(p.system.a.clone(), p.transfer.clone().unwrap(), cfg).unwrap()
    }

    struct Exact(Cholesky<f64>);
    impl Preconditioner<f64> for Exact {
        fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
            z.copy_from_slice(&self.0.solve(r)?);
            Ok(())
        }
    }
    impl AdjointPreconditioner<f64> for Exact {
        fn apply_transpose(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
            self.apply(r, z)
        }
    }
    struct Zero;
    impl Preconditioner<f64> for Zero {
        fn apply(&self, _: &[f64], z: &mut [f64]) -> Result<()> {
            z.iter_mut().for_each(|v| *v = 0.0);
            Ok(())
        }
    }
    impl AdjointPreconditioner<f64> for Zero {
        fn apply_transpose(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
            self.apply(r, z)
        }
    }

    #[test]
    fn zero_residual_maps_to_zero() {
        let p = problem(2, 2);
        let m = two_level(&p, TwoLevelConfig::default());
        assert!(m.two_level_apply(&vec![0.0; p.n_interior()]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_transfer_gives_exact_solve() {
        let p = problem(3, 1);
        let a = p.system.a.clone();
        let n = a.nrows();
        let t = TransferOperator::from_prolongation(CsrMatrix::identity(n));
        let r = random_vector::<f64>(n, 4);
        let x_ref = a.to_dense().cholesky_solve(&r).unwrap();
        for cfg in [TwoLevelConfig::plain_exact(), TwoLevelConfig::symmetric_exact()] {
            let m = TwoLevelPreconditioner::new(a.clone(), t.clone(), cfg).unwrap();
            let x = m.two_level_apply(&r).unwrap();
            for (u, v) in x.iter().zip(&x_ref) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_variant_is_symmetric() {
        let p = perturbed(2, 3, 7);
        let m = two_level(&p, TwoLevelConfig::symmetric_exact());
        let n = p.n_interior();
        for s in 0..4 {
            let x = random_vector::<f64>(n, s);
            let y = random_vector::<f64>(n, 50 + s);
            let l = dot(&x, &m.two_level_apply(&y).unwrap());
            let r = dot(&y, &m.two_level_apply(&x).unwrap());
            assert!((l - r).abs() <= 1e-11 * l.abs().max(1.0), "{l} {r}");
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let p = perturbed(2, 2, 3);
        for cfg in [TwoLevelConfig::plain_exact(), TwoLevelConfig::default()] {
            let m = two_level(&p, cfg);
            let n = p.n_interior();
            let x = random_vector::<f64>(n, 1);
            let y = random_vector::<f64>(n, 2);
            let l = dot(&x, &m.two_level_apply(&y).unwrap());
            let r = dot(&y, &m.apply_transpose(&x).unwrap());
            assert!((l - r).abs() <= 1e-11 * l.abs().max(1.0));
        }
    }

    #[test]
    fn coarse_operator_is_galerkin() {
        let p = problem(2, 3);
        let m = two_level(&p, TwoLevelConfig::default());
        let g = galerkin_coarse(&p.system.a, p.transfer.as_ref().unwrap()).unwrap();
        assert!(m.coarse_operator().max_relative_diff(&g).unwrap() <= 1e-12);
        let h = m.coarse_hierarchy().unwrap();
        assert!(h.levels()[0].a.max_relative_diff(&g).unwrap() <= 1e-12);
    }

    #[test]
    fn augmented_blocks() {
        let p = perturbed(2, 2, 11);
        let t = p.transfer.as_ref().unwrap();
        let s = build_augmented(&p.system.a, t).unwrap();
        assert_eq!(s.coarse_block(), &galerkin_coarse(&p.system.a, t).unwrap());
        assert!(s.matrix().is_symmetric_with(1e-13));
        let norm = s.matrix().frobenius_norm();
        for seed in 0..5 {
            let c = random_vector::<f64>(s.n_coarse(), seed);
            let out = s.matrix().spmv(&s.null_vector(&c).unwrap()).unwrap();
            assert!(out.iter().all(|v| v.abs() <= 1e-12 * norm));
        }
        // the image is of the form (I_R y, y)
        let v = random_vector::<f64>(s.dim(), 9);
        let av = s.matrix().spmv(&v).unwrap();
        let ry = t.restrict(&av[s.n_coarse()..]).unwrap();
        for (a, b) in ry.iter().zip(&av[..s.n_coarse()]) {
            assert!((a - b).abs() <= 1e-12 * norm);
        }
    }

    #[test]
    fn augmented_dimension_mismatch() {
        let p = problem(2, 2);
        let t = TransferOperator::from_prolongation(CsrMatrix::<f64>::identity(3));
        assert!(build_augmented(&p.system.a, &t).is_err());
    }

    #[test]
    fn gs_step_fixed_point() {
        let p = perturbed(2, 2, 5);
        let s = build_augmented(&p.system.a, p.transfer.as_ref().unwrap()).unwrap();
        let v = random_vector::<f64>(s.dim(), 1);
        let f = s.matrix().spmv(&v).unwrap();
        let out = s.gs_step(&v, &f).unwrap();
        for (a, b) in out.iter().zip(&v) {
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0));
        }
    }

    #[test]
    fn gs_step_toy_by_hand() {
        // A_h = [4], P = [2]: 𝒜 = [[16, 8], [8, 4]]
        let a = CsrMatrix::from_triplets(1, 1, &[(0, 0, 4.0f64)]).unwrap();
        let t = TransferOperator::from_prolongation(CsrMatrix::from_triplets(1, 1, &[(0, 0, 2.0)]).unwrap());
        let s = build_augmented(&a, &t).unwrap();
        let f = s.augmented_rhs(&[1.0]).unwrap();
        assert_eq!(f, vec![2.0, 1.0]);
        // residual (2, 1); coarse 2/16; fine (1 − 8/8)/4 = 0
        let v = s.gs_step(&[0.0, 0.0], &f).unwrap();
        assert!((v[0] - 0.125).abs() < 1e-15 && v[1].abs() < 1e-15);
        assert!((s.reconstruct(&v).unwrap()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn singular_coarse_block_rejected() {
        let a = CsrMatrix::<f64>::identity(2);
        let t = TransferOperator::from_prolongation(CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0)]).unwrap());
        assert!(build_augmented(&a, &t).is_err());
    }

    #[test]
    fn block_gs_equals_two_level_iteration() {
        for k in [2u8, 3] {
            let p = perturbed(2, k, 21);
            let a = &p.system.a;
            let t = p.transfer.as_ref().unwrap();
            let m = two_level(&p, TwoLevelConfig::plain_exact());
            let s = build_augmented(a, t).unwrap();
            let n = a.nrows();
            let f = random_vector::<f64>(n, 2);
            let ft = s.augmented_rhs(&f).unwrap();
            let mut u = random_vector::<f64>(n, 3);
            let mut v: Vec<f64> = vec![0.0; s.n_coarse()].into_iter().chain(u.iter().copied()).collect();
            for _ in 0..10 {
                u = stationary_step(a, &m, &f, &u).unwrap();
                v = s.gs_step(&v, &ft).unwrap();
                let w = s.reconstruct(&v).unwrap();
                let d = u.iter().zip(&w).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                assert!(d <= 1e-12, "k={k} diff {d}");
            }
        }
    }

    #[test]
    fn rate_identity_holds() {
        for (k, seed) in [(2u8, 1u64), (3, 2)] {
            let p = perturbed(2, k, seed);
            let s = build_augmented(&p.system.a, p.transfer.as_ref().unwrap()).unwrap();
            let ri = rate_identity_oracle(&s).unwrap();
            assert_eq!(ri.null_dim, s.n_coarse());
            assert!(ri.abs_diff() <= 1e-8, "{ri:?}");
            assert!(ri.lhs < 1.0 && ri.lhs > 0.0);
        }
    }

    #[test]
    fn rate_oracle_dense_limit() {
        let p = problem(3, 3);
        let s = build_augmented(&p.system.a, p.transfer.as_ref().unwrap()).unwrap();
        assert!(matches!(rate_identity_oracle(&s), Err(Error::DenseLimit { .. })));
    }

    #[test]
    fn contraction_trivial_cases() {
        let p = problem(2, 2);
        let a = &p.system.a;
        let exact = Exact(a.to_dense().cholesky().unwrap());
        assert!(contraction_factor_estimate(&exact, a, 200, 1).unwrap().value <= 1e-8);
        let z = contraction_factor_estimate(&Zero, a, 200, 1).unwrap();
        assert!((z.value - 1.0).abs() <= 1e-8 && z.converged);
    }

    fn dense_contraction(m: &TwoLevelPreconditioner<f64>, a: &CsrMatrix<f64>) -> f64 {
        // ‖E‖_A = ‖Lᵀ E L⁻ᵀ‖₂ with A = L Lᵀ
        let n = a.nrows();
        let ad = a.to_dense();
        let ma = DenseMatrix::from_columns_of(n, n, |e| m.two_level_apply(&ad.matvec(e)?)).unwrap();
        let e = DenseMatrix::identity(n).sub(&ma).unwrap();
        let eae = e.transpose().matmul(&ad).unwrap().matmul(&e).unwrap();
        // generalized eigenproblem EᵀAE x = λ A x via Cholesky of A
        let c = ad.cholesky().unwrap();
        let mut w = eae.clone();
        for pass in 0..2 {
            for j in 0..n {
                let mut col = w.column(j);
                c.forward_in_place(&mut col);
                for i in 0..n {
                    w[(i, j)] = col[i];
                }
            }
            if pass == 0 {
                w = w.transpose();
            }
        }
        w.symmetrize();
        w.sym_eigen().unwrap().0[n - 1].sqrt()
    }

    #[test]
    fn contraction_matches_dense() {
        let p = problem(2, 2);
        let a = &p.system.a;
        for cfg in [TwoLevelConfig::plain_exact(), TwoLevelConfig::default()] {
            let m = two_level(&p, cfg);
            let est = contraction_factor_estimate(&m, a, 200, 5).unwrap();
            let dense = dense_contraction(&m, a);
            assert!((est.value - dense).abs() <= 1e-4, "{est:?} vs {dense}");
            assert!(est.value < 1.0);
        }
    }

    #[test]
    fn contraction_matches_rate_identity() {
        let p = perturbed(2, 2, 13);
        let a = &p.system.a;
        let m = two_level(&p, TwoLevelConfig::plain_exact());
        let s = build_augmented(a, p.transfer.as_ref().unwrap()).unwrap();
        let ri = rate_identity_oracle(&s).unwrap();
        let est = contraction_factor_estimate(&m, a, 200, 8).unwrap();
        assert!((est.value - ri.lhs.sqrt()).abs() <= 1e-4, "{est:?} {ri:?}");
    }

    #[test]
    fn operator_complexity_formula() {
        let p = problem(3, 2);
        let m = two_level(&p, TwoLevelConfig::default());
        let h = m.coarse_hierarchy().unwrap();
        let expect = 1.0 + h.operator_complexity() * m.coarse_operator().nnz() as f64 / p.system.a.nnz() as f64;
        assert_eq!(m.operator_complexity(), expect);
        assert!(m.operator_complexity() > 1.0);
    }

    #[test]
    fn oracle_record_json() {
        let r = OracleRecord::new("x", 0.5, 0.5 + 1e-12, 1e-8);
        assert!(r.pass);
        let back: OracleRecord = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
