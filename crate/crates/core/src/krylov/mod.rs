//! Preconditioned Krylov solvers: CG, MINRES and (flexible) GMRES.
//!
//! Stopping is always decided on the true relative residual
//! `‖b − A x_i‖ / ‖b‖`, recomputed from the iterate. With a zero right-hand
//! side the denominator is the initial residual norm instead.

mod cg;
mod gmres;
mod minres;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scalar::{norm2, Real};
use crate::sparse::{CsrMatrix, DenseMatrix};

pub use cg::pcg;
pub use gmres::{fgmres, gmres};
pub use minres::minres;

pub trait LinearOperator<T> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]);
}

/// Approximate inverse `z ≈ A⁻¹ r`. Implementations may be nonlinear
/// (inner iterations) and may fail.
pub trait Preconditioner<T> {
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()>;
}

impl<T: Real> LinearOperator<T> for CsrMatrix<T> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        self.spmv_into(x, y);
    }
}

impl<T: Real> LinearOperator<T> for DenseMatrix<T> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        for i in 0..self.nrows() {
            y[i] = self.row(i).iter().zip(x).map(|(a, b)| *a * *b).sum();
        }
    }
}

impl<T, P: Preconditioner<T> + ?Sized> Preconditioner<T> for &P {
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()> {
        (**self).apply(r, z)
    }
}

impl<T, A: LinearOperator<T> + ?Sized> LinearOperator<T> for &A {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        (**self).apply(x, y)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl<T: Real> Preconditioner<T> for IdentityPreconditioner {
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()> {
        z.copy_from_slice(r);
        Ok(())
    }
}

/// Diagonal (Jacobi) preconditioner.
#[derive(Debug, Clone)]
pub struct JacobiPreconditioner<T> {
    inv_diag: Vec<T>,
}

impl<T: Real> JacobiPreconditioner<T> {
    pub fn new(a: &CsrMatrix<T>) -> Self {
        Self {
            inv_diag: a
                .diagonal()
                .into_iter()
                .map(|d| if d != T::zero() { T::one() / d } else { T::one() })
                .collect(),
        }
    }
}

impl<T: Real> Preconditioner<T> for JacobiPreconditioner<T> {
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()> {
        for ((zi, ri), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = *ri * *d;
        }
        Ok(())
    }
}

/// Adapts a closure into a [`Preconditioner`].
pub struct FnPreconditioner<F>(pub F);

impl<T, F: Fn(&[T], &mut [T]) -> Result<()>> Preconditioner<T> for FnPreconditioner<F> {
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()> {
        (self.0)(r, z)
    }
}

/// Adapts a closure into a [`LinearOperator`].
pub struct FnOperator<F> {
    pub dim: usize,
    pub f: F,
}

impl<T, F: Fn(&[T], &mut [T])> LinearOperator<T> for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        (self.f)(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cg,
    Minres,
    Fgmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Restart length (FGMRES only).
    pub restart: usize,
}

impl SolverConfig {
    pub fn new(method: Method, rel_tol: f64) -> Self {
        Self {
            method,
            rel_tol,
            max_iters: 1000,
            restart: 100,
        }
    }

    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn with_restart(mut self, n: usize) -> Self {
        self.restart = n;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(crate::Error::InvalidArgument("rel_tol must be positive".into()));
        }
        if self.restart == 0 {
            return Err(crate::Error::InvalidArgument("restart must be >= 1".into()));
        }
        Ok(())
    }
}

/// Record of one Krylov run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// True relative residuals, one entry per iterate starting with the initial guess.
    pub residual_history: Vec<f64>,
    /// MINRES only: the preconditioned residual norms ‖r_i‖_{M} tracked by the
    /// recurrence (nonincreasing in exact arithmetic).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preconditioned_residuals: Vec<f64>,
    pub wall_time: f64,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }

    /// `iteration,relres` rows.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iteration,relres\n");
        for (i, r) in self.residual_history.iter().enumerate() {
            s.push_str(&format!("{i},{r:e}\n"));
        }
        s
    }
}

/// `r = b − A x`
pub(crate) fn residual<T: Real, A: LinearOperator<T> + ?Sized>(a: &A, b: &[T], x: &[T], r: &mut [T]) {
    a.apply(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = *bi - *ri;
    }
}

/// Shared residual bookkeeping: the reference norm and the history.
pub(crate) struct Monitor {
    denom: f64,
    tol: f64,
    pub history: Vec<f64>,
}

impl Monitor {
    pub fn new<T: Real>(b: &[T], r0: &[T], tol: f64) -> Self {
        let bn = norm2(b).as_f64();
        let rn = norm2(r0).as_f64();
        let denom = if bn > 0.0 { bn } else if rn > 0.0 { rn } else { 1.0 };
        Self {
            denom,
            tol,
            history: vec![rn / denom],
        }
    }

    /// Records a true residual; returns whether it meets the tolerance.
    pub fn record<T: Real>(&mut self, r: &[T]) -> bool {
        let rel = norm2(r).as_f64() / self.denom;
        self.history.push(rel);
        rel <= self.tol
    }

    pub fn initial_converged(&self) -> bool {
        self.history[0] <= self.tol
    }

    pub fn last(&self) -> f64 {
        *self.history.last().unwrap()
    }
}

pub(crate) fn initial_guess<T: Real>(n: usize, x0: Option<&[T]>) -> Result<Vec<T>> {
    match x0 {
        Some(x) => {
            crate::error::check_dim("initial guess", n, x.len())?;
            Ok(x.to_vec())
        }
        None => Ok(vec![T::zero(); n]),
    }
}

/// Random vector with entries uniform in [-1, 1), reproducible from `seed`.
pub fn random_vector<T: Real>(n: usize, seed: u64) -> Vec<T> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect()
}
