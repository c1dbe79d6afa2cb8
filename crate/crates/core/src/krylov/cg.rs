use std::time::Instant;

use super::{initial_guess, residual, LinearOperator, Monitor, Preconditioner, SolveReport, SolverConfig};
use crate::error::{check_dim, Error, Result};
use crate::scalar::{axpy, dot, Real};

/// Preconditioned conjugate gradients for SPD `A` and SPD `M`.
pub fn pcg<T, A, M>(a: &A, m: &M, b: &[T], x0: Option<&[T]>, cfg: &SolverConfig) -> Result<(Vec<T>, SolveReport)>
where
    T: Real,
    A: LinearOperator<T> + ?Sized,
    M: Preconditioner<T> + ?Sized,
{
    cfg.validate()?;
    let start = Instant::now();
    let n = a.dim();
    check_dim("pcg rhs", n, b.len())?;
    let mut x = initial_guess(n, x0)?;
    let mut r = vec![T::zero(); n];
    residual(a, b, &x, &mut r);
    let mut mon = Monitor::new(b, &r, cfg.rel_tol);
    let mut report = SolveReport::default();
    if mon.initial_converged() {
        report.converged = true;
        report.residual_history = mon.history;
        report.wall_time = start.elapsed().as_secs_f64();
        return Ok((x, report));
    }
    let mut z = vec![T::zero(); n];
    m.apply(&r, &mut z)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let mut rtrue = vec![T::zero(); n];
    let mut it = 0;
    let mut converged = false;
    while it < cfg.max_iters {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::Indefinite("pcg: pᵀAp <= 0"));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        it += 1;
        residual(a, b, &x, &mut rtrue);
        if mon.record(&rtrue) {
            converged = true;
            break;
        }
        m.apply(&r, &mut z)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = *zi + beta * *pi;
        }
    }
    report.iterations = it;
    report.converged = converged;
    report.residual_history = mon.history;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((x, report))
}
