use std::time::Instant;

use super::{initial_guess, residual, LinearOperator, Monitor, Preconditioner, SolveReport, SolverConfig};
use crate::error::{check_dim, Error, Result};
use crate::scalar::{dot, Real};

/// Preconditioned MINRES for symmetric (possibly indefinite) `A` with an SPD
/// preconditioner `M`, in the Lanczos/Givens form of Paige and Saunders.
pub fn minres<T, A, M>(a: &A, m: &M, b: &[T], x0: Option<&[T]>, cfg: &SolverConfig) -> Result<(Vec<T>, SolveReport)>
where
    T: Real,
    A: LinearOperator<T> + ?Sized,
    M: Preconditioner<T> + ?Sized,
{
    cfg.validate()?;
    let start = Instant::now();
    let n = a.dim();
    check_dim("minres rhs", n, b.len())?;
    let mut x = initial_guess(n, x0)?;
    let mut v = vec![T::zero(); n];
    residual(a, b, &x, &mut v);
    let mut mon = Monitor::new(b, &v, cfg.rel_tol);
    let mut report = SolveReport::default();
    let finish = |mut report: SolveReport, mon: Monitor, it: usize, conv: bool| {
        report.iterations = it;
        report.converged = conv;
        report.residual_history = mon.history;
        report.wall_time = start.elapsed().as_secs_f64();
        report
    };
    let mut z = vec![T::zero(); n];
    m.apply(&v, &mut z)?;
    let vz = dot(&z, &v);
    if vz < T::zero() {
        return Err(Error::Indefinite("minres: preconditioner"));
    }
    let mut gamma = vz.sqrt();
    report.preconditioned_residuals.push(gamma.as_f64());
    if mon.initial_converged() || gamma == T::zero() {
        let conv = mon.initial_converged();
        return Ok((x, finish(report, mon, 0, conv)));
    }

    let mut v_old = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let mut w_old = vec![T::zero(); n];
    let mut az = vec![T::zero(); n];
    let mut rtrue = vec![T::zero(); n];
    let mut gamma_old = T::one();
    let mut eta = gamma;
    let (mut s_old, mut s) = (T::zero(), T::zero());
    let (mut c_old, mut c) = (T::one(), T::one());
    let mut it = 0;
    let mut converged = false;
    while it < cfg.max_iters {
        for zi in z.iter_mut() {
            *zi /= gamma;
        }
        a.apply(&z, &mut az);
        let delta = dot(&az, &z);
        let mut v_new = vec![T::zero(); n];
        for i in 0..n {
            v_new[i] = az[i] - (delta / gamma) * v[i] - (gamma / gamma_old) * v_old[i];
        }
        let mut z_new = vec![T::zero(); n];
        m.apply(&v_new, &mut z_new)?;
        let vz = dot(&z_new, &v_new);
        if vz < T::zero() {
            return Err(Error::Indefinite("minres: preconditioner"));
        }
        let gamma_new = vz.sqrt();
        let alpha0 = c * delta - c_old * s * gamma;
        let alpha1 = (alpha0 * alpha0 + gamma_new * gamma_new).sqrt();
        let alpha2 = s * delta + c_old * c * gamma;
        let alpha3 = s_old * gamma;
        if alpha1 == T::zero() {
            return Err(Error::Singular { pivot: it });
        }
        let c_new = alpha0 / alpha1;
        let s_new = gamma_new / alpha1;
        let mut w_new = vec![T::zero(); n];
        for i in 0..n {
            w_new[i] = (z[i] - alpha3 * w_old[i] - alpha2 * w[i]) / alpha1;
        }
        for i in 0..n {
            x[i] += c_new * eta * w_new[i];
        }
        eta = -s_new * eta;
        it += 1;
        report.preconditioned_residuals.push(eta.abs().as_f64());
        residual(a, b, &x, &mut rtrue);
        if mon.record(&rtrue) {
            converged = true;
            break;
        }
        if gamma_new == T::zero() {
            // invariant Krylov space exhausted; the iterate is as good as it gets
            break;
        }
        v_old = std::mem::replace(&mut v, v_new);
        z = z_new;
        w_old = std::mem::replace(&mut w, w_new);
        gamma_old = gamma;
        gamma = gamma_new;
        c_old = c;
        c = c_new;
        s_old = s;
        s = s_new;
    }
    Ok((x, finish(report, mon, it, converged)))
}
