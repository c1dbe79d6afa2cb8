use std::time::Instant;

use super::{initial_guess, residual, LinearOperator, Monitor, Preconditioner, SolveReport, SolverConfig};
use crate::error::{check_dim, Result};
use crate::scalar::{axpy, dot, norm2, Real};

/// Right-preconditioned flexible GMRES with restarts. The preconditioner may
/// change between iterations; preconditioned directions are stored.
pub fn fgmres<T, A, M>(a: &A, m: &M, b: &[T], x0: Option<&[T]>, cfg: &SolverConfig) -> Result<(Vec<T>, SolveReport)>
where
    T: Real,
    A: LinearOperator<T> + ?Sized,
    M: Preconditioner<T> + ?Sized,
{
    arnoldi_solve(a, m, b, x0, cfg, true)
}

/// Right-preconditioned GMRES (fixed preconditioner, only the Krylov basis stored).
pub fn gmres<T, A, M>(a: &A, m: &M, b: &[T], x0: Option<&[T]>, cfg: &SolverConfig) -> Result<(Vec<T>, SolveReport)>
where
    T: Real,
    A: LinearOperator<T> + ?Sized,
    M: Preconditioner<T> + ?Sized,
{
    arnoldi_solve(a, m, b, x0, cfg, false)
}

fn arnoldi_solve<T, A, M>(
    a: &A,
    m: &M,
    b: &[T],
    x0: Option<&[T]>,
    cfg: &SolverConfig,
    flexible: bool,
) -> Result<(Vec<T>, SolveReport)>
where
    T: Real,
    A: LinearOperator<T> + ?Sized,
    M: Preconditioner<T> + ?Sized,
{
    cfg.validate()?;
    let start = Instant::now();
    let n = a.dim();
    check_dim("gmres rhs", n, b.len())?;
    let mut x = initial_guess(n, x0)?;
    let mut r = vec![T::zero(); n];
    residual(a, b, &x, &mut r);
    let mut mon = Monitor::new(b, &r, cfg.rel_tol);
    let mut report = SolveReport::default();
    let mut it = 0;
    let mut converged = mon.initial_converged();
    let restart = cfg.restart;

    let mut trial = vec![T::zero(); n];
    let mut rtrue = vec![T::zero(); n];
    let mut mz = vec![T::zero(); n];
    'outer: while !converged && it < cfg.max_iters {
        let beta = norm2(&r);
        if beta == T::zero() {
            converged = true;
            break;
        }
        let cycle_start_res = mon.last();
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(restart + 1);
        let mut dirs: Vec<Vec<T>> = Vec::with_capacity(if flexible { restart } else { 0 });
        basis.push(r.iter().map(|v| *v / beta).collect());
        // Hessenberg columns after Givens rotation (upper triangular part)
        let mut h: Vec<Vec<T>> = Vec::with_capacity(restart);
        let mut cs: Vec<T> = Vec::with_capacity(restart);
        let mut sn: Vec<T> = Vec::with_capacity(restart);
        let mut g = vec![beta];
        let mut y: Vec<T> = Vec::new();
        for j in 0..restart {
            let mut zj = vec![T::zero(); n];
            m.apply(&basis[j], &mut zj)?;
            let mut w = vec![T::zero(); n];
            a.apply(&zj, &mut w);
            if flexible {
                dirs.push(zj);
            }
            let mut col = Vec::with_capacity(j + 2);
            for vi in basis.iter() {
                let hij = dot(&w, vi);
                axpy(-hij, vi, &mut w);
                col.push(hij);
            }
            let hnext = norm2(&w);
            col.push(hnext);
            for i in 0..j {
                let (c, s) = (cs[i], sn[i]);
                let t = c * col[i] + s * col[i + 1];
                col[i + 1] = -s * col[i] + c * col[i + 1];
                col[i] = t;
            }
            let (c, s) = givens(col[j], col[j + 1]);
            col[j] = c * col[j] + s * col[j + 1];
            col[j + 1] = T::zero();
            cs.push(c);
            sn.push(s);
            g.push(-s * g[j]);
            g[j] = c * g[j];
            col.truncate(j + 1);
            h.push(col);
            it += 1;

            y = back_substitute(&h, &g[..=j]);
            form_update(&x, &y, &basis, &dirs, flexible, m, &mut trial, &mut mz)?;
            residual(a, b, &trial, &mut rtrue);
            if mon.record(&rtrue) {
                x.copy_from_slice(&trial);
                converged = true;
                break 'outer;
            }
            if hnext == T::zero() || it >= cfg.max_iters {
                break;
            }
            basis.push(w.iter().map(|v| *v / hnext).collect());
        }
        if y.is_empty() {
            break;
        }
        form_update(&x, &y, &basis, &dirs, flexible, m, &mut trial, &mut mz)?;
        x.copy_from_slice(&trial);
        residual(a, b, &x, &mut r);
        let end_res = mon.last();
        if cycle_start_res - end_res < 1e-14 * cycle_start_res {
            break;
        }
    }
    report.iterations = it;
    report.converged = converged;
    report.residual_history = mon.history;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((x, report))
}

fn givens<T: Real>(a: T, b: T) -> (T, T) {
    if b == T::zero() {
        (T::one(), T::zero())
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

fn back_substitute<T: Real>(h: &[Vec<T>], g: &[T]) -> Vec<T> {
    let k = g.len();
    let mut y = g.to_vec();
    for i in (0..k).rev() {
        let mut s = y[i];
        for j in (i + 1)..k {
            s -= h[j][i] * y[j];
        }
        y[i] = s / h[i][i];
    }
    y
}

#[allow(clippy::too_many_arguments)]
fn form_update<T: Real, M: Preconditioner<T> + ?Sized>(
    x: &[T],
    y: &[T],
    basis: &[Vec<T>],
    dirs: &[Vec<T>],
    flexible: bool,
    m: &M,
    out: &mut [T],
    scratch: &mut [T],
) -> Result<()> {
    out.copy_from_slice(x);
    if flexible {
        for (yi, zi) in y.iter().zip(dirs) {
            axpy(*yi, zi, out);
        }
    } else {
        let mut vy = vec![T::zero(); x.len()];
        for (yi, vi) in y.iter().zip(basis) {
            axpy(*yi, vi, &mut vy);
        }
        m.apply(&vy, scratch)?;
        axpy(T::one(), scratch, out);
    }
    Ok(())
}
