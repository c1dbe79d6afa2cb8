//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero if any fails.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use hogamg::amg::{build_hierarchy, AmgConfig};
use hogamg::fem::{assemble_operator, build_space, l2_error, Form};
use hogamg::gamg::{
    build_augmented, rate_identity_oracle, stationary_step, Engine, TwoLevelConfig, TwoLevelPreconditioner,
};
use hogamg::harness::{run_experiment, ExperimentConfig, ExperimentReport};
use hogamg::krylov::{
    fgmres, minres, pcg, random_vector, FnPreconditioner, IdentityPreconditioner, Method, SolverConfig,
};
use hogamg::mesh::{build_cube_mesh, TetMesh};
use hogamg::poisson::PoissonProblem;
use hogamg::sparse::{CsrMatrix, DenseMatrix};
use hogamg::stokes::{assemble_stokes, solve_cavity, unit_lid, BlockKind};
use hogamg::transfer::{build_prolongation, galerkin_coarse};
use hogamg::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn spread(v: &[usize]) -> usize {
    v.iter().max().unwrap_or(&0) - v.iter().min().unwrap_or(&0)
}

fn problem(mesh: TetMesh, k: u8) -> Result<PoissonProblem<f64>> {
    PoissonProblem::new(Arc::new(mesh), k, |_| 0.0, |_| 0.0)
}

fn galerkin() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for n in [1usize, 2] {
        let mesh = Arc::new(build_cube_mesh(n)?);
        let p1 = build_space(&mesh, 1)?;
        let a1 = assemble_operator::<f64>(&p1, Form::Stiffness)?;
        for k in 2..=4u8 {
            let pk = build_space(&mesh, k)?;
            let ak = assemble_operator::<f64>(&pk, Form::Stiffness)?;
            let t = build_prolongation::<f64>(&pk, &p1)?;
            worst = worst.max(galerkin_coarse(&ak, &t)?.max_relative_diff(&a1)?);
        }
    }
    outcome(worst <= 1e-12, format!("max rel diff {worst:.2e} (tol 1e-12)"))
}

fn equivalence_on(p: &PoissonProblem<f64>, seed: u64) -> Result<f64> {
    let a = &p.system.a;
    let t = p.transfer.as_ref().expect("order >= 2");
    let m = TwoLevelPreconditioner::new(a.clone(), t.clone(), TwoLevelConfig::plain_exact())?;
    let s = build_augmented(a, t)?;
    let f = random_vector::<f64>(a.nrows(), seed);
    let ft = s.augmented_rhs(&f)?;
    let mut u = random_vector::<f64>(a.nrows(), seed + 1);
    let mut v: Vec<f64> = vec![0.0; s.n_coarse()].into_iter().chain(u.iter().copied()).collect();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        u = stationary_step(a, &m, &f, &u)?;
        v = s.gs_step(&v, &ft)?;
        let w = s.reconstruct(&v)?;
        worst = u.iter().zip(&w).fold(worst, |acc, (x, y)| acc.max((x - y).abs()));
    }
    Ok(worst)
}

fn equivalence() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for k in [2u8, 3] {
        worst = worst.max(equivalence_on(&problem(build_cube_mesh(1)?, k)?, 10 + k as u64)?);
        worst = worst.max(equivalence_on(&problem(build_cube_mesh(2)?.perturb_interior(0.2, 4)?, k)?, 20)?);
        cases += 2;
    }
    outcome(worst <= 1e-12, format!("{cases} cases, max abs diff {worst:.2e} (tol 1e-12)"))
}

fn rate_identity() -> Result<Outcome> {
    let refined = || build_cube_mesh(1)?.refine_uniform();
    let mut meshes: Vec<(String, TetMesh)> = vec![("n=1".into(), build_cube_mesh(1)?), ("n=1 refined".into(), refined()?)];
    for seed in 1..=3u64 {
        meshes.push((format!("n=1 refined perturbed s{seed}"), refined()?.perturb_interior(0.25, seed)?));
    }
    meshes.push(("n=2 perturbed".into(), build_cube_mesh(2)?.perturb_interior(0.2, 9)?));
    let (mut count, mut worst, mut max_lhs, mut max_dim) = (0usize, 0.0f64, 0.0f64, 0usize);
    let mut ok = true;
    for (name, mesh) in &meshes {
        for k in [2u8, 3] {
            let p = problem(mesh.clone(), k)?;
            let s = build_augmented(&p.system.a, p.transfer.as_ref().expect("order >= 2"))?;
            let ri = rate_identity_oracle(&s)?;
            let good = ri.abs_diff() <= 1e-8 && ri.lhs < 1.0 && s.dim() <= 500;
            if !good {
                println!("    {name} k={k}: lhs {} rhs {} dim {}", ri.lhs, ri.rhs, s.dim());
            }
            ok &= good;
            count += 1;
            worst = worst.max(ri.abs_diff());
            max_lhs = max_lhs.max(ri.lhs);
            max_dim = max_dim.max(s.dim());
        }
    }
    outcome(
        ok && count >= 10,
        format!("{count} instances, max |lhs-rhs| {worst:.2e} (tol 1e-8), max lhs {max_lhs:.4}, max dim {max_dim}"),
    )
}

fn grid(ks: &[u8], ns: &[usize], thetas: &[f64], engines: &[Engine]) -> Result<ExperimentReport> {
    let cfg = ExperimentConfig {
        k: ks.to_vec(),
        refinements: ns.to_vec(),
        theta_values: thetas.to_vec(),
        engine: engines.to_vec(),
        ..ExperimentConfig::poisson(2, 2, 0.25, Engine::Gamg)
    };
    let r = run_experiment(&cfg)?;
    for row in &r.rows {
        if !row.error.is_empty() {
            return Err(hogamg::Error::InvalidArgument(row.error.clone()));
        }
    }
    Ok(r)
}

fn uniform_convergence() -> Result<Outcome> {
    let r = grid(&[2, 3, 4], &[2, 3, 4], &[0.25], &[Engine::Gamg])?;
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [2u8, 3, 4] {
        let its: Vec<usize> = r.rows.iter().filter(|x| x.k == k).map(|x| x.iterations).collect();
        let conv = r.rows.iter().filter(|x| x.k == k).all(|x| x.converged);
        ok &= conv && spread(&its) <= 3 && its.iter().all(|&i| i <= 40);
        parts.push(format!("k={k} {its:?}"));
    }
    outcome(ok, format!("iterations over n=2,3,4: {} (spread <= 3, max 40)", parts.join(", ")))
}

fn theta_robustness() -> Result<Outcome> {
    let thetas = [0.2, 0.4, 0.6, 0.8];
    let r = grid(&[2, 3, 4], &[4], &thetas, &[Engine::Amg, Engine::Gamg])?;
    let its = |k: u8, e: Engine| -> Vec<usize> {
        r.rows.iter().filter(|x| x.k == k && x.engine == e).map(|x| x.iterations).collect()
    };
    let mut ok = r.rows.iter().all(|x| x.converged);
    let mut parts = Vec::new();
    for k in [2u8, 3, 4] {
        let g = its(k, Engine::Gamg);
        ok &= spread(&g) <= 2;
        parts.push(format!("gamg k={k} {g:?}"));
    }
    let amg4 = its(4, Engine::Amg);
    ok &= spread(&amg4) >= spread(&its(4, Engine::Gamg));
    outcome(ok, format!("n=4: {}, amg k=4 {amg4:?} spread {}", parts.join(", "), spread(&amg4)))
}

fn operator_complexity() -> Result<Outcome> {
    let r = grid(&[2, 3, 4], &[4], &[0.25], &[Engine::Amg, Engine::Gamg])?;
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [2u8, 3, 4] {
        let c = |e: Engine| r.rows.iter().find(|x| x.k == k && x.engine == e).and_then(|x| x.c_op).unwrap_or(f64::NAN);
        let (amg, gamg) = (c(Engine::Amg), c(Engine::Gamg));
        ok &= gamg < amg && (k == 2 || gamg <= 1.2);
        parts.push(format!("k={k} gamg {gamg:.3} amg {amg:.3}"));
    }
    outcome(ok, format!("n=4 theta=0.25: {}", parts.join(", ")))
}

fn fem_convergence() -> Result<Outcome> {
    let u = |p: [f64; 3]| (PI * p[0]).sin() * (PI * p[1]).sin() * (PI * p[2]).sin();
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [1u8, 2] {
        let mut errs = Vec::new();
        for n in [4usize, 8, 16] {
            let p = PoissonProblem::<f64>::new(Arc::new(build_cube_mesh(n)?), k, |x| 3.0 * PI * PI * u(x), |_| 0.0)?;
            let h = build_hierarchy(&p.system.a, &AmgConfig::default())?;
            let (x, rep) = pcg(&p.system.a, &h, &p.system.rhs, None, &SolverConfig::new(Method::Cg, 1e-12))?;
            ok &= rep.converged;
            errs.push(l2_error(&p.fine, &p.full_solution(&x)?, u)?);
        }
        let rates: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        ok &= rates.iter().all(|r| (r - (k as f64 + 1.0)).abs() <= 0.3);
        parts.push(format!("k={k} rates {:.2}/{:.2}", rates[0], rates[1]));
    }
    outcome(ok, format!("n=4,8,16: {} (target k+1 +- 0.3)", parts.join(", ")))
}

fn stokes() -> Result<Outcome> {
    let mut its = Vec::new();
    let mut rel = f64::NAN;
    let mut conv = true;
    for n in [2usize, 3] {
        let s = assemble_stokes::<f64>(Arc::new(build_cube_mesh(n)?), 2, unit_lid)?;
        let sol = solve_cavity(&s, BlockKind::Qt, Engine::Gamg, 0.25, 1e-8)?;
        conv &= sol.report.converged;
        its.push(sol.report.iterations);
        if n == 2 {
            let dense = s.dense_pinned_solve()?;
            let d: Vec<f64> = sol.x.iter().zip(&dense).map(|(a, b)| a - b).collect();
            rel = norm2(&d) / norm2(&dense);
        }
    }
    // growth <= 20% in integers: 5 * it(3) <= 6 * it(2)
    let ok = conv && 5 * its[1] <= 6 * its[0] && rel <= 1e-6;
    outcome(ok, format!("iterations n=2 {} n=3 {} (growth <= 20%), dense rel diff {rel:.2e} (tol 1e-6)", its[0], its[1]))
}

fn solver_contracts() -> Result<Outcome> {
    let a = CsrMatrix::from_dense(&DenseMatrix::from_rows(&[
        vec![4.0, 1.0, 0.0],
        vec![2.0, 5.0, 1.0],
        vec![0.0, 1.0, 3.0],
    ])?);
    let lu = a.to_dense().lu()?;
    let exact = FnPreconditioner(|r: &[f64], z: &mut [f64]| {
        z.copy_from_slice(&lu.solve(r)?);
        Ok(())
    });
    let (_, r1) = fgmres(&a, &exact, &[1.0, 2.0, 3.0], None, &SolverConfig::new(Method::Fgmres, 1e-10))?;
    let swap = CsrMatrix::<f64>::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)])?;
    let (x2, r2) = minres(&swap, &IdentityPreconditioner, &[1.0, 0.0], None, &SolverConfig::new(Method::Minres, 1e-10))?;
    let diag = CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
    let (_, r3) = pcg(&diag, &IdentityPreconditioner, &[1.0, 1.0, 1.0], None, &SolverConfig::new(Method::Cg, 1e-10))?;
    let x2_ok = (x2[0]).abs() <= 1e-10 && (x2[1] - 1.0).abs() <= 1e-10;
    let ok = r1.converged && r1.iterations == 1 && r2.converged && r2.iterations <= 2 && x2_ok && r3.converged && r3.iterations <= 3;
    outcome(ok, format!("fgmres {} it, minres {} it, pcg {} it", r1.iterations, r2.iterations, r3.iterations))
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>, Duration); 9] = [
        ("galerkin consistency", galerkin, Duration::from_secs(5)),
        ("block gs equivalence", equivalence, Duration::from_secs(5)),
        ("rate identity", rate_identity, Duration::from_secs(60)),
        ("uniform convergence", uniform_convergence, Duration::from_secs(300)),
        ("theta robustness", theta_robustness, Duration::from_secs(300)),
        ("operator complexity", operator_complexity, Duration::from_secs(120)),
        ("fem convergence", fem_convergence, Duration::from_secs(180)),
        ("stokes cavity", stokes, Duration::from_secs(300)),
        ("solver contracts", solver_contracts, Duration::from_secs(1)),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = run();
        let dt = t.elapsed();
        let (pass, detail) = match res {
            Ok(o) => (o.pass && dt <= *budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {}: {} {name}: {detail} [{:.2}s / {}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            dt.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
