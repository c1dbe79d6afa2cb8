use hogamg::amg::{build_hierarchy, AmgConfig};
use hogamg::gamg::{TwoLevelConfig, TwoLevelPreconditioner};
use hogamg::krylov::{fgmres, minres, pcg, random_vector, Method, SolverConfig};
use hogamg::{PoissonProblem64, TwoLevelPreconditioner64};

fn relres(a: &hogamg::CsrMatrix64, b: &[f64], x: &[f64]) -> f64 {
    let ax = a.spmv(x).unwrap();
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    r / b.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn all_krylov_methods_agree_with_gamg() {
    let p = PoissonProblem64::homogeneous_cube(3, 3).unwrap();
    let a = &p.system.a;
    let b = random_vector::<f64>(a.nrows(), 4);
    let sym = TwoLevelPreconditioner64::new(a.clone(), p.transfer.clone().unwrap(), TwoLevelConfig::symmetric_exact()).unwrap();
    let (x1, r1) = pcg(a, &sym, &b, None, &SolverConfig::new(Method::Cg, 1e-10)).unwrap();
    let (x2, r2) = minres(a, &sym, &b, None, &SolverConfig::new(Method::Minres, 1e-10)).unwrap();
    let m = TwoLevelPreconditioner::new(a.clone(), p.transfer.clone().unwrap(), TwoLevelConfig::default()).unwrap();
    let (x3, r3) = fgmres(a, &m, &b, None, &SolverConfig::new(Method::Fgmres, 1e-10)).unwrap();
    for (x, r) in [(&x1, &r1), (&x2, &r2), (&x3, &r3)] {
        assert!(r.converged);
        // reported residual is the true one
        assert!((relres(a, &b, x) - r.final_residual()).abs() <= 1e-12);
        assert!(r.final_residual() <= 1e-10);
    }
    let d = x1.iter().zip(&x3).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    assert!(d <= 1e-8 * x1.iter().fold(0.0f64, |m, v| m.max(v.abs())));
}

#[test]
fn single_precision_pipeline() {
    let p = hogamg::poisson::PoissonProblem::<f32>::new(
        std::sync::Arc::new(hogamg::mesh::build_cube_mesh(3).unwrap()),
        2,
        |_| 1.0f32,
        |_| 0.0f32,
    )
    .unwrap();
    let a = &p.system.a;
    let h = build_hierarchy(a, &AmgConfig::default()).unwrap();
    let (x, r) = pcg(a, &h, &p.system.rhs, None, &SolverConfig::new(Method::Cg, 1e-5)).unwrap();
    assert!(r.converged, "{:?}", r.residual_history);
    // matches the f64 solution to single precision
    let p64 = hogamg::poisson::PoissonProblem::<f64>::new(
        std::sync::Arc::new(hogamg::mesh::build_cube_mesh(3).unwrap()),
        2,
        |_| 1.0,
        |_| 0.0,
    )
    .unwrap();
    let h64 = build_hierarchy(&p64.system.a, &AmgConfig::default()).unwrap();
    let (x64, _) = pcg(&p64.system.a, &h64, &p64.system.rhs, None, &SolverConfig::new(Method::Cg, 1e-12)).unwrap();
    let scale = x64.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(x.iter().zip(&x64).all(|(s, d)| (*s as f64 - d).abs() <= 1e-4 * scale));
}
