//! Experiment grid driver, report rendering and the oracle verification suite.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize};

use crate::amg::{build_hierarchy, AmgConfig};
use crate::error::{Error, Result};
use crate::fem::{assemble_operator, build_space, Form};
use crate::gamg::{
    build_augmented, contraction_factor_estimate, rate_identity_oracle, stationary_step, Engine, OracleRecord,
    TwoLevelConfig, TwoLevelPreconditioner,
};
use crate::krylov::{fgmres, random_vector, Preconditioner, SolverConfig, Method};
use crate::mesh::build_cube_mesh;
use crate::poisson::PoissonProblem;
use crate::sparse::{write_matrix_market, CsrMatrix};
use crate::stokes::{assemble_stokes, solve_cavity, unit_lid, BlockKind};
use crate::transfer::{build_prolongation, galerkin_coarse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Poisson,
    Stokes,
}

impl std::fmt::Display for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Problem::Poisson => "poisson",
            Problem::Stokes => "stokes",
        })
    }
}

impl std::str::FromStr for Problem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(Problem::Poisson),
            "stokes" => Ok(Problem::Stokes),
            _ => Err(Error::InvalidArgument(format!("unknown problem '{s}'"))),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D: Deserializer<'de>, T: Deserialize<'de>>(d: D) -> std::result::Result<Vec<T>, D::Error> {
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

fn default_tol() -> f64 {
    1e-6
}

fn default_max_iters() -> usize {
    500
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_kind() -> BlockKind {
    BlockKind::Qt
}

/// `k` and `engine` accept a single value or a list. `refinements` are cube
/// subdivision counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: Problem,
    #[serde(deserialize_with = "one_or_many")]
    pub k: Vec<u8>,
    pub refinements: Vec<usize>,
    pub theta_values: Vec<f64>,
    #[serde(deserialize_with = "one_or_many")]
    pub engine: Vec<Engine>,
    #[serde(default = "default_kind")]
    pub precond_kind: BlockKind,
    #[serde(default = "default_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn poisson(k: u8, n: usize, theta: f64, engine: Engine) -> Self {
        ExperimentConfig {
            problem: Problem::Poisson,
            k: vec![k],
            refinements: vec![n],
            theta_values: vec![theta],
            engine: vec![engine],
            precond_kind: BlockKind::Qt,
            rel_tol: default_tol(),
            max_iters: default_max_iters(),
            seed: 0,
            output_dir: default_out(),
        }
    }

    /// Orders 1..4, θ ∈ {0.2, 0.4, 0.6, 0.8}, both engines, n ∈ {2, 3}.
    pub fn default_grid() -> Self {
        ExperimentConfig {
            k: vec![1, 2, 3, 4],
            refinements: vec![2, 3],
            theta_values: vec![0.2, 0.4, 0.6, 0.8],
            engine: vec![Engine::Amg, Engine::Gamg],
            ..Self::poisson(1, 2, 0.25, Engine::Gamg)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::parse(Some(e.line()), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.theta_values.is_empty() {
            return bad("theta_values must not be empty");
        }
        if let Some(t) = self.theta_values.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::InvalidArgument(format!("theta {t} outside (0,1)")));
        }
        if self.refinements.is_empty() || self.refinements.contains(&0) {
            return bad("refinements must be a nonempty list of positive counts");
        }
        if self.k.is_empty() || self.k.iter().any(|k| !(1..=4).contains(k)) {
            return bad("orders must lie in 1..=4");
        }
        if self.problem == Problem::Stokes && self.k.contains(&1) {
            return bad("stokes needs velocity order >= 2");
        }
        if self.engine.is_empty() {
            return bad("engine list must not be empty");
        }
        if !(self.rel_tol > 0.0) {
            return bad("rel_tol must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub problem: Problem,
    pub k: u8,
    pub n: usize,
    pub n_dofs: usize,
    pub theta: f64,
    pub engine: Engine,
    pub iterations: usize,
    pub converged: bool,
    pub c_op: Option<f64>,
    pub setup_time: f64,
    pub solve_time: f64,
    pub levels: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    /// Copy with wall-clock columns zeroed; everything else is deterministic.
    pub fn without_timing(&self) -> Self {
        ExperimentReport {
            rows: self.rows.iter().map(|r| ReportRow { setup_time: 0.0, solve_time: 0.0, ..r.clone() }).collect(),
        }
    }
}

struct Outcome {
    n_dofs: usize,
    iterations: usize,
    converged: bool,
    c_op: Option<f64>,
    levels: usize,
    setup: f64,
    solve: f64,
}

fn poisson_point(cfg: &ExperimentConfig, k: u8, n: usize, theta: f64, engine: Engine) -> Result<Outcome> {
    let p = PoissonProblem::<f64>::homogeneous_cube(n, k)?;
    let a = &p.system.a;
    let start = Instant::now();
    // P1 has no auxiliary space, so both engines coincide there
    let (m, c_op, levels): (Box<dyn Preconditioner<f64>>, f64, usize) = match (engine, &p.transfer) {
        (Engine::Gamg, Some(t)) => {
            let g = TwoLevelPreconditioner::new(a.clone(), t.clone(), TwoLevelConfig::with_theta(theta))?;
            let (c, l) = (g.operator_complexity(), g.n_levels());
            (Box::new(g), c, l)
        }
        _ => {
            let h = build_hierarchy(a, &AmgConfig::with_theta(theta))?;
            let (c, l) = (h.operator_complexity(), h.n_levels());
            (Box::new(h), c, l)
        }
    };
    let setup = start.elapsed().as_secs_f64();
    let x0 = random_vector::<f64>(a.nrows(), cfg.seed);
    let b = vec![0.0; a.nrows()];
    let scfg = SolverConfig::new(Method::Fgmres, cfg.rel_tol).with_max_iters(cfg.max_iters);
    let (_, rep) = fgmres(a, m.as_ref(), &b, Some(&x0), &scfg)?;
    Ok(Outcome {
        n_dofs: a.nrows(),
        iterations: rep.iterations,
        converged: rep.converged,
        c_op: Some(c_op),
        levels,
        setup,
        solve: rep.wall_time,
    })
}

fn stokes_point(cfg: &ExperimentConfig, k: u8, n: usize, theta: f64, engine: Engine) -> Result<Outcome> {
    let sys = assemble_stokes::<f64>(Arc::new(build_cube_mesh(n)?), k, unit_lid)?;
    let sol = solve_cavity(&sys, cfg.precond_kind, engine, theta, cfg.rel_tol)?;
    Ok(Outcome {
        n_dofs: sys.dim(),
        iterations: sol.report.iterations,
        converged: sol.report.converged,
        c_op: None,
        levels: 0,
        setup: sol.setup_time,
        solve: sol.report.wall_time,
    })
}

/// Runs every grid point in order (k, n, engine, θ). Failures become rows with an error message.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &k in &cfg.k {
        for &n in &cfg.refinements {
            for &engine in &cfg.engine {
                for &theta in &cfg.theta_values {
                    let out = match cfg.problem {
                        Problem::Poisson => poisson_point(cfg, k, n, theta, engine),
                        Problem::Stokes => stokes_point(cfg, k, n, theta, engine),
                    };
                    let base = ReportRow {
                        problem: cfg.problem,
                        k,
                        n,
                        n_dofs: 0,
                        theta,
                        engine,
                        iterations: 0,
                        converged: false,
                        c_op: None,
                        setup_time: 0.0,
                        solve_time: 0.0,
                        levels: 0,
                        error: String::new(),
                    };
                    rows.push(match out {
                        Ok(o) => ReportRow {
                            n_dofs: o.n_dofs,
                            iterations: o.iterations,
                            converged: o.converged,
                            c_op: o.c_op,
                            setup_time: o.setup,
                            solve_time: o.solve,
                            levels: o.levels,
                            ..base
                        },
                        Err(e) => ReportRow { error: e.to_string(), ..base },
                    });
                }
            }
        }
    }
    Ok(ExperimentReport { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

pub const CSV_HEADER: &str = "problem,k,n,n_dofs,theta,engine,iterations,converged,c_op,setup_time,solve_time,levels,error";

pub fn emit_report(r: &ExperimentReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => emit_csv(r),
        ReportFormat::Markdown => emit_markdown(r),
    }
}

fn emit_csv(r: &ExperimentReport) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for row in &r.rows {
        w.serialize(row).expect("rows serialize");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf8 csv");
    format!("{CSV_HEADER}\n{body}")
}

pub fn parse_csv_report(text: &str) -> Result<ExperimentReport> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let rows = rd
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::parse(Some(i + 2), e.to_string())))
        .collect::<Result<Vec<ReportRow>>>()?;
    Ok(ExperimentReport { rows })
}

fn emit_markdown(r: &ExperimentReport) -> String {
    let mut groups: BTreeMap<(String, u8, String), Vec<&ReportRow>> = BTreeMap::new();
    for row in &r.rows {
        groups.entry((row.problem.to_string(), row.k, row.engine.to_string())).or_default().push(row);
    }
    let mut s = String::new();
    for ((problem, k, engine), rows) in groups {
        let mut thetas: Vec<f64> = rows.iter().map(|r| r.theta).collect();
        thetas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        thetas.dedup();
        let mut ns: Vec<(usize, usize)> = Vec::new();
        for r in &rows {
            if !ns.iter().any(|(n, _)| *n == r.n) {
                ns.push((r.n, r.n_dofs));
            }
        }
        let _ = writeln!(s, "### {problem} P{k}, {engine}\n");
        let _ = write!(s, "| n | #DOF |");
        for t in &thetas {
            let _ = write!(s, " θ={t} |");
        }
        let _ = write!(s, "\n|---|---|");
        for _ in &thetas {
            let _ = write!(s, "---|");
        }
        s.push('\n');
        for (n, dofs) in ns {
            let _ = write!(s, "| {n} | {dofs} |");
            for t in &thetas {
                let cell = rows.iter().find(|r| r.n == n && r.theta == *t).map(|r| {
                    if !r.error.is_empty() {
                        "error".to_string()
                    } else if !r.converged {
                        format!(">{}", r.iterations)
                    } else if let Some(c) = r.c_op {
                        format!("{} (C_op {c:.2})", r.iterations)
                    } else {
                        r.iterations.to_string()
                    }
                });
                let _ = write!(s, " {} |", cell.unwrap_or_default());
            }
            s.push('\n');
        }
        s.push('\n');
    }
    s
}

/// Writes `report.csv` and `report.md` into `dir`.
pub fn write_reports(r: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, fmt) in [("report.csv", ReportFormat::Csv), ("report.md", ReportFormat::Markdown)] {
        let p = dir.join(name);
        std::fs::write(&p, emit_report(r, fmt)).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

/// Runs the algebraic oracle suite. `seed` drives random vectors and mesh perturbations.
pub fn run_verification(seed: u64) -> Result<Vec<OracleRecord>> {
    let mut out = Vec::new();
    for n in [1usize, 2] {
        let mesh = Arc::new(build_cube_mesh(n)?);
        let p1 = build_space(&mesh, 1)?;
        let a1 = assemble_operator::<f64>(&p1, Form::Stiffness)?;
        for k in 2..=4u8 {
            let pk = build_space(&mesh, k)?;
            let ak = assemble_operator::<f64>(&pk, Form::Stiffness)?;
            let t = build_prolongation::<f64>(&pk, &p1)?;
            let d = galerkin_coarse(&ak, &t)?.max_relative_diff(&a1)?;
            out.push(OracleRecord::new(format!("galerkin n={n} k={k}"), d, 0.0, 1e-12));
        }
    }
    for k in [2u8, 3] {
        let mesh = build_cube_mesh(2)?.perturb_interior(0.2, seed)?;
        let p = PoissonProblem::<f64>::new(Arc::new(mesh), k, |_| 0.0, |_| 0.0)?;
        let (a, t) = (&p.system.a, p.transfer.as_ref().expect("k >= 2"));
        let m = TwoLevelPreconditioner::new(a.clone(), t.clone(), TwoLevelConfig::plain_exact())?;
        let s = build_augmented(a, t)?;
        let f = random_vector::<f64>(a.nrows(), seed.wrapping_add(1));
        let ft = s.augmented_rhs(&f)?;
        let mut u = random_vector::<f64>(a.nrows(), seed.wrapping_add(2));
        let mut v: Vec<f64> = vec![0.0; s.n_coarse()].into_iter().chain(u.iter().copied()).collect();
        let mut worst = 0.0f64;
        for _ in 0..10 {
            u = stationary_step(a, &m, &f, &u)?;
            v = s.gs_step(&v, &ft)?;
            let w = s.reconstruct(&v)?;
            worst = u.iter().zip(&w).fold(worst, |acc, (x, y)| acc.max((x - y).abs()));
        }
        out.push(OracleRecord::new(format!("block gs equivalence k={k}"), worst, 0.0, 1e-12));
        let ri = rate_identity_oracle(&s)?;
        out.push(OracleRecord::new(format!("rate identity k={k}"), ri.lhs, ri.rhs, 1e-8));
        let est = contraction_factor_estimate(&m, a, 200, seed)?;
        out.push(OracleRecord::new(format!("contraction vs identity k={k}"), est.value, ri.lhs.sqrt(), 1e-4));
    }
    Ok(out)
}

/// Matrix Market export of the P^k stiffness or the P1-to-P^k prolongation
/// over full DOF sets.
pub fn export_matrix(what: &str, k: u8, n: usize, path: &Path) -> Result<CsrMatrix<f64>> {
    let mesh = Arc::new(build_cube_mesh(n)?);
    let pk = build_space(&mesh, k)?;
    let m = match what {
        "matrix" => assemble_operator::<f64>(&pk, Form::Stiffness)?,
        "prolongation" => build_prolongation::<f64>(&pk, &build_space(&mesh, 1)?)?.prolongation().clone(),
        _ => return Err(Error::InvalidArgument(format!("unknown export target '{what}'"))),
    };
    write_matrix_market(&m, path)?;
    Ok(m)
}
