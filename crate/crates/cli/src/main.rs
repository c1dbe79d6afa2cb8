use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hogamg::gamg::Engine;
use hogamg::harness::{emit_report, export_matrix, run_experiment, run_verification, write_reports, ExperimentConfig, Problem, ReportFormat};
use hogamg::stokes::BlockKind;

#[derive(Parser)]
#[command(name = "hogamg", version, about = "Auxiliary-space multigrid experiments for P^k Poisson and Stokes problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write report.csv and report.md.
    Solve(SolveArgs),
    /// Run the oracle suite and write verify.json.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Write a Matrix Market file of the P^k stiffness or the P1-to-P^k prolongation.
    Export {
        #[arg(long, value_parser = ["matrix", "prolongation"])]
        what: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: u8,
        #[arg(long, default_value_t = 2)]
        refine: usize,
    },
}

#[derive(Args)]
struct SolveArgs {
    /// JSON experiment config. Without it the default grid is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<Problem>,
    #[arg(long, value_delimiter = ',')]
    k: Vec<u8>,
    #[arg(long, value_delimiter = ',')]
    refine: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    theta: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    engine: Vec<Engine>,
    /// Stokes block preconditioner (qt or qd).
    #[arg(long)]
    kind: Option<BlockKind>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run the oracle suite instead of the grid.
    #[arg(long)]
    verify: bool,
}

fn load_config(a: &SolveArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default_grid(),
    };
    if let Some(p) = a.problem {
        cfg.problem = p;
        if p == Problem::Stokes && a.k.is_empty() {
            cfg.k.retain(|&k| k >= 2);
        }
    }
    if !a.k.is_empty() {
        cfg.k = a.k.clone();
    }
    if !a.refine.is_empty() {
        cfg.refinements = a.refine.clone();
    }
    if !a.theta.is_empty() {
        cfg.theta_values = a.theta.clone();
    }
    if !a.engine.is_empty() {
        cfg.engine = a.engine.clone();
    }
    if let Some(k) = a.kind {
        cfg.precond_kind = k;
    }
    if let Some(t) = a.tol {
        cfg.rel_tol = t;
    }
    if let Some(m) = a.max_iters {
        cfg.max_iters = m;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(o) = &a.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn verify(seed: u64, out: &PathBuf) -> Result<()> {
    let records = run_verification(seed)?;
    for r in &records {
        println!("{} {}: lhs {:e} rhs {:e} diff {:e} tol {:e}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.lhs, r.rhs, r.abs_diff, r.tol);
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("verify.json");
    std::fs::write(&path, serde_json::to_string_pretty(&records)?).with_context(|| format!("writing {}", path.display()))?;
    let failed = records.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        bail!("{failed} of {} oracle checks failed", records.len());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve(a) => {
            let cfg = load_config(&a)?;
            if a.verify {
                return verify(cfg.seed, &cfg.output_dir);
            }
            let report = run_experiment(&cfg)?;
            write_reports(&report, &cfg.output_dir)?;
            print!("{}", emit_report(&report, ReportFormat::Markdown));
            for row in report.rows.iter().filter(|r| !r.error.is_empty()) {
                eprintln!("failed: {} k={} n={} theta={} {}: {}", row.problem, row.k, row.n, row.theta, row.engine, row.error);
            }
        }
        Command::Verify { seed, out } => verify(seed, &out)?,
        Command::Export { what, out, k, refine } => {
            let m = export_matrix(&what, k, refine, &out)?;
            println!("wrote {} ({}x{}, {} nonzeros)", out.display(), m.nrows(), m.ncols(), m.nnz());
        }
    }
    Ok(())
}
