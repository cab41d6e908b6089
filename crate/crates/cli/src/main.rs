//! `bctl` — run, verify and export experiments for the degenerate
//! reaction-diffusion control solver.
//!
//! Subcommands: `validate`, `evolve`, `eigen`, `synthesize` (each takes a
//! TOML config) and `verify <suite>`. Exit codes: 0 success, 2 task-level
//! soft failure (failed checks, tolerance not achieved), 1 hard error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use bctl_cli::config::ExperimentConfig;
use bctl_cli::report::{Check, VerificationReport};
use bctl_cli::{export, plan_io, verify};
use bctl_core::eigen::decompose;
use bctl_core::operator::OperatorMatrix;
use bctl_core::problem::validate_assumptions;
use bctl_core::solver::{self, SolverMode};
use bctl_core::spaces::trajectory_norms;
use bctl_core::synthesis::{synthesize, synthesize_signed, SynthesisOptions};
use bctl_core::Error as CoreError;

#[derive(Parser)]
#[command(name = "bctl", version, about = "Degenerate diffusion under multiplicative control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the standing assumptions of a problem config.
    Validate { config: PathBuf },
    /// Integrate the system and write the trajectory CSV plus a norms report.
    Evolve { config: PathBuf },
    /// Decompose the operator and write the eigenpair CSV.
    Eigen { config: PathBuf },
    /// Search for a three-stage control reaching the target.
    Synthesize { config: PathBuf },
    /// Run a verification suite.
    Verify {
        /// One of: spectrum, ground_state, embeddings, stability,
        /// gap_scaling, nonnegativity, controllability, picard.
        suite: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Report directory (defaults to ./out or $BCTL_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Validate { config } => cmd_validate(&config),
        Command::Evolve { config } => cmd_evolve(&config),
        Command::Eigen { config } => cmd_eigen(&config),
        Command::Synthesize { config } => cmd_synthesize(&config),
        Command::Verify {
            suite,
            jobs,
            seed,
            out,
        } => cmd_verify(&suite, seed, jobs, out),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn cmd_validate(path: &Path) -> Result<ExitCode> {
    let cfg = ExperimentConfig::load(path)?;
    let spec = cfg.problem_spec()?;
    let report = validate_assumptions(&spec)?;
    let dir = cfg.output_dir();
    ensure_dir(&dir)?;

    let mut vr = VerificationReport::new("assumptions", provenance(path)?);
    for c in &report.checks {
        vr.push(Check::flag(c.id, c.passed));
    }
    let degeneracy = match report.degeneracy {
        bctl_core::Degeneracy::Strong => "strong",
        bctl_core::Degeneracy::Weak => "weak",
    };
    let text = format!(
        "{vr}q_theta = {}\ndegeneracy = {degeneracy}\nxi_lq = {}\n",
        report.q_theta,
        report
            .xi_lq
            .map(|v| v.to_string())
            .unwrap_or_else(|| "divergent".into()),
    );
    std::fs::write(dir.join("assumptions.txt"), &text)?;
    print!("{text}");
    for c in &report.checks {
        if !c.passed {
            eprintln!("assumption {} failed: {}", c.id, c.detail);
        }
    }
    Ok(soft_exit(report.all_passed()))
}

fn cmd_evolve(path: &Path) -> Result<ExitCode> {
    let cfg = ExperimentConfig::load(path)?;
    let spec = cfg.problem_spec()?;
    let scfg = cfg.solver_config()?;
    let horizon = cfg.task.horizon.expect("validated");
    warn_on_failed_assumptions(&spec)?;

    let traj = match scfg.mode {
        SolverMode::Imex => solver::evolve(&spec, horizon, &scfg)?,
        SolverMode::Spectral => {
            if !spec.f().is_zero() {
                anyhow::bail!("spectral mode integrates the linear system; set problem.f.kind = \"none\"");
            }
            solver::evolve_linear(spec.a(), spec.control(), spec.u0(), horizon, &scfg)?
        }
        SolverMode::Picard => {
            let (traj, report) = solver::evolve_picard(&spec, horizon, &scfg)?;
            if let Some(r) = report.worst_contraction_ratio() {
                println!("picard contraction ratio {r}");
            }
            traj
        }
    };
    let dir = cfg.output_dir();
    ensure_dir(&dir)?;
    export::write_trajectory(&dir.join("trajectory.csv"), &traj)?;
    let norms = trajectory_norms(&traj, spec.a()).map_err(|e| anyhow::anyhow!(e.to_string()))?;
    std::fs::write(dir.join("norms.txt"), export::norms_report(&norms))?;
    println!(
        "wrote {} stamps to {}; b_norm = {}",
        traj.len(),
        dir.join("trajectory.csv").display(),
        norms.b_norm
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_eigen(path: &Path) -> Result<ExitCode> {
    let cfg = ExperimentConfig::load(path)?;
    let grid = cfg.grid()?;
    let a = cfg.coefficient(grid)?;
    // The eigen task decomposes A₀ + αI with α the first control profile
    // (zero when no control section is given).
    let control = cfg.control(grid)?;
    let alpha = &control.profiles()[0];
    let matrix = OperatorMatrix::assemble(&a, Some(alpha), grid);
    let basis = decompose(&matrix).map_err(|e| anyhow::anyhow!(e.to_string()))?;
    let dir = cfg.output_dir();
    ensure_dir(&dir)?;
    export::write_eigen(&dir.join("eigen.csv"), &basis, cfg.task.modes)?;
    println!(
        "wrote {} eigenpairs to {}",
        if cfg.task.modes == 0 { basis.len() } else { cfg.task.modes.min(basis.len()) },
        dir.join("eigen.csv").display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_synthesize(path: &Path) -> Result<ExitCode> {
    let cfg = ExperimentConfig::load(path)?;
    let grid = cfg.grid()?;
    let a = cfg.coefficient(grid)?;
    let f = cfg.reaction()?;
    let u0 = cfg.initial_state(grid)?;
    let target_spec = cfg.task.target.as_ref().expect("validated");
    let u_d = cfg.field(target_spec, grid, "task.target")?;
    let eps = match (cfg.task.eps, cfg.task.eps_rel) {
        (Some(e), _) => e,
        (None, Some(r)) => r * u_d.norm_l2(),
        (None, None) => unreachable!("validated"),
    };
    let mut opts = SynthesisOptions {
        eta: cfg.task.eta,
        solver: cfg.solver_config()?,
        ..Default::default()
    };
    if let Some(s0) = cfg.task.s0 {
        opts.s0 = s0;
    }
    if let Some(j_max) = cfg.task.j_max {
        opts.j_max = j_max;
    }

    let result = if cfg.task.signed {
        synthesize_signed(&a, &f, &u0, &u_d, eps, &opts)
    } else {
        synthesize(&a, &f, &u0, &u_d, eps, &opts)
    };
    let dir = cfg.output_dir();
    ensure_dir(&dir)?;
    match result {
        Ok(plan) => {
            plan_io::write_plan(&dir.join("plan.txt"), &plan)?;
            println!(
                "plan accepted at iteration {} (s = {}): error {} <= eps {}; wrote {}",
                plan.accepted_iteration,
                plan.s,
                plan.achieved_error,
                eps,
                dir.join("plan.txt").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(CoreError::ToleranceNotAchieved {
            eps,
            tried,
            best_error,
            diagnostics,
        }) => {
            eprintln!(
                "tolerance {eps} not achieved after {tried} candidates; best error {best_error}"
            );
            for c in &diagnostics.candidates {
                eprintln!(
                    "  j={} s={} delta_s/s={} err={:?} outcome={}",
                    c.j,
                    c.s,
                    c.delta_s_ratio,
                    c.error,
                    c.outcome.as_str()
                );
            }
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(anyhow::anyhow!(e.to_string())),
    }
}

fn cmd_verify(suite: &str, seed: u64, jobs: usize, out: Option<PathBuf>) -> Result<ExitCode> {
    let report = verify::run_suite(suite, seed, jobs)?;
    let dir = out.unwrap_or_else(|| {
        std::env::var("BCTL_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|_| PathBuf::from("out"))
    });
    ensure_dir(&dir)?;
    std::fs::write(dir.join(format!("{suite}.txt")), format!("{report}"))?;
    print!("{report}");
    Ok(soft_exit(report.pass()))
}

fn warn_on_failed_assumptions(spec: &bctl_core::ProblemSpec) -> Result<()> {
    let report = validate_assumptions(spec).map_err(|e| anyhow::anyhow!(e.to_string()))?;
    for c in &report.checks {
        if !c.passed {
            eprintln!("warning: assumption {} not satisfied: {}", c.id, c.detail);
        }
    }
    Ok(())
}

fn provenance(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path)?;
    Ok(format!("config={:016x}", ExperimentConfig::content_hash(&text)))
}

fn soft_exit(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
