//! Experiment configuration: one TOML file describes the problem, the
//! solver, the task and the outputs.
//!
//! ```toml
//! [problem]
//! n_cells = 256
//! a = "legendre"                  # or "power:2", or { table = [...] }
//! u0 = "1 + cos(pi*x)"            # or { table = [...] }
//!
//! [problem.f]
//! kind = "model"                  # "none" | "model" | "expr"
//! theta = 2.0
//! c = 0.0
//!
//! [control]                       # optional; zero control by default
//! breakpoints = [0.0, 0.4, 1.0]
//! profiles = ["-1.0", "2*x"]
//!
//! [solver]
//! mode = "imex"                   # imex | spectral | picard
//! dt = 1e-3
//!
//! [task]
//! kind = "evolve"                 # evolve | eigen | synthesize
//! horizon = 1.0
//!
//! [output]
//! dir = "out"
//!
//! [sweep]
//! seed = 42
//! ```

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use bctl_core::solver::{SolverConfig, SolverMode};
use bctl_core::{
    DiffusionCoefficient, Field, Grid, Nonlinearity, PiecewiseStaticControl, ProblemSpec,
};

use crate::expr;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub control: Option<ControlSection>,
    #[serde(default)]
    pub solver: SolverSection,
    pub task: TaskSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub n_cells: usize,
    pub a: CoeffSpec,
    pub u0: FieldSpec,
    #[serde(default)]
    pub f: ReactionSection,
}

/// Coefficient by name or by face-value table.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum CoeffSpec {
    Name(String),
    Table { table: Vec<f64> },
}

/// Field by expression in x or by cell-value table.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Expr(String),
    Table { table: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionSection {
    #[serde(default = "default_reaction_kind")]
    pub kind: String,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Coefficient of the built-in model reaction.
    #[serde(default)]
    pub c: f64,
    /// Expression in (t, x, u) for kind = "expr".
    #[serde(default)]
    pub expr: Option<String>,
    #[serde(default)]
    pub gamma0: Option<f64>,
    #[serde(default)]
    pub nu: Option<f64>,
}

fn default_reaction_kind() -> String {
    "none".into()
}

fn default_theta() -> f64 {
    2.0
}

impl Default for ReactionSection {
    fn default() -> Self {
        Self {
            kind: default_reaction_kind(),
            theta: default_theta(),
            c: 0.0,
            expr: None,
            gamma0: None,
            nu: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    /// Full breakpoint list 0 = t0 < … < tn = T.
    #[serde(default)]
    pub breakpoints: Option<Vec<f64>>,
    /// One profile per segment (expression or table).
    #[serde(default)]
    pub profiles: Option<Vec<FieldSpec>>,
    /// Replay a synthesis plan file instead.
    #[serde(default)]
    pub plan: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct SolverSection {
    pub mode: String,
    pub dt: f64,
    pub stride: usize,
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    pub rel_amp_tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            mode: "imex".into(),
            dt: d.dt,
            stride: d.stride,
            picard_tol: d.picard_tol,
            picard_max_iters: d.picard_max_iters,
            rel_amp_tol: d.rel_amp_tol,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub kind: String,
    /// Horizon for evolve.
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Absolute tolerance for synthesize…
    #[serde(default)]
    pub eps: Option<f64>,
    /// …or relative to ‖target‖.
    #[serde(default)]
    pub eps_rel: Option<f64>,
    #[serde(default)]
    pub target: Option<FieldSpec>,
    /// Accept sign-changing initial states (the positive-product variant).
    #[serde(default)]
    pub signed: bool,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub s0: Option<f64>,
    #[serde(default)]
    pub j_max: Option<usize>,
    /// How many eigenpairs the eigen task writes (0 = all).
    #[serde(default)]
    pub modes: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct SweepSection {
    pub seed: u64,
    pub jobs: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { seed: 42, jobs: 1 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.problem.n_cells < 8 {
            bail!("problem.n_cells must be at least 8, got {}", self.problem.n_cells);
        }
        match self.task.kind.as_str() {
            "evolve" => {
                if self.task.horizon.is_none() {
                    bail!("task.horizon is required for kind = \"evolve\"");
                }
            }
            "eigen" | "validate" => {}
            "synthesize" => {
                if self.task.target.is_none() {
                    bail!("task.target is required for kind = \"synthesize\"");
                }
                if self.task.eps.is_none() && self.task.eps_rel.is_none() {
                    bail!("task.eps or task.eps_rel is required for kind = \"synthesize\"");
                }
            }
            other => bail!(
                "unknown task.kind \"{other}\" (expected validate, evolve, eigen or synthesize)"
            ),
        }
        if !(self.solver.dt > 0.0) {
            bail!("solver.dt must be positive");
        }
        if !["imex", "spectral", "picard"].contains(&self.solver.mode.as_str()) {
            bail!("unknown solver.mode \"{}\"", self.solver.mode);
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.problem.n_cells).map_err(|e| anyhow!(e.to_string()))
    }

    pub fn coefficient(&self, grid: Grid) -> Result<DiffusionCoefficient> {
        match &self.problem.a {
            CoeffSpec::Name(name) => coefficient_by_name(name, grid),
            CoeffSpec::Table { table } => {
                DiffusionCoefficient::from_face_table(grid, table.clone())
                    .map_err(|e| anyhow!("problem.a: {e}"))
            }
        }
    }

    pub fn field(&self, spec: &FieldSpec, grid: Grid, what: &str) -> Result<Field> {
        match spec {
            FieldSpec::Expr(src) => {
                let e = expr::parse_x(src).with_context(|| format!("{what} expression"))?;
                Ok(Field::from_fn(grid, |x| e.eval(&[x])))
            }
            FieldSpec::Table { table } => Field::new(grid, table.clone())
                .map_err(|e| anyhow!("{what} table: {e}")),
        }
    }

    pub fn initial_state(&self, grid: Grid) -> Result<Field> {
        self.field(&self.problem.u0, grid, "problem.u0")
    }

    pub fn reaction(&self) -> Result<Nonlinearity> {
        let r = &self.problem.f;
        match r.kind.as_str() {
            "none" => Nonlinearity::zero(r.theta).map_err(|e| anyhow!("problem.f: {e}")),
            "model" => {
                let mut f =
                    Nonlinearity::model(r.theta, r.c).map_err(|e| anyhow!("problem.f: {e}"))?;
                // Optional constant overrides.
                if r.gamma0.is_some() || r.nu.is_some() {
                    let (theta, c) = (r.theta, r.c);
                    let gamma0 = r.gamma0.unwrap_or(f.gamma0());
                    let nu = r.nu.unwrap_or(f.nu());
                    f = Nonlinearity::new(
                        format!("model:{theta}:{c}"),
                        move |t, x, u| Nonlinearity::model(theta, c).unwrap().eval(t, x, u),
                        gamma0,
                        theta,
                        nu,
                    )
                    .map_err(|e| anyhow!("problem.f: {e}"))?;
                }
                Ok(f)
            }
            "expr" => {
                let src = r
                    .expr
                    .as_ref()
                    .ok_or_else(|| anyhow!("problem.f.expr is required for kind = \"expr\""))?;
                let gamma0 = r
                    .gamma0
                    .ok_or_else(|| anyhow!("problem.f.gamma0 is required for kind = \"expr\""))?;
                let nu = r
                    .nu
                    .ok_or_else(|| anyhow!("problem.f.nu is required for kind = \"expr\""))?;
                let e = expr::parse(src, &["t", "x", "u"]).context("problem.f.expr")?;
                Nonlinearity::new(
                    format!("expr:{src}"),
                    move |t, x, u| e.eval(&[t, x, u]),
                    gamma0,
                    r.theta,
                    nu,
                )
                .map_err(|e| anyhow!("problem.f: {e}"))
            }
            other => bail!("unknown problem.f.kind \"{other}\""),
        }
    }

    /// Build the control: an explicit breakpoints/profiles pair, a replayed
    /// plan file, or the zero control over the task horizon.
    pub fn control(&self, grid: Grid) -> Result<PiecewiseStaticControl> {
        let horizon = self.task.horizon.unwrap_or(1.0);
        let Some(section) = &self.control else {
            return PiecewiseStaticControl::zero(grid, horizon).map_err(|e| anyhow!(e.to_string()));
        };
        if let Some(plan_path) = &section.plan {
            let (_, control) = crate::plan_io::read_plan(plan_path)?;
            if control.grid() != grid {
                bail!(
                    "control.plan grid ({} cells) does not match problem.n_cells ({})",
                    control.grid().n_cells(),
                    grid.n_cells()
                );
            }
            return Ok(control);
        }
        let breakpoints = section
            .breakpoints
            .clone()
            .ok_or_else(|| anyhow!("control.breakpoints missing (or use control.plan)"))?;
        let specs = section
            .profiles
            .as_ref()
            .ok_or_else(|| anyhow!("control.profiles missing (or use control.plan)"))?;
        let mut profiles = Vec::with_capacity(specs.len());
        for (i, s) in specs.iter().enumerate() {
            profiles.push(self.field(s, grid, &format!("control.profiles[{i}]"))?);
        }
        PiecewiseStaticControl::new(breakpoints, profiles).map_err(|e| anyhow!("control: {e}"))
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let grid = self.grid()?;
        ProblemSpec::new(
            grid,
            self.coefficient(grid)?,
            self.reaction()?,
            self.initial_state(grid)?,
            self.control(grid)?,
        )
        .map_err(|e| anyhow!(e.to_string()))
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let mode = match self.solver.mode.as_str() {
            "imex" => SolverMode::Imex,
            "spectral" => SolverMode::Spectral,
            "picard" => SolverMode::Picard,
            other => bail!("unknown solver.mode \"{other}\""),
        };
        Ok(SolverConfig {
            mode,
            dt: self.solver.dt,
            stride: self.solver.stride,
            picard_tol: self.solver.picard_tol,
            picard_max_iters: self.solver.picard_max_iters,
            rel_amp_tol: self.solver.rel_amp_tol,
            ..SolverConfig::default()
        })
    }

    /// Output directory: the `BCTL_OUT` environment variable overrides the
    /// config (the only environment knob).
    pub fn output_dir(&self) -> PathBuf {
        if let Ok(dir) = std::env::var("BCTL_OUT") {
            return PathBuf::from(dir);
        }
        self.output
            .dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    /// FNV-1a hash of the raw config text, for provenance lines.
    pub fn content_hash(text: &str) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

pub fn coefficient_by_name(name: &str, _grid: Grid) -> Result<DiffusionCoefficient> {
    if name == "legendre" {
        return Ok(DiffusionCoefficient::legendre());
    }
    if let Some(k) = name.strip_prefix("power:") {
        let k: f64 = k
            .parse()
            .map_err(|_| anyhow!("bad exponent in coefficient name \"{name}\""))?;
        return DiffusionCoefficient::power(k).map_err(|e| anyhow!(e.to_string()));
    }
    bail!("unknown coefficient \"{name}\" (expected \"legendre\", \"power:<k>\" or a table)")
}
