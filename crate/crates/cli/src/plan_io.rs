//! Synthesis plan files: every scalar of the plan as `key = value` lines plus
//! the stage-2 profile embedded as CSV. A solver run can be replayed from
//! this file alone.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use bctl_core::synthesis::SynthesisPlan;
use bctl_core::{Field, Grid, PiecewiseStaticControl};

use crate::VERSION;

/// Scalar section of a plan file.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanScalars {
    pub s: f64,
    pub eta: f64,
    pub beta: f64,
    pub t1: f64,
    pub t2: f64,
    pub tau: f64,
    pub horizon: f64,
    pub alpha1: f64,
    pub alpha3: f64,
    pub eps: f64,
    pub achieved_error: f64,
    pub accepted_iteration: usize,
    pub delta_s_ratio: f64,
    pub delta_s_eta_ratio: f64,
    pub c_hat: f64,
    pub k_const: f64,
    pub rho: f64,
    pub theta: f64,
    pub nu: f64,
    pub kappa: f64,
    pub n_cells: usize,
}

pub fn plan_text(plan: &SynthesisPlan) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# bctl {VERSION} plan");
    let mut kv = |k: &str, v: f64| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("s", plan.s);
    kv("eta", plan.eta);
    kv("beta", plan.beta);
    kv("t1", plan.t1);
    kv("t2", plan.t2);
    kv("tau", plan.tau);
    kv("horizon", plan.horizon);
    kv("alpha1", plan.alpha1);
    kv("alpha3", plan.alpha3);
    kv("eps", plan.eps);
    kv("achieved_error", plan.achieved_error);
    let _ = writeln!(out, "accepted_iteration = {}", plan.accepted_iteration);
    let mut kv = |k: &str, v: f64| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("delta_s_ratio", plan.delta_s_ratio);
    kv("delta_s_eta_ratio", plan.delta_s_eta_ratio);
    kv("c_hat", plan.gapc.c_hat);
    kv("k_const", plan.gapc.k_const);
    kv("rho", plan.gapc.rho);
    kv("theta", plan.gapc.theta);
    kv("nu", plan.gapc.nu);
    kv("kappa", plan.target.kappa());
    let _ = writeln!(out, "n_cells = {}", plan.alpha2.grid().n_cells());
    let _ = writeln!(out, "alpha2 =");
    let _ = writeln!(out, "x,alpha2");
    let grid = plan.alpha2.grid();
    for (i, v) in plan.alpha2.values().iter().enumerate() {
        let _ = writeln!(out, "{},{v}", grid.center(i));
    }
    out
}

pub fn write_plan(path: &Path, plan: &SynthesisPlan) -> Result<()> {
    fs::write(path, plan_text(plan)).with_context(|| format!("writing plan {}", path.display()))
}

/// Parse a plan file back into its scalars and the replayable control.
pub fn read_plan(path: &Path) -> Result<(PlanScalars, PiecewiseStaticControl)> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading plan {}", path.display()))?;
    parse_plan(&text).with_context(|| format!("parsing plan {}", path.display()))
}

pub fn parse_plan(text: &str) -> Result<(PlanScalars, PiecewiseStaticControl)> {
    let mut scalars = std::collections::BTreeMap::new();
    let mut alpha2 = Vec::new();
    let mut in_csv = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if in_csv {
            if line == "x,alpha2" {
                continue;
            }
            let val = line
                .split(',')
                .nth(1)
                .ok_or_else(|| anyhow!("line {}: malformed profile row", lineno + 1))?;
            alpha2.push(
                val.parse::<f64>()
                    .map_err(|_| anyhow!("line {}: bad profile value '{val}'", lineno + 1))?,
            );
            continue;
        }
        if line == "alpha2 =" {
            in_csv = true;
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
        scalars.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| -> Result<f64> {
        scalars
            .get(k)
            .ok_or_else(|| anyhow!("plan is missing '{k}'"))?
            .parse::<f64>()
            .map_err(|_| anyhow!("plan field '{k}' is not a number"))
    };
    let ps = PlanScalars {
        s: get("s")?,
        eta: get("eta")?,
        beta: get("beta")?,
        t1: get("t1")?,
        t2: get("t2")?,
        tau: get("tau")?,
        horizon: get("horizon")?,
        alpha1: get("alpha1")?,
        alpha3: get("alpha3")?,
        eps: get("eps")?,
        achieved_error: get("achieved_error")?,
        accepted_iteration: get("accepted_iteration")? as usize,
        delta_s_ratio: get("delta_s_ratio")?,
        delta_s_eta_ratio: get("delta_s_eta_ratio")?,
        c_hat: get("c_hat")?,
        k_const: get("k_const")?,
        rho: get("rho")?,
        theta: get("theta")?,
        nu: get("nu")?,
        kappa: get("kappa")?,
        n_cells: get("n_cells")? as usize,
    };
    if alpha2.len() != ps.n_cells {
        bail!(
            "plan profile has {} values for n_cells = {}",
            alpha2.len(),
            ps.n_cells
        );
    }
    let grid = Grid::new(ps.n_cells).map_err(|e| anyhow!(e.to_string()))?;
    let control = PiecewiseStaticControl::new(
        vec![0.0, ps.t1, ps.t2, ps.horizon],
        vec![
            Field::constant(grid, ps.alpha1),
            Field::new(grid, alpha2).map_err(|e| anyhow!(e.to_string()))?,
            Field::constant(grid, ps.alpha3),
        ],
    )
    .map_err(|e| anyhow!(e.to_string()))?;
    Ok((ps, control))
}

#[cfg(test)]
mod tests {
    use super::*;
    use bctl_core::synthesis::{synthesize, SynthesisOptions};
    use bctl_core::{DiffusionCoefficient, Nonlinearity};

    #[test]
    fn plan_round_trips_through_text() {
        let grid = Grid::new(64).unwrap();
        let a = DiffusionCoefficient::legendre();
        let f = Nonlinearity::model(2.0, 0.0).unwrap();
        let u0 = Field::from_fn(grid, |x| 2.0 + 0.3 * (std::f64::consts::PI * x).cos());
        let eps = 0.5 * u0.norm_l2();
        let plan = synthesize(&a, &f, &u0, &u0, eps, &SynthesisOptions::default()).unwrap();

        let text = plan_text(&plan);
        let (scalars, control) = parse_plan(&text).unwrap();
        assert_eq!(scalars.s.to_bits(), plan.s.to_bits());
        assert_eq!(scalars.alpha1.to_bits(), plan.alpha1.to_bits());
        assert_eq!(scalars.tau.to_bits(), plan.tau.to_bits());
        assert_eq!(control.n_segments(), 3);
        assert_eq!(control.breakpoints(), plan.control().breakpoints());
        for (p, q) in control.profiles().iter().zip(plan.control().profiles()) {
            assert_eq!(p.values(), q.values());
        }
    }

    #[test]
    fn malformed_plans_rejected() {
        assert!(parse_plan("s = 0.5").is_err()); // missing everything else
        assert!(parse_plan("nonsense line").is_err());
    }
}
