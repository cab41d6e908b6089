//! CSV exports for trajectories and eigenpairs.
//!
//! The first line of every file is a `#`-prefixed header carrying the
//! version stamp and provenance hash; determinism comparisons exclude it.
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! replayed file reproduces the exact bit patterns.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use bctl_core::solver::Trajectory;
use bctl_core::spaces::TrajectoryNorms;
use bctl_core::EigenBasis;

use crate::VERSION;

/// Trajectory rows: `t,x0..x{n-1}` (state values at the cell centers).
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.grid().n_cells();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# bctl {VERSION} trajectory mode={} spec={:016x}",
        traj.meta().mode.as_str(),
        traj.meta().spec_hash
    );
    let mut header = String::from("t");
    for i in 0..n {
        let _ = write!(header, ",x{i}");
    }
    out.push_str(&header);
    out.push('\n');
    for (t, state) in traj.times().iter().zip(traj.states()) {
        let _ = write!(out, "{t}");
        for v in state.values() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    fs::write(path, trajectory_csv(traj))
        .with_context(|| format!("writing trajectory {}", path.display()))
}

/// Eigen rows: `k,lambda,v0..v{n-1}` with k starting at 1.
pub fn eigen_csv(basis: &EigenBasis, modes: usize) -> String {
    let n = basis.grid().n_cells();
    let k_max = if modes == 0 { basis.len() } else { modes.min(basis.len()) };
    let mut out = String::new();
    let _ = writeln!(out, "# bctl {VERSION} eigen n={n}");
    let mut header = String::from("k,lambda");
    for i in 0..n {
        let _ = write!(header, ",v{i}");
    }
    out.push_str(&header);
    out.push('\n');
    for k in 0..k_max {
        let _ = write!(out, "{},{}", k + 1, basis.lambda(k));
        for v in basis.omega(k) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_eigen(path: &Path, basis: &EigenBasis, modes: usize) -> Result<()> {
    fs::write(path, eigen_csv(basis, modes))
        .with_context(|| format!("writing eigenpairs {}", path.display()))
}

/// Structured-text norms report for a finished run.
pub fn norms_report(norms: &TrajectoryNorms) -> String {
    format!(
        "# bctl {VERSION} norms\nb_norm = {}\nh_norm = {}\nsup_l2 = {}\ndissipation = {}\n",
        norms.b_norm, norms.h_norm, norms.sup_l2, norms.dissipation
    )
}
