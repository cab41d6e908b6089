//! IMEX time stepping: implicit linear part, explicit reaction.
//!
//! Per step, solve (I - dt·(D + diag(α))) u^{n+1} = u^n + dt·f(t_n, ·, u^n)
//! by a tridiagonal factorization. The matrix is fixed within a control
//! segment, so it is factored once per segment. With dt·‖α⁺‖ ≤ 1/2 it is an
//! M-matrix: the implicit half of the step preserves nonnegativity.

use alloc::vec;
use alloc::vec::Vec;

use crate::coeff::DiffusionCoefficient;
use crate::control::PiecewiseStaticControl;
use crate::grid::Field;
use crate::nonlin::Nonlinearity;
use crate::operator::OperatorMatrix;
use crate::problem::ProblemSpec;
use crate::solver::{spec_hash, Recorder, SolverConfig, SolverMode, Trajectory, TrajectoryMeta};
use crate::{Error, Result};

/// Factored tridiagonal matrix (no pivoting; the IMEX matrix is strictly
/// diagonally dominant whenever the dt cap holds).
struct TridiagFactor {
    pivot: Vec<f64>,
    /// Multiplier e_{i-1}/p_{i-1} for the forward sweep.
    lower: Vec<f64>,
    /// Original superdiagonal.
    upper: Vec<f64>,
}

impl TridiagFactor {
    fn new(diag: &[f64], offdiag: &[f64], pivot_tol: f64) -> Result<Self> {
        let n = diag.len();
        let scale = diag.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut pivot = vec![0.0; n];
        let mut lower = vec![0.0; n];
        pivot[0] = diag[0];
        for i in 1..n {
            if pivot[i - 1].abs() <= pivot_tol * scale {
                return Err(Error::SolveBreakdown {
                    row: i - 1,
                    pivot: pivot[i - 1],
                });
            }
            lower[i] = offdiag[i - 1] / pivot[i - 1];
            pivot[i] = diag[i] - lower[i] * offdiag[i - 1];
        }
        if pivot[n - 1].abs() <= pivot_tol * scale {
            return Err(Error::SolveBreakdown {
                row: n - 1,
                pivot: pivot[n - 1],
            });
        }
        Ok(Self {
            pivot,
            lower,
            upper: offdiag.to_vec(),
        })
    }

    /// Solve in place.
    fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        for i in 1..n {
            rhs[i] -= self.lower[i] * rhs[i - 1];
        }
        rhs[n - 1] /= self.pivot[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.upper[i] * rhs[i + 1]) / self.pivot[i];
        }
    }
}

/// Integrate the full semilinear system under its piecewise static control
/// up to `horizon` (which must not exceed the control horizon).
pub fn evolve(spec: &ProblemSpec, horizon: f64, cfg: &SolverConfig) -> Result<Trajectory> {
    evolve_with(
        spec.a(),
        spec.f(),
        spec.u0(),
        spec.control(),
        horizon,
        cfg,
    )
}

/// Same as [`evolve`] but with the problem pieces passed individually, which
/// the synthesizer uses to try many controls against one model.
pub fn evolve_with(
    a: &DiffusionCoefficient,
    f: &Nonlinearity,
    u0: &Field,
    control: &PiecewiseStaticControl,
    horizon: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    evolve_offset(a, f, u0, control, horizon, 0.0, cfg)
}

/// Segment-local run: the control's clock starts at 0 but the reaction sees
/// `t_offset + t` (stage-wise synthesis simulation).
pub(crate) fn evolve_offset(
    a: &DiffusionCoefficient,
    f: &Nonlinearity,
    u0: &Field,
    control: &PiecewiseStaticControl,
    horizon: f64,
    t_offset: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    if !(horizon > 0.0) {
        return Err(Error::Parameter("horizon must be positive".into()));
    }
    cfg.validate()?;
    u0.check_same_grid(&control.profiles()[0], "initial state vs control")?;
    let control = control.clipped(horizon)?;
    let grid = u0.grid();
    let diffusion = OperatorMatrix::assemble(a, None, grid);
    let n = grid.n_cells();

    let meta = TrajectoryMeta {
        mode: SolverMode::Imex,
        dt_bits: cfg.dt.to_bits(),
        spec_hash: spec_hash(a, Some(f), u0, &control, horizon, cfg),
    };
    let mut rec = Recorder::new(u0);
    let mut state = u0.clone();
    let mut rhs = vec![0.0; n];
    let centers: Vec<f64> = grid.centers().collect();

    let breaks = control.breakpoints();
    for (seg, profile) in control.profiles().iter().enumerate() {
        let t_start = breaks[seg];
        let t_end = breaks[seg + 1];
        let len = t_end - t_start;
        let steps = cfg.segment_steps(len, profile.norm_sup(), profile.max().max(0.0));
        let dt = len / steps as f64;

        // I - dt (D + diag(alpha)).
        let diag: Vec<f64> = diffusion
            .diag()
            .iter()
            .zip(profile.values())
            .map(|(d, al)| 1.0 - dt * (d + al))
            .collect();
        let offdiag: Vec<f64> = diffusion.offdiag().iter().map(|o| -dt * o).collect();
        let factor = TridiagFactor::new(&diag, &offdiag, cfg.pivot_tol)?;

        for j in 0..steps {
            let t_n = t_offset + t_start + j as f64 * dt;
            for (i, r) in rhs.iter_mut().enumerate() {
                *r = state.get(i) + dt * f.eval(t_n, centers[i], state.get(i));
            }
            factor.solve(&mut rhs);
            state.values_mut().copy_from_slice(&rhs);
            let t_next = if j + 1 == steps {
                t_end
            } else {
                t_start + (j + 1) as f64 * dt
            };
            if (j + 1) % cfg.stride == 0 || j + 1 == steps {
                rec.push(t_next, &state);
            }
        }
    }
    rec.finish(meta)
}
