//! Fixed-point (mild solution) mode.
//!
//! Iterates u ↦ Λ(u) with Λ(u)(t) = e^{tA}u₀ + ∫₀ᵗ e^{(t-s)A} f(s,·,u(s)) ds
//! per control segment, the convolution quadratured by the left-endpoint rule
//! on the stamp grid. The semigroup factors are exact in the segment
//! eigenbasis, so the whole iteration runs in coefficient space with a
//! one-step recurrence for the convolution sum.
//!
//! Contraction is only local in time; if the gap sequence refuses to shrink
//! within the allowed sweeps the run aborts with a horizon-too-long error.

use alloc::vec;
use alloc::vec::Vec;

use crate::coeff::DiffusionCoefficient;
use crate::control::PiecewiseStaticControl;
use crate::eigen::decompose;
use crate::float;
use crate::grid::Field;
use crate::nonlin::Nonlinearity;
use crate::operator::OperatorMatrix;
use crate::problem::ProblemSpec;
use crate::solver::{spec_hash, Recorder, SolverConfig, SolverMode, Trajectory, TrajectoryMeta};
use crate::{Error, Result};

/// Per-segment iteration record.
#[derive(Debug, Clone)]
pub struct PicardSegment {
    pub iterations: usize,
    /// sup-over-stamps L² distance between successive iterates.
    pub gaps: Vec<f64>,
}

impl PicardSegment {
    /// Largest ratio of successive gaps; < 1 indicates geometric contraction.
    pub fn contraction_ratio(&self) -> Option<f64> {
        if self.gaps.len() < 2 {
            return None;
        }
        let mut worst = 0.0f64;
        for w in self.gaps.windows(2) {
            if w[0] > 0.0 {
                worst = worst.max(w[1] / w[0]);
            }
        }
        Some(worst)
    }
}

#[derive(Debug, Clone, Default)]
pub struct PicardReport {
    pub segments: Vec<PicardSegment>,
}

impl PicardReport {
    pub fn total_iterations(&self) -> usize {
        self.segments.iter().map(|s| s.iterations).sum()
    }

    pub fn worst_contraction_ratio(&self) -> Option<f64> {
        self.segments
            .iter()
            .filter_map(|s| s.contraction_ratio())
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }
}

pub fn evolve_picard(
    spec: &ProblemSpec,
    horizon: f64,
    cfg: &SolverConfig,
) -> Result<(Trajectory, PicardReport)> {
    evolve_picard_with(spec.a(), spec.f(), spec.u0(), spec.control(), horizon, cfg)
}

pub fn evolve_picard_with(
    a: &DiffusionCoefficient,
    f: &Nonlinearity,
    u0: &Field,
    control: &PiecewiseStaticControl,
    horizon: f64,
    cfg: &SolverConfig,
) -> Result<(Trajectory, PicardReport)> {
    if !(horizon > 0.0) {
        return Err(Error::Parameter("horizon must be positive".into()));
    }
    cfg.validate()?;
    u0.check_same_grid(&control.profiles()[0], "initial state vs control")?;
    let control = control.clipped(horizon)?;
    let grid = u0.grid();
    let n = grid.n_cells();

    let meta = TrajectoryMeta {
        mode: SolverMode::Picard,
        dt_bits: cfg.dt.to_bits(),
        spec_hash: spec_hash(a, Some(f), u0, &control, horizon, cfg),
    };
    let mut rec = Recorder::new(u0);
    let mut report = PicardReport::default();
    let mut seg_initial = u0.clone();

    let breaks = control.breakpoints();
    for (seg, profile) in control.profiles().iter().enumerate() {
        let t_start = breaks[seg];
        let t_end = breaks[seg + 1];
        let len = t_end - t_start;
        let steps = (crate::float::ceil(len / cfg.dt) as usize).clamp(1, cfg.max_steps_per_segment);
        let dt = len / steps as f64;

        let basis = decompose(&OperatorMatrix::assemble(a, Some(profile), grid))?;
        // Per-mode decay over one stamp step.
        let decay: Vec<f64> = basis.lambdas().iter().map(|l| float::exp(-l * dt)).collect();
        let c0 = basis.project(&seg_initial);

        // Free evolution as the starting iterate: e^{tA} u0 at every stamp.
        let mut free = Vec::with_capacity(steps + 1);
        {
            let mut c = c0.clone();
            free.push(basis.expand(&c));
            for _ in 0..steps {
                for (ck, dk) in c.iter_mut().zip(&decay) {
                    *ck *= dk;
                }
                free.push(basis.expand(&c));
            }
        }
        let mut current = free.clone();
        let mut gaps = Vec::new();
        let mut converged = f.is_zero();

        if !converged {
            for _ in 0..cfg.picard_max_iters {
                // Reaction coefficients at every stamp of the current iterate.
                let mut g = vec![vec![0.0; basis.len()]; steps + 1];
                let mut fx = Field::zeros(grid);
                for (j, state) in current.iter().enumerate() {
                    let t_abs = t_start + j as f64 * dt;
                    for i in 0..n {
                        fx.values_mut()[i] = f.eval(t_abs, grid.center(i), state.get(i));
                    }
                    g[j] = basis.project(&fx);
                }
                // c(t_j) = decay^j c0 + S_j,
                // S_j = decay (S_{j-1} + dt g(t_{j-1}))  (left-endpoint rule).
                let mut next = Vec::with_capacity(steps + 1);
                let mut hom = c0.clone();
                let mut conv = vec![0.0; basis.len()];
                next.push(basis.expand(&hom));
                for j in 1..=steps {
                    for k in 0..basis.len() {
                        hom[k] *= decay[k];
                        conv[k] = decay[k] * (conv[k] + dt * g[j - 1][k]);
                    }
                    let mut c: Vec<f64> = hom.clone();
                    for (ck, sk) in c.iter_mut().zip(&conv) {
                        *ck += sk;
                    }
                    next.push(basis.expand(&c));
                }
                // sup-over-stamps L² move.
                let mut gap = 0.0f64;
                for (new, old) in next.iter().zip(&current) {
                    gap = gap.max(new.sub(old).norm_l2());
                }
                current = next;
                gaps.push(gap);
                if gap <= cfg.picard_tol {
                    converged = true;
                    break;
                }
            }
        }
        if !converged {
            return Err(Error::PicardNoContraction {
                iterations: gaps.len(),
                last_gap: gaps.last().copied().unwrap_or(f64::NAN),
            });
        }
        report.segments.push(PicardSegment {
            iterations: gaps.len(),
            gaps,
        });
        for (j, state) in current.iter().enumerate().skip(1) {
            let t = if j == steps {
                t_end
            } else {
                t_start + j as f64 * dt
            };
            rec.push(t, state);
        }
        seg_initial = current.pop().unwrap();
    }
    Ok((rec.finish(meta)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::solver::evolve_linear_at;

    #[test]
    fn zero_reaction_converges_immediately_to_linear() {
        let grid = Grid::new(64).unwrap();
        let a = DiffusionCoefficient::legendre();
        let u0 = Field::from_fn(grid, |x| 1.0 + 0.5 * (core::f64::consts::PI * x).cos());
        let control = PiecewiseStaticControl::constant(grid, -0.5, 0.2).unwrap();
        let cfg = SolverConfig {
            dt: 1e-3,
            ..Default::default()
        };
        let spec = ProblemSpec::new(
            grid,
            DiffusionCoefficient::legendre(),
            Nonlinearity::zero(2.0).unwrap(),
            u0.clone(),
            control.clone(),
        )
        .unwrap();
        let (traj, report) = evolve_picard(&spec, 0.2, &cfg).unwrap();
        assert_eq!(report.total_iterations(), 0);
        let reference = evolve_linear_at(&a, &control, &u0, traj.times(), &cfg).unwrap();
        for (s, r) in traj.states().iter().zip(reference.states()) {
            assert!(s.sub(r).norm_l2() <= 1e-10);
        }
    }

    #[test]
    fn contraction_is_geometric_for_short_horizon() {
        let grid = Grid::new(64).unwrap();
        let u0 = Field::from_fn(grid, |x| 1.0 + (core::f64::consts::PI * x).cos());
        let spec = ProblemSpec::new(
            grid,
            DiffusionCoefficient::legendre(),
            Nonlinearity::model(2.0, 0.0).unwrap(),
            u0,
            PiecewiseStaticControl::zero(grid, 0.05).unwrap(),
        )
        .unwrap();
        let cfg = SolverConfig {
            dt: 1e-3,
            picard_tol: 1e-10,
            ..Default::default()
        };
        let (_, report) = evolve_picard(&spec, 0.05, &cfg).unwrap();
        let ratio = report.worst_contraction_ratio().unwrap();
        assert!(ratio < 1.0, "contraction ratio {ratio}");
    }

    #[test]
    fn long_horizon_reports_no_contraction() {
        // Strong positive gain: the fixed point map expands over a long window.
        let grid = Grid::new(48).unwrap();
        let u0 = Field::constant(grid, 5.0);
        let spec = ProblemSpec::new(
            grid,
            DiffusionCoefficient::legendre(),
            Nonlinearity::model(2.5, 2.0).unwrap(),
            u0,
            PiecewiseStaticControl::constant(grid, 4.0, 8.0).unwrap(),
        )
        .unwrap();
        let cfg = SolverConfig {
            dt: 0.02,
            picard_max_iters: 12,
            ..Default::default()
        };
        match evolve_picard(&spec, 8.0, &cfg) {
            Err(Error::PicardNoContraction { .. }) => {}
            other => panic!("expected contraction failure, got {other:?}"),
        }
    }
}
