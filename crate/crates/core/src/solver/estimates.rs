//! Numerical verification of the solution estimates.
//!
//! Three quantitative statements are exercised against the solver:
//!
//! - continuous dependence on the initial state,
//!   ‖u - v‖_𝓑 ≤ e^{νT} e^{‖α⁺‖T} ‖u0 - v0‖;
//! - the gap between the semilinear flow and the linear flow started from
//!   the same state, ‖u - v‖_𝓑 ≤ C·T^ρ·e^{KT}·‖u0‖^ϑ with ρ = (3-ϑ)/4 and
//!   K = (2+ϑ)‖α⁺‖_∞ + ϑν;
//! - empirical calibration of the non-explicit constant C, as a safety
//!   factor times the largest normalized gap over a horizon grid.

use alloc::format;

use crate::coeff::DiffusionCoefficient;
use crate::control::PiecewiseStaticControl;
use crate::float;
use crate::grid::Field;
use crate::nonlin::Nonlinearity;
use crate::solver::{evolve_with, evolve_linear_at, SolverConfig};
use crate::spaces::trajectory_norms;
use crate::{Error, Result};

/// Constants of the nonlinear–linear gap bound.
#[derive(Debug, Clone, Copy)]
pub struct GapConstants {
    /// ρ = (3-ϑ)/4 ∈ (0, 1/2].
    pub rho: f64,
    /// K = (2+ϑ)‖α⁺‖_∞ + ϑν.
    pub k_const: f64,
    /// Calibrated stand-in for the bound's non-explicit constant.
    pub c_hat: f64,
    pub theta: f64,
    pub nu: f64,
    pub alpha_plus_sup: f64,
}

impl GapConstants {
    pub fn new(theta: f64, nu: f64, alpha_plus_sup: f64, c_hat: f64) -> Result<Self> {
        if !(1.0..3.0).contains(&theta) {
            return Err(Error::Parameter(format!(
                "gap constants need theta in [1,3), got {theta}"
            )));
        }
        if nu < 0.0 || alpha_plus_sup < 0.0 || c_hat <= 0.0 {
            return Err(Error::Parameter(
                "gap constants need nu, alpha+ >= 0 and c_hat > 0".into(),
            ));
        }
        Ok(Self {
            rho: (3.0 - theta) / 4.0,
            k_const: (2.0 + theta) * alpha_plus_sup + theta * nu,
            c_hat,
            theta,
            nu,
            alpha_plus_sup,
        })
    }

    /// e^{νT}.
    pub fn nu_t(&self, horizon: f64) -> f64 {
        float::exp(self.nu * horizon)
    }

    /// The bound denominator T^ρ e^{KT} ‖u0‖^ϑ.
    pub fn envelope(&self, horizon: f64, u0_norm: f64) -> f64 {
        float::powf(horizon, self.rho)
            * float::exp(self.k_const * horizon)
            * float::powf(u0_norm, self.theta)
    }
}

/// One continuous-dependence measurement.
#[derive(Debug, Clone, Copy)]
pub struct StabilityGap {
    /// ‖u - v‖_𝓑 over [0, T].
    pub measured: f64,
    /// e^{νT} e^{‖α⁺‖T} ‖u0 - v0‖.
    pub bound: f64,
    pub pass: bool,
}

/// Run the semilinear system from `u0` and `v0` under the same control and
/// compare the trajectory distance against the stability bound;
/// `tol_disc` widens the pass margin for discretization error.
#[allow(clippy::too_many_arguments)]
pub fn stability_gap(
    a: &DiffusionCoefficient,
    f: &Nonlinearity,
    control: &PiecewiseStaticControl,
    u0: &Field,
    v0: &Field,
    horizon: f64,
    cfg: &SolverConfig,
    tol_disc: f64,
) -> Result<StabilityGap> {
    u0.check_same_grid(v0, "stability pair")?;
    let tu = evolve_with(a, f, u0, control, horizon, cfg)?;
    let tv = evolve_with(a, f, v0, control, horizon, cfg)?;
    let diff = tu.difference(&tv)?;
    let measured = trajectory_norms(&diff, a)?.b_norm;
    let alpha_plus = control.clipped(horizon)?.sup_positive_part();
    let bound =
        float::exp(f.nu() * horizon) * float::exp(alpha_plus * horizon) * u0.sub(v0).norm_l2();
    Ok(StabilityGap {
        measured,
        bound,
        pass: measured <= bound * (1.0 + tol_disc),
    })
}

/// One nonlinear-vs-linear gap measurement at a fixed horizon.
#[derive(Debug, Clone, Copy)]
pub struct GapSample {
    pub horizon: f64,
    /// ‖u - v‖_𝓑 with v the linear flow from the same initial state.
    pub gap: f64,
    /// gap / (T^ρ e^{KT} ‖u0‖^ϑ).
    pub normalized: f64,
}

/// Measure the gap between the semilinear and linear flows under the same
/// control (the constants' α⁺ must be the control's).
pub fn nonlinear_linear_gap(
    a: &DiffusionCoefficient,
    f: &Nonlinearity,
    control: &PiecewiseStaticControl,
    u0: &Field,
    horizon: f64,
    gapc: &GapConstants,
    cfg: &SolverConfig,
) -> Result<GapSample> {
    let tu = evolve_with(a, f, u0, control, horizon, cfg)?;
    let tv = evolve_linear_at(a, control, u0, tu.times(), cfg)?;
    let diff = tu.difference(&tv)?;
    let gap = trajectory_norms(&diff, a)?.b_norm;
    let envelope = gapc.envelope(horizon, u0.norm_l2());
    Ok(GapSample {
        horizon,
        gap,
        normalized: if envelope > 0.0 { gap / envelope } else { 0.0 },
    })
}

/// Cauchy-in-𝓑 diagnostics between dt-refinement levels.
///
/// Strong solutions are limits of refined approximations; operationally,
/// halving dt (and doubling the recording stride so stamps align) must
/// produce a Cauchy sequence. Returns the 𝓑-distance between consecutive
/// levels, measured on the stamps the two runs share.
pub fn refinement_gaps(
    spec: &crate::problem::ProblemSpec,
    horizon: f64,
    cfg: &SolverConfig,
    levels: usize,
) -> Result<alloc::vec::Vec<f64>> {
    use crate::solver::{evolve, Trajectory};
    let mut gaps = alloc::vec::Vec::new();
    let mut prev: Option<Trajectory> = None;
    for level in 0..=levels {
        let mut c = cfg.clone();
        c.dt = cfg.dt / (1u64 << level) as f64;
        c.stride = cfg.stride << level;
        let traj = evolve(spec, horizon, &c)?;
        if let Some(coarse) = &prev {
            let mut times = alloc::vec::Vec::new();
            let mut states = alloc::vec::Vec::new();
            for (t, s) in coarse.times().iter().zip(coarse.states()) {
                if let Some(other) = traj.state_at(*t) {
                    times.push(*t);
                    states.push(s.sub(other));
                }
            }
            let diff = Trajectory::new(times, states, coarse.meta())?;
            gaps.push(trajectory_norms(&diff, spec.a())?.b_norm);
        }
        prev = Some(traj);
    }
    Ok(gaps)
}

/// Calibration options for the gap constant.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationOptions {
    /// Multiplies the largest observed normalized gap (default 2).
    pub safety_factor: f64,
    /// Floor applied after the safety factor (default 1e-6), so a zero
    /// reaction still yields a usable constant.
    pub c_min: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            safety_factor: 2.0,
            c_min: 1e-6,
        }
    }
}

/// Calibrate C over a horizon grid: Ĉ = max(safety · max_T normalized(T), c_min).
pub fn calibrate_gap_constants(
    a: &DiffusionCoefficient,
    f: &Nonlinearity,
    control: &PiecewiseStaticControl,
    u0: &Field,
    t_grid: &[f64],
    cfg: &SolverConfig,
    opts: &CalibrationOptions,
) -> Result<GapConstants> {
    if t_grid.is_empty() {
        return Err(Error::Parameter("calibration needs a horizon grid".into()));
    }
    let alpha_plus = control.sup_positive_part();
    // Normalize with c_hat = 1; only `normalized` is used below.
    let probe = GapConstants::new(f.theta(), f.nu(), alpha_plus, 1.0)?;
    let mut worst = 0.0f64;
    for &t_end in t_grid {
        let sample = nonlinear_linear_gap(a, f, control, u0, t_end, &probe, cfg)?;
        worst = worst.max(sample.normalized);
    }
    GapConstants::new(
        f.theta(),
        f.nu(),
        alpha_plus,
        (opts.safety_factor * worst).max(opts.c_min),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_relative_eq;

    fn model_problem(
        n: usize,
        horizon: f64,
    ) -> (
        DiffusionCoefficient,
        Nonlinearity,
        PiecewiseStaticControl,
        Field,
    ) {
        let grid = Grid::new(n).unwrap();
        (
            DiffusionCoefficient::legendre(),
            Nonlinearity::model(2.0, 0.0).unwrap(),
            PiecewiseStaticControl::zero(grid, horizon).unwrap(),
            Field::from_fn(grid, |x| 1.0 + (core::f64::consts::PI * x).cos()),
        )
    }

    #[test]
    fn gap_constant_formulas() {
        let g = GapConstants::new(2.0, 2.0, 1.5, 1.0).unwrap();
        assert_relative_eq!(g.rho, 0.25);
        assert_relative_eq!(g.k_const, 4.0 * 1.5 + 2.0 * 2.0);
        assert_relative_eq!(g.nu_t(0.5), (1.0f64).exp());
        let g = GapConstants::new(1.0, 0.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(g.rho, 0.5);
        assert_eq!(g.k_const, 0.0);
    }

    #[test]
    fn identical_states_have_zero_gap() {
        let (a, f, control, u0) = model_problem(64, 0.3);
        let cfg = SolverConfig::default();
        let s = stability_gap(&a, &f, &control, &u0, &u0, 0.3, &cfg, 0.05).unwrap();
        assert_eq!(s.measured, 0.0);
        assert_eq!(s.bound, 0.0);
        assert!(s.pass);
    }

    #[test]
    fn constant_difference_is_contraction() {
        // Constant offsets carry no dissipation; the linear heat flow keeps
        // them constant so the ratio sits at 1.
        let grid = Grid::new(64).unwrap();
        let a = DiffusionCoefficient::legendre();
        let f = Nonlinearity::zero(2.0).unwrap();
        let control = PiecewiseStaticControl::zero(grid, 1.0).unwrap();
        let u0 = Field::constant(grid, 1.0);
        let v0 = Field::constant(grid, 1.5);
        let s = stability_gap(&a, &f, &control, &u0, &v0, 1.0, &SolverConfig::default(), 0.05)
            .unwrap();
        assert!(s.pass, "measured {} vs bound {}", s.measured, s.bound);
        assert_relative_eq!(s.measured, s.bound, max_relative = 1e-9);
    }

    #[test]
    fn short_horizon_smooth_pair_contracts() {
        let grid = Grid::new(64).unwrap();
        let a = DiffusionCoefficient::legendre();
        let f = Nonlinearity::zero(2.0).unwrap();
        let control = PiecewiseStaticControl::zero(grid, 0.01).unwrap();
        let u0 = Field::from_fn(grid, |x| 1.0 + 0.2 * (core::f64::consts::PI * x).cos());
        let v0 = Field::from_fn(grid, |x| 0.8 - 0.1 * x);
        let s = stability_gap(&a, &f, &control, &u0, &v0, 0.01, &SolverConfig::default(), 0.05)
            .unwrap();
        assert!(s.pass, "measured {} vs bound {}", s.measured, s.bound);
    }

    #[test]
    fn zero_reaction_gap_vanishes() {
        let grid = Grid::new(64).unwrap();
        let a = DiffusionCoefficient::legendre();
        let f = Nonlinearity::zero(2.0).unwrap();
        let control = PiecewiseStaticControl::zero(grid, 0.4).unwrap();
        let u0 = Field::from_fn(grid, |x| 1.0 + x * x);
        let gapc = GapConstants::new(2.0, 0.0, 0.0, 1.0).unwrap();
        let s =
            nonlinear_linear_gap(&a, &f, &control, &u0, 0.4, &gapc, &SolverConfig::default())
                .unwrap();
        // IMEX vs spectral differ by the time-step error only.
        assert!(s.gap <= 5e-3, "gap {}", s.gap);
    }

    #[test]
    fn calibration_scales_with_safety_factor() {
        let (a, f, control, u0) = model_problem(64, 0.4);
        let cfg = SolverConfig::default();
        let grid_t = [0.4, 0.2, 0.1];
        let c1 = calibrate_gap_constants(
            &a,
            &f,
            &control,
            &u0,
            &grid_t,
            &cfg,
            &CalibrationOptions::default(),
        )
        .unwrap();
        let c2 = calibrate_gap_constants(
            &a,
            &f,
            &control,
            &u0,
            &grid_t,
            &cfg,
            &CalibrationOptions {
                safety_factor: 4.0,
                c_min: 1e-6,
            },
        )
        .unwrap();
        assert_relative_eq!(c2.c_hat, 2.0 * c1.c_hat, max_relative = 1e-12);
        assert!(c1.c_hat > 1e-6);
    }

    #[test]
    fn refinement_levels_are_cauchy() {
        let grid = Grid::new(64).unwrap();
        let spec = crate::problem::ProblemSpec::new(
            grid,
            DiffusionCoefficient::legendre(),
            Nonlinearity::model(2.0, 0.0).unwrap(),
            Field::from_fn(grid, |x| 1.0 + (core::f64::consts::PI * x).cos()),
            PiecewiseStaticControl::zero(grid, 0.5).unwrap(),
        )
        .unwrap();
        let cfg = SolverConfig {
            dt: 4e-3,
            stride: 8,
            ..Default::default()
        };
        let gaps = refinement_gaps(&spec, 0.5, &cfg, 3).unwrap();
        assert_eq!(gaps.len(), 3);
        // First-order stepping: consecutive gaps shrink by roughly half.
        for w in gaps.windows(2) {
            assert!(w[1] < 0.7 * w[0], "gaps not Cauchy: {gaps:?}");
        }
    }

    #[test]
    fn zero_reaction_calibration_floors() {
        let grid = Grid::new(64).unwrap();
        let a = DiffusionCoefficient::legendre();
        let f = Nonlinearity::zero(2.0).unwrap();
        let control = PiecewiseStaticControl::zero(grid, 0.4).unwrap();
        let u0 = Field::constant(grid, 1.0);
        let c = calibrate_gap_constants(
            &a,
            &f,
            &control,
            &u0,
            &[0.4, 0.2],
            &SolverConfig::default(),
            &CalibrationOptions::default(),
        )
        .unwrap();
        assert_eq!(c.c_hat, 1e-6);
    }
}
