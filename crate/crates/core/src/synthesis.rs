//! Constructive three-stage control synthesis.
//!
//! Given a nonnegative nonzero initial state u₀ and a nonnegative target
//! u_d, build a piecewise static control with exactly three segments that
//! steers the semilinear system to within ε of the target in L²:
//!
//! 1. **Shrink.** A negative constant gain α₁ = ln(s)/t₁ over a window t₁
//!    short enough that diffusion and reaction barely act; the state arrives
//!    near s·u₀. The window is the smaller of two thresholds: the free-flow
//!    drift ‖z(t)-u₀‖ ≤ s/2 and the nonlinear-gap budget t^ρ e^{Kt} ≤
//!    s²/(2Ĉ‖u₀‖^ϑ), both capped at 1.
//! 2. **Reshape.** The potential α₂ = α* + β, with α* the ground-state
//!    potential of the (lifted, strictly positive) target and β < 0 chosen
//!    so every non-target mode decays strictly faster than the target mode;
//!    run until the target-mode coefficient matches s^{1+η}‖u_d‖.
//! 3. **Rescale.** A positive constant gain α₃ = -(1+η)ln(s)/τ over a short
//!    window τ, amplifying the state by exactly s^{-(1+η)}.
//!
//! The scale s is found by geometric search: candidates s_j = s₀·2^{-j} are
//! planned, simulated in full (IMEX), and the first one whose measured final
//! error ‖u(T) - u_d_raw‖ falls below ε is accepted. Per-stage deviations
//! δ_s = u(t₁) - s·u₀ and δ_{s^{1+η}} = u(t₂) - s^{1+η}u_d are measured, not
//! estimated, and recorded for every candidate.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::coeff::DiffusionCoefficient;
use crate::control::PiecewiseStaticControl;
use crate::eigen::{decompose, EigenBasis};
use crate::float;
use crate::grid::Field;
use crate::nonlin::Nonlinearity;
use crate::operator::{alpha_star, OperatorMatrix};
use crate::quad::largest_below;
use crate::solver::estimates::{calibrate_gap_constants, CalibrationOptions, GapConstants};
use crate::solver::imex::evolve_offset;
use crate::solver::{
    check_nonnegative, spec_hash, NonnegativityReport, Recorder, SolverConfig, SolverMode,
    Trajectory, TrajectoryMeta,
};
use crate::{Error, Result};

/// Floor on the stage-3 window so T = t₂ + τ stays strictly above t₂ in f64.
const TAU_MIN_DEFAULT: f64 = 1e-9;

/// Stage-1 simulation accuracy scales with s so the measured ‖δ_s‖/s keeps
/// decreasing instead of flattening at the integrator's amplitude bias.
const STAGE1_TOL_SCALE: f64 = 0.02;
const STAGE1_TOL_FLOOR: f64 = 1e-7;

/// Strictly positive smooth lift of a nonnegative target.
#[derive(Debug, Clone)]
pub struct TargetSpec {
    u_d_raw: Field,
    u_d: Field,
    kappa: f64,
    mollifier_width: f64,
}

impl TargetSpec {
    /// Mollify by a discrete Gaussian and lift by κ, keeping the lifted
    /// target within eps/2 of the raw one (κ and the width shrink until that
    /// budget holds).
    pub fn build(u_d_raw: &Field, eps: f64, width_cells: f64) -> Result<Self> {
        if u_d_raw.min() < 0.0 {
            return Err(Error::Parameter("target must be nonnegative".into()));
        }
        if !(eps > 0.0) {
            return Err(Error::Parameter("tolerance must be positive".into()));
        }
        let norm_raw = u_d_raw.norm_l2();
        if !(norm_raw.is_finite()) {
            return Err(Error::Parameter("target norm not finite".into()));
        }
        let h = u_d_raw.grid().h();
        let mut kappa = (eps / 4.0).max(1e-3 * norm_raw) / core::f64::consts::SQRT_2;
        let mut sigma = width_cells * h;
        for _ in 0..64 {
            let u_d = mollify(u_d_raw, sigma).map(|v| v + kappa);
            if u_d.sub(u_d_raw).norm_l2() <= 0.5 * eps {
                return Ok(Self {
                    u_d_raw: u_d_raw.clone(),
                    u_d,
                    kappa,
                    mollifier_width: sigma,
                });
            }
            kappa *= 0.5;
            sigma *= 0.5;
        }
        Err(Error::Parameter(
            "could not lift the target within the eps/2 budget".into(),
        ))
    }

    #[inline]
    pub fn u_d(&self) -> &Field {
        &self.u_d
    }

    #[inline]
    pub fn u_d_raw(&self) -> &Field {
        &self.u_d_raw
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn mollifier_width(&self) -> f64 {
        self.mollifier_width
    }
}

/// Discrete Gaussian mollifier; the kernel is clipped at the boundary and
/// renormalized, which preserves nonnegativity and constants.
fn mollify(u: &Field, sigma: f64) -> Field {
    let grid = u.grid();
    let h = grid.h();
    if sigma < 0.25 * h {
        return u.clone();
    }
    let reach = float::ceil(4.0 * sigma / h) as isize;
    let weights: Vec<f64> = (-reach..=reach)
        .map(|m| {
            let d = m as f64 * h / sigma;
            float::exp(-0.5 * d * d)
        })
        .collect();
    let n = grid.n_cells() as isize;
    let mut out = Field::zeros(grid);
    for i in 0..n {
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for (idx, w) in weights.iter().enumerate() {
            let j = i + (idx as isize - reach);
            if j < 0 || j >= n {
                continue;
            }
            acc += w * u.get(j as usize);
            wsum += w;
        }
        out.values_mut()[i as usize] = acc / wsum;
    }
    out
}

/// Tunables of the synthesizer.
#[derive(Debug, Clone)]
pub struct SynthesisOptions {
    /// Stage-2 exponent η ∈ (0, ϑ-1); defaults to (ϑ-1)/2.
    pub eta: Option<f64>,
    /// First scale candidate.
    pub s0: f64,
    /// Scale candidates s₀·2^{-j} for j = 0..=j_max.
    pub j_max: usize,
    /// Mollifier width in cells for the target lift.
    pub mollifier_width_cells: f64,
    /// Horizon grid for the gap-constant calibration.
    pub calibration_grid: Vec<f64>,
    pub calibration: CalibrationOptions,
    pub solver: SolverConfig,
    /// Representability floor for the stage-3 window.
    pub tau_min: f64,
    /// Tolerance for the closed-loop nonnegativity check.
    pub nonneg_tol: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            eta: None,
            s0: 0.5,
            j_max: 20,
            mollifier_width_cells: 4.0,
            calibration_grid: vec![0.4, 0.2, 0.1, 0.05],
            calibration: CalibrationOptions::default(),
            solver: SolverConfig::default(),
            tau_min: TAU_MIN_DEFAULT,
            nonneg_tol: 1e-10,
        }
    }
}

/// Why a scale candidate was not accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateOutcome {
    Accepted,
    /// Closed-loop error above the tolerance.
    ErrorAboveTolerance,
    /// ⟨u(t₁), u_d⟩ ≤ 0.
    GroundStateCoefficientNonpositive,
    /// Stage-2 coefficient match would need a negative duration.
    StageTwoInfeasible,
    /// No admissible stage-3 window at this scale.
    StageThreeInfeasible,
    /// Closed-loop trajectory left the nonnegative cone (nonnegative branch).
    NonnegativityViolated,
}

impl CandidateOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            CandidateOutcome::Accepted => "accepted",
            CandidateOutcome::ErrorAboveTolerance => "error-above-tolerance",
            CandidateOutcome::GroundStateCoefficientNonpositive => "ground-coefficient-nonpositive",
            CandidateOutcome::StageTwoInfeasible => "stage2-infeasible",
            CandidateOutcome::StageThreeInfeasible => "stage3-infeasible",
            CandidateOutcome::NonnegativityViolated => "nonnegativity-violated",
        }
    }
}

/// Everything measured while trying one scale.
#[derive(Debug, Clone)]
pub struct CandidateDiagnostics {
    pub j: usize,
    pub s: f64,
    pub t1: f64,
    pub alpha1: f64,
    /// ‖u(t₁) - s·u₀‖ / s.
    pub delta_s_ratio: f64,
    pub t2: Option<f64>,
    /// ‖u(t₂) - s^{1+η}·u_d‖ / s^{1+η}.
    pub delta_s_eta_ratio: Option<f64>,
    pub tau: Option<f64>,
    /// Threshold from the calibrated gap bound and from the free-flow drift.
    pub tau_gap_threshold: Option<f64>,
    pub tau_drift_threshold: Option<f64>,
    /// Whether the emitted τ satisfies the calibrated gap bound (false when
    /// it was floored for representability; the closed-loop error remains
    /// the acceptance gate).
    pub gap_condition_met: Option<bool>,
    pub error: Option<f64>,
    pub outcome: CandidateOutcome,
}

/// Trail of every candidate tried, in order.
#[derive(Debug, Clone, Default)]
pub struct SynthesisDiagnostics {
    pub candidates: Vec<CandidateDiagnostics>,
}

impl SynthesisDiagnostics {
    /// Number of pairs (j, j+2) where ‖δ_s‖/s failed to decrease.
    pub fn delta_ratio_trend_violations(&self) -> usize {
        let r: Vec<f64> = self.candidates.iter().map(|c| c.delta_s_ratio).collect();
        let mut violations = 0;
        for j in 0..r.len().saturating_sub(2) {
            if r[j + 2] > r[j] {
                violations += 1;
            }
        }
        violations
    }

    pub fn best_error(&self) -> Option<f64> {
        self.candidates
            .iter()
            .filter_map(|c| c.error)
            .fold(None, |acc, e| Some(acc.map_or(e, |a: f64| a.min(e))))
    }
}

/// The synthesized three-stage control and its provenance.
#[derive(Debug, Clone)]
pub struct SynthesisPlan {
    pub s: f64,
    pub eta: f64,
    pub t1: f64,
    pub t2: f64,
    pub tau: f64,
    /// Total horizon T = t₂ + τ.
    pub horizon: f64,
    pub alpha1: f64,
    /// Ground-state potential of the lifted target.
    pub alpha_star: Field,
    pub beta: f64,
    /// Stage-2 profile α* + β.
    pub alpha2: Field,
    pub alpha3: f64,
    pub gapc: GapConstants,
    pub eps: f64,
    /// Measured ‖u(T) - u_d_raw‖ of the accepted closed-loop run.
    pub achieved_error: f64,
    pub accepted_iteration: usize,
    pub delta_s_ratio: f64,
    pub delta_s_eta_ratio: f64,
    pub target: TargetSpec,
    pub nonnegativity: Option<NonnegativityReport>,
    pub diagnostics: SynthesisDiagnostics,
}

impl SynthesisPlan {
    /// The emitted piecewise static control (three segments).
    pub fn control(&self) -> PiecewiseStaticControl {
        let grid = self.alpha2.grid();
        PiecewiseStaticControl::new(
            vec![0.0, self.t1, self.t2, self.horizon],
            vec![
                Field::constant(grid, self.alpha1),
                self.alpha2.clone(),
                Field::constant(grid, self.alpha3),
            ],
        )
        .expect("plan breakpoints are strictly increasing by construction")
    }
}

/// Stage-1 plan: window t₁ = min{t*, t̄, 1} and gain α₁ = ln(s)/t₁ < 0.
///
/// t* is the largest t ≤ 1 with ‖z(t) - u₀‖ ≤ s/2 for the free flow z, found
/// by bisection on the monotone drift map; t̄ solves t^ρ e^{Kt} =
/// s²/(2Ĉ‖u₀‖^ϑ).
pub fn plan_step1(
    u0: &Field,
    s: f64,
    basis: &EigenBasis,
    gapc: &GapConstants,
) -> Result<(f64, f64)> {
    if !(0.0 < s && s < 1.0) {
        return Err(Error::Parameter(alloc::format!(
            "scale s must lie in (0,1), got {s}"
        )));
    }
    let norm = u0.norm_l2();
    if norm == 0.0 {
        return Err(Error::Parameter("initial state must be nonzero".into()));
    }
    let coeffs = basis.project(u0);
    let drift = |t: f64| {
        let mut acc = 0.0;
        for (c, l) in coeffs.iter().zip(basis.lambdas()) {
            let g = 1.0 - float::exp(-l * t);
            acc += g * g * c * c;
        }
        float::sqrt(acc)
    };
    let t_star = largest_below(drift, 0.5 * s, 1e-300, 1.0)
        .expect("free-flow drift vanishes at t = 0");
    let rhs = s * s / (2.0 * gapc.c_hat * float::powf(norm, gapc.theta));
    let envelope = |t: f64| float::powf(t, gapc.rho) * float::exp(gapc.k_const * t);
    let t_bar = largest_below(envelope, rhs, 1e-300, 1.0).ok_or_else(|| {
        Error::Parameter("gap budget unreachable even at the smallest window".into())
    })?;
    let t1 = t_star.min(t_bar);
    Ok((t1, float::ln(s) / t1))
}

/// Stage-2 plan for a measured state u(t₁).
#[derive(Debug, Clone)]
pub struct Step2Plan {
    pub alpha_star: Field,
    pub alpha2: Field,
    pub beta: f64,
    pub t2_increment: f64,
}

/// β = min{-‖α*‖_∞, -ηK/(ϑ-1-η)} - 1 and the duration needed for the
/// target-mode coefficient to reach s^{1+η}‖u_d‖.
pub fn plan_step2(
    state1: &Field,
    target: &TargetSpec,
    s: f64,
    eta: f64,
    gapc: &GapConstants,
    a: &DiffusionCoefficient,
) -> Result<Step2Plan> {
    let theta = gapc.theta;
    if !(eta > 0.0 && eta < theta - 1.0) {
        return Err(Error::Parameter(alloc::format!(
            "eta must lie in (0, theta-1) = (0, {}), got {eta}",
            theta - 1.0
        )));
    }
    let u_d = target.u_d();
    let star = alpha_star(a, u_d, None)?;
    let beta = (-star.norm_sup()).min(-eta * gapc.k_const / (theta - 1.0 - eta)) - 1.0;
    let alpha2 = star.map(|v| v + beta);

    let inner = state1.inner(u_d);
    if inner <= 0.0 {
        return Err(Error::GroundStateCoefficient);
    }
    let norm_d = u_d.norm_l2();
    // e^{β·Δ}·⟨u(t₁), ω₁⟩ = s^{1+η}‖u_d‖ with ω₁ = u_d/‖u_d‖ gives
    // Δ = ln(s^{1+η}‖u_d‖²/⟨u(t₁), u_d⟩)/β, positive only if the log
    // argument is below 1.
    let arg = float::powf(s, 1.0 + eta) * norm_d * norm_d / inner;
    if !(arg > 0.0) || arg >= 1.0 {
        return Err(Error::StageTwoHorizon);
    }
    Ok(Step2Plan {
        alpha_star: star,
        alpha2,
        beta,
        t2_increment: float::ln(arg) / beta,
    })
}

/// Stage-3 plan for a measured state u(t₂).
#[derive(Debug, Clone, Copy)]
pub struct Step3Plan {
    pub tau: f64,
    pub alpha3: f64,
    pub tau_gap_threshold: f64,
    pub tau_drift_threshold: f64,
    /// The emitted τ satisfies the calibrated gap condition. False only when
    /// that threshold fell below the representability floor and τ was
    /// floored; the closed-loop measurement stays the acceptance gate.
    pub gap_condition_met: bool,
}

/// Pick the stage-3 window: the largest τ satisfying both smallness
/// conditions — the calibrated gap bound
/// Ĉ τ^ρ e^{νϑτ} s^{-2(1+η)}(‖u_d‖+1)^ϑ ≤ ε/2 and the free-flow drift
/// ‖z(τ) - u(t₂)‖ ≤ (ε/4)·s^{1+η} — then α₃ = -(1+η)ln(s)/τ > 0.
#[allow(clippy::too_many_arguments)]
pub fn plan_step3(
    state2: &Field,
    s: f64,
    eta: f64,
    target: &TargetSpec,
    gapc: &GapConstants,
    eps: f64,
    basis: &EigenBasis,
    tau_min: f64,
) -> Result<Step3Plan> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(alloc::format!(
            "stage-3 tolerance must lie in (0,1), got {eps}"
        )));
    }
    let norm_d = target.u_d().norm_l2();
    let amp = gapc.c_hat
        * float::powf(s, -2.0 * (1.0 + eta))
        * float::powf(norm_d + 1.0, gapc.theta);
    let gap_lhs =
        |tau: f64| amp * float::powf(tau, gapc.rho) * float::exp(gapc.nu * gapc.theta * tau);
    let tau_gap = largest_below(gap_lhs, 0.5 * eps, 1e-300, 1.0).unwrap_or(0.0);

    let coeffs = basis.project(state2);
    let drift = |tau: f64| {
        let mut acc = 0.0;
        for (c, l) in coeffs.iter().zip(basis.lambdas()) {
            let g = 1.0 - float::exp(-l * tau);
            acc += g * g * c * c;
        }
        float::sqrt(acc)
    };
    let tau_drift = largest_below(drift, 0.25 * eps * float::powf(s, 1.0 + eta), 1e-300, 1.0)
        .expect("free-flow drift vanishes at tau = 0");

    // The drift threshold is always enforced; the gap threshold is enforced
    // down to the representability floor (see the module notes: the measured
    // closed-loop error is what accepts a plan, the calibrated bound only
    // sizes the window).
    let tau = tau_drift.min(tau_gap.max(tau_min));
    if tau < tau_min {
        return Err(Error::EpsilonUnreachable);
    }
    Ok(Step3Plan {
        tau,
        alpha3: -(1.0 + eta) * float::ln(s) / tau,
        tau_gap_threshold: tau_gap,
        tau_drift_threshold: tau_drift,
        gap_condition_met: tau <= tau_gap,
    })
}

/// Steer a nonnegative u₀ to within eps of the nonnegative target; the
/// closed-loop trajectory is also checked to stay nonnegative.
pub fn synthesize(
    a: &DiffusionCoefficient,
    f: &Nonlinearity,
    u0: &Field,
    u_d_raw: &Field,
    eps: f64,
    opts: &SynthesisOptions,
) -> Result<SynthesisPlan> {
    let tol = 1e-12 * u0.norm_sup().max(1.0);
    if u0.min() < -tol {
        return Err(Error::Parameter(
            "initial state must be nonnegative for this variant".into(),
        ));
    }
    run_synthesis(a, f, u0, u_d_raw, eps, opts, false)
}

/// Sign-relaxed variant: u₀ may change sign but must satisfy
/// ⟨u₀, u_d⟩ > 0; the trajectory nonnegativity check is skipped.
pub fn synthesize_signed(
    a: &DiffusionCoefficient,
    f: &Nonlinearity,
    u0: &Field,
    u_d_raw: &Field,
    eps: f64,
    opts: &SynthesisOptions,
) -> Result<SynthesisPlan> {
    if u0.inner(u_d_raw) <= 0.0 {
        return Err(Error::TargetNotReachableFromInitial);
    }
    run_synthesis(a, f, u0, u_d_raw, eps, opts, true)
}

#[allow(clippy::too_many_arguments)]
fn run_synthesis(
    a: &DiffusionCoefficient,
    f: &Nonlinearity,
    u0: &Field,
    u_d_raw: &Field,
    eps: f64,
    opts: &SynthesisOptions,
    signed: bool,
) -> Result<SynthesisPlan> {
    let grid = u0.grid();
    u0.check_same_grid(u_d_raw, "initial state vs target")?;
    if u0.norm_l2() == 0.0 {
        return Err(Error::Parameter("initial state must be nonzero".into()));
    }
    if u_d_raw.min() < -1e-12 * u_d_raw.norm_sup().max(1.0) {
        return Err(Error::Parameter("target must be nonnegative".into()));
    }
    let theta = f.theta();
    if theta <= 1.0 {
        return Err(Error::Parameter(
            "synthesis needs theta > 1 (eta range must be nonempty)".into(),
        ));
    }
    let eta = opts.eta.unwrap_or(0.5 * (theta - 1.0));
    if !(eta > 0.0 && eta < theta - 1.0) {
        return Err(Error::Parameter(alloc::format!(
            "eta must lie in (0, {}), got {eta}",
            theta - 1.0
        )));
    }
    if !(0.0 < opts.s0 && opts.s0 < 1.0) {
        return Err(Error::Parameter("s0 must lie in (0,1)".into()));
    }

    let target = TargetSpec::build(u_d_raw, eps, opts.mollifier_width_cells)?;
    let basis = decompose(&OperatorMatrix::assemble(a, None, grid))?;

    // Calibrate the gap constant on the uncontrolled system (α⁺ = 0, so
    // K = ϑν matches every stage bound: all three stage gains have α⁺ = 0
    // except the final rescale, whose α₃ factor the stage-3 condition
    // carries explicitly).
    let cal_horizon = opts
        .calibration_grid
        .iter()
        .fold(0.0f64, |m, t| m.max(*t));
    let zero_control = PiecewiseStaticControl::zero(grid, cal_horizon.max(1e-3))?;
    let gapc = calibrate_gap_constants(
        a,
        f,
        &zero_control,
        u0,
        &opts.calibration_grid,
        &opts.solver,
        &opts.calibration,
    )?;

    // The inner tolerance the stage-3 conditions aim at: half the budget is
    // reserved for the target lift (‖u_d - u_d_raw‖ ≤ eps/2).
    let eps_inner = (0.5 * eps).min(0.99);

    let mut diagnostics = SynthesisDiagnostics::default();
    for j in 0..=opts.j_max {
        let s = opts.s0 * float::powf(0.5, j as f64);
        let (t1, alpha1) = plan_step1(u0, s, &basis, &gapc)?;

        // Stage-1 run with amplitude accuracy proportional to s: the measured
        // ‖δ_s‖/s should track the s → 0 prediction, so the integrator bias
        // must shrink with the scale rather than sit at a fixed floor.
        let mut cfg1 = opts.solver.clone();
        cfg1.rel_amp_tol = (STAGE1_TOL_SCALE * s).clamp(STAGE1_TOL_FLOOR, 0.02);
        let control1 =
            PiecewiseStaticControl::new(vec![0.0, t1], vec![Field::constant(grid, alpha1)])?;
        let traj1 = evolve_offset(a, f, u0, &control1, t1, 0.0, &cfg1)?;
        let state1 = traj1.final_state().clone();
        let delta_s_ratio = state1.axpy(-s, u0).norm_l2() / s;

        let mut cand = CandidateDiagnostics {
            j,
            s,
            t1,
            alpha1,
            delta_s_ratio,
            t2: None,
            delta_s_eta_ratio: None,
            tau: None,
            tau_gap_threshold: None,
            tau_drift_threshold: None,
            gap_condition_met: None,
            error: None,
            outcome: CandidateOutcome::ErrorAboveTolerance,
        };

        let step2 = match plan_step2(&state1, &target, s, eta, &gapc, a) {
            Ok(p) => p,
            Err(Error::GroundStateCoefficient) => {
                cand.outcome = CandidateOutcome::GroundStateCoefficientNonpositive;
                diagnostics.candidates.push(cand);
                continue;
            }
            Err(Error::StageTwoHorizon) => {
                cand.outcome = CandidateOutcome::StageTwoInfeasible;
                diagnostics.candidates.push(cand);
                continue;
            }
            Err(e) => return Err(e),
        };
        let t2 = t1 + step2.t2_increment;
        cand.t2 = Some(t2);

        let control2 = PiecewiseStaticControl::new(
            vec![0.0, step2.t2_increment],
            vec![step2.alpha2.clone()],
        )?;
        let traj2 = evolve_offset(a, f, &state1, &control2, step2.t2_increment, t1, &opts.solver)?;
        let state2 = traj2.final_state().clone();
        let s_eta = float::powf(s, 1.0 + eta);
        let delta_s_eta_ratio = state2.axpy(-s_eta, target.u_d()).norm_l2() / s_eta;
        cand.delta_s_eta_ratio = Some(delta_s_eta_ratio);

        let step3 = match plan_step3(
            &state2,
            s,
            eta,
            &target,
            &gapc,
            eps_inner,
            &basis,
            opts.tau_min,
        ) {
            Ok(p) => p,
            Err(Error::EpsilonUnreachable) => {
                cand.outcome = CandidateOutcome::StageThreeInfeasible;
                diagnostics.candidates.push(cand);
                continue;
            }
            Err(e) => return Err(e),
        };
        cand.tau = Some(step3.tau);
        cand.tau_gap_threshold = Some(step3.tau_gap_threshold);
        cand.tau_drift_threshold = Some(step3.tau_drift_threshold);
        cand.gap_condition_met = Some(step3.gap_condition_met);
        let horizon = t2 + step3.tau;

        let control3 = PiecewiseStaticControl::new(
            vec![0.0, step3.tau],
            vec![Field::constant(grid, step3.alpha3)],
        )?;
        let traj3 = evolve_offset(a, f, &state2, &control3, step3.tau, t2, &opts.solver)?;
        let err = traj3.final_state().sub(u_d_raw).norm_l2();
        cand.error = Some(err);

        let full_control = PiecewiseStaticControl::new(
            vec![0.0, t1, t2, horizon],
            vec![
                Field::constant(grid, alpha1),
                step2.alpha2.clone(),
                Field::constant(grid, step3.alpha3),
            ],
        )?;
        let closed_loop = stitch(
            &[&traj1, &traj2, &traj3],
            spec_hash(a, Some(f), u0, &full_control, horizon, &opts.solver),
            opts.solver.dt,
        )?;
        let nonneg = (!signed).then(|| check_nonnegative(&closed_loop, opts.nonneg_tol));

        if err <= eps {
            if let Some(report) = nonneg {
                if !report.pass {
                    cand.outcome = CandidateOutcome::NonnegativityViolated;
                    diagnostics.candidates.push(cand);
                    continue;
                }
                cand.outcome = CandidateOutcome::Accepted;
                diagnostics.candidates.push(cand);
                return Ok(assemble_plan(
                    s,
                    eta,
                    t1,
                    t2,
                    step3.tau,
                    alpha1,
                    step2,
                    step3,
                    gapc,
                    eps,
                    err,
                    j,
                    delta_s_ratio,
                    delta_s_eta_ratio,
                    target,
                    Some(report),
                    diagnostics,
                ));
            }
            cand.outcome = CandidateOutcome::Accepted;
            diagnostics.candidates.push(cand);
            return Ok(assemble_plan(
                s,
                eta,
                t1,
                t2,
                step3.tau,
                alpha1,
                step2,
                step3,
                gapc,
                eps,
                err,
                j,
                delta_s_ratio,
                delta_s_eta_ratio,
                target,
                None,
                diagnostics,
            ));
        }
        diagnostics.candidates.push(cand);
    }

    let best = diagnostics.best_error().unwrap_or(f64::INFINITY);
    Err(Error::ToleranceNotAchieved {
        eps,
        tried: diagnostics.candidates.len(),
        best_error: best,
        diagnostics: Box::new(diagnostics),
    })
}

#[allow(clippy::too_many_arguments)]
fn assemble_plan(
    s: f64,
    eta: f64,
    t1: f64,
    t2: f64,
    tau: f64,
    alpha1: f64,
    step2: Step2Plan,
    step3: Step3Plan,
    gapc: GapConstants,
    eps: f64,
    achieved_error: f64,
    accepted_iteration: usize,
    delta_s_ratio: f64,
    delta_s_eta_ratio: f64,
    target: TargetSpec,
    nonnegativity: Option<NonnegativityReport>,
    diagnostics: SynthesisDiagnostics,
) -> SynthesisPlan {
    SynthesisPlan {
        s,
        eta,
        t1,
        t2,
        tau,
        horizon: t2 + tau,
        alpha1,
        alpha_star: step2.alpha_star,
        beta: step2.beta,
        alpha2: step2.alpha2,
        alpha3: step3.alpha3,
        gapc,
        eps,
        achieved_error,
        accepted_iteration,
        delta_s_ratio,
        delta_s_eta_ratio,
        target,
        nonnegativity,
        diagnostics,
    }
}

/// Concatenate stage trajectories (each recorded in local time) into one
/// global-time trajectory.
fn stitch(stages: &[&Trajectory], hash: u64, dt: f64) -> Result<Trajectory> {
    let mut rec = Recorder::new(stages[0].initial_state());
    let mut offset = 0.0;
    for traj in stages {
        for (t, s) in traj.times().iter().zip(traj.states()).skip(1) {
            rec.push(offset + t, s);
        }
        offset += traj.final_time();
    }
    rec.finish(TrajectoryMeta {
        mode: SolverMode::Imex,
        dt_bits: dt.to_bits(),
        spec_hash: hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_relative_eq;

    fn legendre() -> DiffusionCoefficient {
        DiffusionCoefficient::legendre()
    }

    fn a0_basis(grid: Grid) -> EigenBasis {
        decompose(&OperatorMatrix::assemble(&legendre(), None, grid)).unwrap()
    }

    #[test]
    fn target_lift_is_positive_and_close() {
        let grid = Grid::new(128).unwrap();
        // A nonnegative target that vanishes on a subinterval.
        let raw = Field::from_fn(grid, |x| (x - 0.2).max(0.0));
        let eps = 0.1;
        let t = TargetSpec::build(&raw, eps, 4.0).unwrap();
        assert!(t.u_d().min() > 0.0);
        assert!(t.u_d().sub(&raw).norm_l2() <= 0.5 * eps);
        assert!(t.kappa() > 0.0);
    }

    #[test]
    fn mollifier_preserves_constants() {
        let grid = Grid::new(64).unwrap();
        let c = Field::constant(grid, 3.0);
        let m = mollify(&c, 4.0 * grid.h());
        assert!(m.sub(&c).norm_sup() <= 1e-12);
    }

    #[test]
    fn step1_constant_state_caps_at_one() {
        // A constant state is stationary under the free flow, so the drift
        // threshold never binds and t* caps at 1; t̄ then decides t₁.
        let grid = Grid::new(64).unwrap();
        let basis = a0_basis(grid);
        let u0 = Field::constant(grid, 1.0);
        let gapc = GapConstants::new(2.0, 0.0, 0.0, 1e-6).unwrap();
        let s = 0.5;
        let (t1, alpha1) = plan_step1(&u0, s, &basis, &gapc).unwrap();
        let rhs = s * s / (2.0 * gapc.c_hat * u0.norm_l2() * u0.norm_l2());
        // c_hat tiny makes rhs huge: t̄ caps at 1 as well.
        assert!(rhs > 1.0);
        assert_relative_eq!(t1, 1.0);
        assert!(alpha1 < 0.0);
        assert_relative_eq!(float::exp(alpha1 * t1), s, epsilon = 1e-12);
    }

    #[test]
    fn step1_two_mode_closed_form() {
        // u0 = c1 P1 + c2 P2 drifts by |c2|(1-e^{-2t}); for s < 2|c2| the
        // threshold is t* = -0.5 ln(1 - s/(2|c2|)).
        let grid = Grid::new(512).unwrap();
        let basis = a0_basis(grid);
        let c2 = 0.8;
        let u0 = basis.omega_field(0).scale(2.0).axpy(c2, &basis.omega_field(1));
        let gapc = GapConstants::new(2.0, 0.0, 0.0, 1e-6).unwrap();
        let s = 0.5;
        let (t1, _) = plan_step1(&u0, s, &basis, &gapc).unwrap();
        let expected = -0.5 * (1.0 - s / (2.0 * c2)).ln();
        assert_relative_eq!(t1, expected, max_relative = 1e-6);
    }

    #[test]
    fn step1_rejects_bad_scale() {
        let grid = Grid::new(64).unwrap();
        let basis = a0_basis(grid);
        let u0 = Field::constant(grid, 1.0);
        let gapc = GapConstants::new(2.0, 0.0, 0.0, 1.0).unwrap();
        assert!(plan_step1(&u0, 0.0, &basis, &gapc).is_err());
        assert!(plan_step1(&u0, 1.0, &basis, &gapc).is_err());
    }

    #[test]
    fn step2_beta_formula() {
        // theta = 2, eta = 0.5, K = 3, ||alpha*|| = 2 -> beta = min{-2,-3}-1 = -4.
        // A linear target v = 2 - x has alpha* = -2x/(2-x) with sup 2 at x -> 1;
        // on the discrete grid the sup sits just inside, so check the formula
        // against the measured sup instead of the closed-form endpoint value.
        let grid = Grid::new(256).unwrap();
        let raw = Field::from_fn(grid, |x| 2.0 - x);
        let target = TargetSpec {
            u_d_raw: raw.clone(),
            u_d: raw,
            kappa: 0.0,
            mollifier_width: 0.0,
        };
        let gapc = GapConstants::new(2.0, 1.5, 0.0, 1.0).unwrap(); // K = 3
        let state1 = target.u_d().scale(0.5);
        let p = plan_step2(&state1, &target, 0.5, 0.5, &gapc, &legendre()).unwrap();
        let expected = (-p.alpha_star.norm_sup()).min(-0.5 * 3.0 / 0.5) - 1.0;
        assert_relative_eq!(p.beta, expected, epsilon = 1e-12);
        assert_relative_eq!(p.beta, -4.0, max_relative = 1e-2);
        // alpha2 <= -1 pointwise by the beta rule.
        assert!(p.alpha2.max() <= -1.0 + 1e-12);
    }

    #[test]
    fn step2_aligned_state_closed_form() {
        // state1 = s·u_d gives log argument s^eta and increment eta ln s / beta.
        let grid = Grid::new(128).unwrap();
        let raw = Field::from_fn(grid, |x| 2.0 + x * x);
        let target = TargetSpec {
            u_d_raw: raw.clone(),
            u_d: raw,
            kappa: 0.0,
            mollifier_width: 0.0,
        };
        let gapc = GapConstants::new(2.0, 0.0, 0.0, 1.0).unwrap();
        let (s, eta) = (0.25, 0.5);
        let state1 = target.u_d().scale(s);
        let p = plan_step2(&state1, &target, s, eta, &gapc, &legendre()).unwrap();
        assert_relative_eq!(
            p.t2_increment,
            eta * s.ln() / p.beta,
            max_relative = 1e-10
        );
        assert!(p.t2_increment > 0.0);
    }

    #[test]
    fn step2_rejects_orthogonal_state() {
        let grid = Grid::new(128).unwrap();
        let raw = Field::constant(grid, 1.0);
        let target = TargetSpec {
            u_d_raw: raw.clone(),
            u_d: raw,
            kappa: 0.0,
            mollifier_width: 0.0,
        };
        let gapc = GapConstants::new(2.0, 0.0, 0.0, 1.0).unwrap();
        let odd = Field::from_fn(grid, |x| x);
        assert!(matches!(
            plan_step2(&odd, &target, 0.5, 0.5, &gapc, &legendre()),
            Err(Error::GroundStateCoefficient)
        ));
        // State too small against s^{1+eta}: log argument >= 1, the match
        // would need negative time.
        let s: f64 = 0.9;
        let state = target.u_d().scale(0.5 * s.powf(1.5));
        assert!(matches!(
            plan_step2(&state, &target, s, 0.5, &gapc, &legendre()),
            Err(Error::StageTwoHorizon)
        ));
    }

    #[test]
    fn step3_identity_and_zero_reaction_case() {
        let grid = Grid::new(128).unwrap();
        let basis = a0_basis(grid);
        let raw = Field::from_fn(grid, |x| 2.0 + x * x);
        let target = TargetSpec {
            u_d_raw: raw.clone(),
            u_d: raw,
            kappa: 0.0,
            mollifier_width: 0.0,
        };
        // c_hat at the floor (zero reaction): the gap condition is vacuous
        // and the drift condition alone sets tau.
        let gapc = GapConstants::new(2.0, 0.0, 0.0, 1e-6).unwrap();
        let (s, eta, eps) = (0.25, 0.5, 0.05);
        let state2 = target.u_d().scale(float::powf(s, 1.0 + eta));
        let p = plan_step3(&state2, s, eta, &target, &gapc, eps, &basis, 1e-9).unwrap();
        assert!(p.alpha3 > 0.0);
        assert_relative_eq!(
            float::exp(p.alpha3 * p.tau),
            float::powf(s, -(1.0 + eta)),
            epsilon = 1e-12
        );
        assert!(p.gap_condition_met);
        assert_relative_eq!(p.tau, p.tau_drift_threshold, epsilon = 1e-12);
        assert!(p.tau_gap_threshold > p.tau);
    }

    #[test]
    fn step3_floors_unrepresentable_gap_window() {
        let grid = Grid::new(128).unwrap();
        let basis = a0_basis(grid);
        let raw = Field::from_fn(grid, |x| 2.0 + x * x);
        let target = TargetSpec {
            u_d_raw: raw.clone(),
            u_d: raw,
            kappa: 0.0,
            mollifier_width: 0.0,
        };
        // Realistic c_hat with a small scale: the literal gap threshold is
        // far below any representable window.
        let gapc = GapConstants::new(2.0, 0.0, 0.0, 0.5).unwrap();
        let (s, eta, eps) = (1e-3, 0.5, 0.05);
        let state2 = target.u_d().scale(float::powf(s, 1.0 + eta));
        let p = plan_step3(&state2, s, eta, &target, &gapc, eps, &basis, 1e-9).unwrap();
        assert!(!p.gap_condition_met);
        assert_relative_eq!(p.tau, 1e-9);
        assert!(p.tau_gap_threshold < 1e-9);
        assert_relative_eq!(
            float::exp(p.alpha3 * p.tau),
            float::powf(s, -(1.0 + eta)),
            max_relative = 1e-12
        );
    }

    #[test]
    fn stage1_spectral_evolution_is_exact_rescale_of_free_flow() {
        // Under the constant gain α₁ the linear solution is exactly
        // e^{α₁ t} times the free flow: v(t₁) = s·z(t₁).
        let grid = Grid::new(128).unwrap();
        let basis = a0_basis(grid);
        let u0 = Field::from_fn(grid, |x| 1.0 + (core::f64::consts::PI * x).cos());
        let gapc = GapConstants::new(2.0, 0.0, 0.0, 0.05).unwrap();
        let s = 0.5;
        let (t1, alpha1) = plan_step1(&u0, s, &basis, &gapc).unwrap();
        let control = PiecewiseStaticControl::constant(grid, alpha1, t1).unwrap();
        let v = crate::solver::evolve_linear_at(
            &legendre(),
            &control,
            &u0,
            &[0.0, t1],
            &crate::solver::SolverConfig::default(),
        )
        .unwrap();
        let z = basis.propagate(&u0, t1);
        let gap = v.final_state().axpy(-s, &z).norm_l2();
        assert!(gap <= 1e-10 * u0.norm_l2(), "stage-1 identity defect {gap}");
    }

    #[test]
    fn stage2_operator_locks_ground_state_on_target() {
        // A₀ + α₂ with α₂ = α* + β: first eigenvalue of the negated operator
        // is -β and its ground state is the target direction.
        let grid = Grid::new(256).unwrap();
        let raw = Field::from_fn(grid, |x| 2.0 + x * x);
        let target = TargetSpec::build(&raw, 0.2, 4.0).unwrap();
        let gapc = GapConstants::new(2.0, 0.0, 0.0, 1.0).unwrap();
        let state1 = target.u_d().scale(0.25);
        let p = plan_step2(&state1, &target, 0.25, 0.5, &gapc, &legendre()).unwrap();
        let m = OperatorMatrix::assemble(&legendre(), Some(&p.alpha2), grid);
        let basis = decompose(&m).unwrap();
        assert!(
            (basis.lambda(0) + p.beta).abs() <= 1e-6 * p.beta.abs(),
            "lambda1 = {} vs -beta = {}",
            basis.lambda(0),
            -p.beta
        );
        let aligned = basis
            .omega_field(0)
            .inner(&target.u_d().scale(1.0 / target.u_d().norm_l2()));
        assert!(aligned.abs() >= 1.0 - 1e-6, "alignment {aligned}");
    }

    #[test]
    fn step2_constant_target_beta() {
        // Constant target: α* = 0, so β = min{0, -ηK/(ϑ-1-η)} - 1.
        let grid = Grid::new(64).unwrap();
        let raw = Field::constant(grid, 1.5);
        let target = TargetSpec {
            u_d_raw: raw.clone(),
            u_d: raw,
            kappa: 0.0,
            mollifier_width: 0.0,
        };
        let gapc = GapConstants::new(2.0, 0.0, 0.0, 1.0).unwrap(); // K = 0
        let state1 = target.u_d().scale(0.25);
        let p = plan_step2(&state1, &target, 0.25, 0.5, &gapc, &legendre()).unwrap();
        assert!(p.alpha_star.norm_sup() <= 1e-12);
        assert_relative_eq!(p.beta, -1.0, epsilon = 1e-12);
        let gapc = GapConstants::new(2.0, 1.5, 0.0, 1.0).unwrap(); // K = 3
        let p = plan_step2(&state1, &target, 0.25, 0.5, &gapc, &legendre()).unwrap();
        assert_relative_eq!(p.beta, -3.0 - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn signed_variant_preconditions() {
        let grid = Grid::new(64).unwrap();
        let a = legendre();
        let f = Nonlinearity::model(2.0, 0.0).unwrap();
        let u_d = Field::from_fn(grid, |x| 2.0 + x * x);
        let opts = SynthesisOptions::default();
        // Orthogonal initial state: rejected.
        let odd = Field::from_fn(grid, |x| x);
        assert!(matches!(
            synthesize_signed(&a, &f, &odd, &u_d, 0.1, &opts),
            Err(Error::TargetNotReachableFromInitial)
        ));
        // Negative product: rejected.
        let neg = u_d.scale(-1.0);
        assert!(matches!(
            synthesize_signed(&a, &f, &neg, &u_d, 0.1, &opts),
            Err(Error::TargetNotReachableFromInitial)
        ));
    }

    #[test]
    fn nonnegative_variant_rejects_signed_state() {
        let grid = Grid::new(64).unwrap();
        let a = legendre();
        let f = Nonlinearity::model(2.0, 0.0).unwrap();
        let u_d = Field::from_fn(grid, |x| 2.0 + x * x);
        let u0 = Field::from_fn(grid, |x| x);
        assert!(synthesize(&a, &f, &u0, &u_d, 0.1, &SynthesisOptions::default()).is_err());
    }

    #[test]
    fn theta_one_rejected_by_synthesizer() {
        let grid = Grid::new(64).unwrap();
        let a = legendre();
        let f = Nonlinearity::zero(1.0).unwrap();
        let u0 = Field::constant(grid, 1.0);
        let u_d = Field::constant(grid, 2.0);
        assert!(synthesize(&a, &f, &u0, &u_d, 0.5, &SynthesisOptions::default()).is_err());
    }

    #[test]
    fn identity_like_task_accepts_first_candidate() {
        // Target equals the (strictly positive) start with a generous eps:
        // the very first scale must already pass.
        let grid = Grid::new(64).unwrap();
        let a = legendre();
        let f = Nonlinearity::model(2.0, 0.0).unwrap();
        let u0 = Field::from_fn(grid, |x| 2.0 + 0.5 * (core::f64::consts::PI * x).cos());
        let eps = 0.5 * u0.norm_l2();
        let plan = synthesize(&a, &f, &u0, &u0, eps, &SynthesisOptions::default()).unwrap();
        assert_eq!(plan.accepted_iteration, 0);
        assert!(plan.achieved_error <= eps);
        assert!(plan.alpha1 < 0.0);
        assert!(plan.alpha3 > 0.0);
        assert!(plan.alpha2.max() <= -1.0 + 1e-12);
        assert!(plan.t1 > 0.0 && plan.t1 < plan.t2 && plan.t2 < plan.horizon);
        let control = plan.control();
        assert_eq!(control.n_segments(), 3);
        // Control identities hold exactly.
        assert_relative_eq!(float::exp(plan.alpha1 * plan.t1), plan.s, epsilon = 1e-12);
        assert_relative_eq!(
            float::exp(plan.alpha3 * plan.tau),
            float::powf(plan.s, -(1.0 + plan.eta)),
            epsilon = 1e-12
        );
        if let Some(nn) = plan.nonnegativity {
            assert!(nn.pass);
        } else {
            panic!("nonnegative branch must record the nonnegativity report");
        }
    }
}
