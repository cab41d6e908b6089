//! Problem data and validation of the standing assumptions.
//!
//! A [`ProblemSpec`] bundles grid, diffusion coefficient, reaction, initial
//! state and control. [`validate_assumptions`] checks the admissibility
//! conditions the well-posedness theory rests on:
//!
//! - square-integrable initial state,
//! - bounded control profiles,
//! - reaction growth |f| ≤ γ₀|u|^ϑ and the one-sided inequality
//!   (f(u)-f(v))(u-v) ≤ ν(u-v)², sampled on a (t,x,u) lattice,
//! - degenerate coefficient: a(±1) = 0, a > 0 inside, and
//!   ξ_a ∈ L^{q_ϑ}(-1,1) with q_ϑ = max{(1+ϑ)/(3-ϑ), 2ϑ-1},
//!
//! plus a classification of the degeneracy as strong (1/a not integrable)
//! or weak. Pointwise-for-all conditions cannot be proved numerically; the
//! sampled lattice (32×32×64 in t, x, u by default) is the documented
//! contract, and failures are soft flags in the report rather than errors.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::coeff::DiffusionCoefficient;
use crate::control::PiecewiseStaticControl;
use crate::float;
use crate::grid::{Field, Grid};
use crate::nonlin::Nonlinearity;
use crate::quad::{self, Truncated};
use crate::{Error, Result};

/// Integrability class of 1/a.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    /// 1/a ∉ L¹(-1,1).
    Strong,
    /// 1/a ∈ L¹(-1,1).
    Weak,
}

/// The controlled semilinear problem on a shared grid.
#[derive(Debug)]
pub struct ProblemSpec {
    grid: Grid,
    a: DiffusionCoefficient,
    f: Nonlinearity,
    u0: Field,
    control: PiecewiseStaticControl,
}

impl ProblemSpec {
    pub fn new(
        grid: Grid,
        a: DiffusionCoefficient,
        f: Nonlinearity,
        u0: Field,
        control: PiecewiseStaticControl,
    ) -> Result<Self> {
        if u0.grid() != grid {
            return Err(Error::GridMismatch(format!(
                "initial state on {} cells, problem grid has {}",
                u0.grid().n_cells(),
                grid.n_cells()
            )));
        }
        if control.grid() != grid {
            return Err(Error::GridMismatch(format!(
                "control on {} cells, problem grid has {}",
                control.grid().n_cells(),
                grid.n_cells()
            )));
        }
        Ok(Self {
            grid,
            a,
            f,
            u0,
            control,
        })
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn a(&self) -> &DiffusionCoefficient {
        &self.a
    }

    #[inline]
    pub fn f(&self) -> &Nonlinearity {
        &self.f
    }

    #[inline]
    pub fn u0(&self) -> &Field {
        &self.u0
    }

    #[inline]
    pub fn control(&self) -> &PiecewiseStaticControl {
        &self.control
    }

    /// q_ϑ = max{(1+ϑ)/(3-ϑ), 2ϑ-1}.
    pub fn q_theta(&self) -> f64 {
        q_theta(self.f.theta())
    }
}

pub fn q_theta(theta: f64) -> f64 {
    ((1.0 + theta) / (3.0 - theta)).max(2.0 * theta - 1.0)
}

/// One validated condition.
#[derive(Debug, Clone)]
pub struct AssumptionCheck {
    pub id: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Deterministic validation report; identical inputs give identical reports.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub q_theta: f64,
    /// Converged value of ∫|ξ_a|^{q_ϑ}, when it converged.
    pub xi_lq: Option<f64>,
    pub degeneracy: Degeneracy,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, id: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }
}

/// Lattice used for the sampled reaction checks.
#[derive(Debug, Clone, Copy)]
pub struct ValidationConfig {
    pub t_samples: usize,
    pub x_samples: usize,
    pub u_samples: usize,
    pub u_max: f64,
    /// Optional check of the time-regularity condition f_t(t,x,u)·u ≥ -ν u²
    /// by finite differences in t. Off by default: it only matters for
    /// well-posedness and most test reactions are time-independent.
    pub check_time_derivative: bool,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            t_samples: 32,
            x_samples: 32,
            u_samples: 64,
            u_max: 10.0,
            check_time_derivative: false,
        }
    }
}

/// Validate the standing assumptions with the default lattice.
pub fn validate_assumptions(spec: &ProblemSpec) -> Result<AssumptionReport> {
    validate_assumptions_with(spec, &ValidationConfig::default())
}

pub fn validate_assumptions_with(
    spec: &ProblemSpec,
    vc: &ValidationConfig,
) -> Result<AssumptionReport> {
    let mut checks = Vec::new();

    // Initial state has a finite discrete L² norm.
    let n0 = spec.u0.norm_l2();
    checks.push(AssumptionCheck {
        id: "initial_state",
        passed: n0.is_finite(),
        detail: format!("||u0|| = {n0}"),
    });

    // Bounded control profiles.
    let sup = spec.control.sup_abs();
    checks.push(AssumptionCheck {
        id: "control_bounded",
        passed: sup.is_finite(),
        detail: format!("sup |alpha| = {sup}"),
    });

    reaction_checks(spec, vc, &mut checks);
    let (xi_lq, degeneracy) = coefficient_checks(spec, &mut checks);

    Ok(AssumptionReport {
        checks,
        q_theta: spec.q_theta(),
        xi_lq,
        degeneracy,
    })
}

fn reaction_checks(spec: &ProblemSpec, vc: &ValidationConfig, checks: &mut Vec<AssumptionCheck>) {
    let f = &spec.f;
    let horizon = spec.control.horizon();
    let slack = 1e-9;

    let ts = |j: usize| horizon * j as f64 / (vc.t_samples - 1).max(1) as f64;
    let xs = |j: usize| -1.0 + 2.0 * (j as f64 + 0.5) / vc.x_samples as f64;
    let us = |j: usize| -vc.u_max + 2.0 * vc.u_max * j as f64 / (vc.u_samples - 1).max(1) as f64;

    let mut growth_ok = true;
    let mut growth_worst = 0.0f64;
    let mut zero_ok = true;
    for jt in 0..vc.t_samples {
        for jx in 0..vc.x_samples {
            let (t, x) = (ts(jt), xs(jx));
            if float::abs(f.eval(t, x, 0.0)) > slack {
                zero_ok = false;
            }
            for ju in 0..vc.u_samples {
                let u = us(ju);
                let bound = f.gamma0() * float::powf(float::abs(u), f.theta());
                let excess = float::abs(f.eval(t, x, u)) - bound;
                if excess > slack * (1.0 + bound) {
                    growth_ok = false;
                    growth_worst = growth_worst.max(excess);
                }
            }
        }
    }
    checks.push(AssumptionCheck {
        id: "reaction_growth",
        passed: growth_ok,
        detail: if growth_ok {
            format!("|f| <= {} |u|^{} on the lattice", f.gamma0(), f.theta())
        } else {
            format!("growth bound violated by {growth_worst}")
        },
    });
    checks.push(AssumptionCheck {
        id: "reaction_zero_at_origin",
        passed: zero_ok,
        detail: String::from("f(t,x,0) = 0 at sampled (t,x)"),
    });

    // One-sided condition on pairs: full u-lattice against an 8× decimated one.
    let mut onesided_ok = true;
    let mut onesided_worst = 0.0f64;
    for jt in (0..vc.t_samples).step_by(4) {
        for jx in (0..vc.x_samples).step_by(2) {
            let (t, x) = (ts(jt), xs(jx));
            for ju in 0..vc.u_samples {
                let u = us(ju);
                let fu = f.eval(t, x, u);
                for jv in (0..vc.u_samples).step_by(8) {
                    let v = us(jv);
                    if u == v {
                        continue;
                    }
                    let lhs = (fu - f.eval(t, x, v)) * (u - v);
                    let rhs = f.nu() * (u - v) * (u - v);
                    if lhs - rhs > slack * (1.0 + rhs) {
                        onesided_ok = false;
                        onesided_worst = onesided_worst.max(lhs - rhs);
                    }
                }
            }
        }
    }
    checks.push(AssumptionCheck {
        id: "reaction_one_sided",
        passed: onesided_ok,
        detail: if onesided_ok {
            format!("(f(u)-f(v))(u-v) <= {} (u-v)^2 on sampled pairs", f.nu())
        } else {
            format!("one-sided bound violated by {onesided_worst}")
        },
    });

    if vc.check_time_derivative {
        let mut ok = true;
        let dt = 1e-6 * horizon.max(1.0);
        for jt in 0..vc.t_samples {
            let t = ts(jt).min(horizon - dt).max(dt);
            for jx in (0..vc.x_samples).step_by(2) {
                let x = xs(jx);
                for ju in (0..vc.u_samples).step_by(4) {
                    let u = us(ju);
                    let ft = (f.eval(t + dt, x, u) - f.eval(t - dt, x, u)) / (2.0 * dt);
                    if ft * u < -f.nu() * u * u - slack * (1.0 + u * u) {
                        ok = false;
                    }
                }
            }
        }
        checks.push(AssumptionCheck {
            id: "reaction_time_derivative",
            passed: ok,
            detail: String::from("f_t(t,x,u) u >= -nu u^2 on sampled lattice"),
        });
    }
}

fn coefficient_checks(
    spec: &ProblemSpec,
    checks: &mut Vec<AssumptionCheck>,
) -> (Option<f64>, Degeneracy) {
    let a = &spec.a;
    let grid = spec.grid;

    // Interior positivity at centers and interior faces.
    let mut positive = true;
    let mut scale = 0.0f64;
    for i in 0..grid.n_cells() {
        let v = a.eval(grid.center(i));
        scale = scale.max(float::abs(v));
        if v <= 0.0 {
            positive = false;
        }
    }
    for i in 1..grid.n_cells() {
        if a.eval(grid.face(i)) <= 0.0 {
            positive = false;
        }
    }
    checks.push(AssumptionCheck {
        id: "diffusion_positive_inside",
        passed: positive,
        detail: format!("a > 0 at sampled interior points (max {scale})"),
    });

    let boundary = float::abs(a.eval(-1.0)).max(float::abs(a.eval(1.0)));
    let vanishes = boundary <= 1e-12 * scale.max(1.0);
    checks.push(AssumptionCheck {
        id: "diffusion_vanishes_at_endpoints",
        passed: vanishes,
        detail: format!("|a(±1)| = {boundary}"),
    });

    let xi_consistent = a.check_xi_closed_form().is_ok();
    checks.push(AssumptionCheck {
        id: "xi_closed_form_consistent",
        passed: xi_consistent,
        detail: if a.has_xi_closed_form() {
            String::from("d/dx xi_a matches 1/a to 1e-6 relative")
        } else {
            String::from("no closed form supplied (quadrature used)")
        },
    });

    // Degeneracy class: does 1/a integrate?
    let one_over_a = quad::truncated_integral(
        |x| 1.0 / a.eval(x),
        1e-7,
        1e-9,
        quad::DIVERGENCE_CAP,
    );
    let degeneracy = if vanishes && !one_over_a.converged() {
        Degeneracy::Strong
    } else {
        Degeneracy::Weak
    };

    // xi_a ∈ L^{q_theta}: endpoint-truncated integral of |xi|^q must settle.
    let q = spec.q_theta();
    let xi_integral = if vanishes && positive {
        a.xi_power_integral(q, 1e-7, 1e-9, quad::DIVERGENCE_CAP)
    } else {
        // A non-degenerate or sign-changing coefficient already failed above;
        // xi is then harmless and the integral trivially converges.
        Truncated::Converged(quad::adaptive_simpson(
            |x| float::powf(float::abs(a.xi(x)), q),
            -0.999,
            0.999,
            1e-8,
        ))
    };
    checks.push(AssumptionCheck {
        id: "xi_in_Lq",
        passed: xi_integral.converged(),
        detail: format!(
            "integral of |xi_a|^{q} {} at {}",
            if xi_integral.converged() {
                "converged"
            } else {
                "diverged"
            },
            xi_integral.value()
        ),
    });

    let xi_lq = xi_integral.converged().then(|| xi_integral.value());
    (xi_lq, degeneracy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn make_spec(a: DiffusionCoefficient, f: Nonlinearity) -> ProblemSpec {
        let grid = Grid::new(64).unwrap();
        ProblemSpec::new(
            grid,
            a,
            f,
            Field::constant(grid, 1.0),
            PiecewiseStaticControl::zero(grid, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn q_theta_formula() {
        // theta = 2: max{3, 3} = 3.
        assert_relative_eq!(q_theta(2.0), 3.0);
        assert_relative_eq!(q_theta(1.0), 1.0);
        assert_relative_eq!(q_theta(2.5), 7.0);
    }

    #[test]
    fn legendre_coefficient_passes() {
        let spec = make_spec(
            DiffusionCoefficient::legendre(),
            Nonlinearity::model(2.0, 0.0).unwrap(),
        );
        let report = validate_assumptions(&spec).unwrap();
        assert!(report.all_passed(), "{:?}", report.checks);
        assert_eq!(report.degeneracy, Degeneracy::Strong);
        assert!(report.xi_lq.is_some());
    }

    #[test]
    fn constant_coefficient_flagged_not_error() {
        let spec = make_spec(
            DiffusionCoefficient::new("flat", |_| 1.0),
            Nonlinearity::zero(2.0).unwrap(),
        );
        let report = validate_assumptions(&spec).unwrap();
        assert!(!report.check("diffusion_vanishes_at_endpoints").unwrap().passed);
        assert_eq!(report.degeneracy, Degeneracy::Weak);
    }

    #[test]
    fn steep_degeneracy_fails_xi_integrability() {
        // a = (1-x²)²: xi_a ~ 1/(1-x) near the boundary, so |xi|^q with
        // q >= 1 cannot integrate.
        let spec = make_spec(
            DiffusionCoefficient::power(2.0).unwrap(),
            Nonlinearity::model(2.0, 0.0).unwrap(),
        );
        let report = validate_assumptions(&spec).unwrap();
        assert!(!report.check("xi_in_Lq").unwrap().passed);
        assert_eq!(report.degeneracy, Degeneracy::Strong);
    }

    #[test]
    fn growth_violation_is_soft() {
        // Claimed gamma0 far below the actual growth.
        let f = Nonlinearity::new("liar", |_, _, u| 10.0 * u * u.abs(), 0.5, 2.0, 0.0).unwrap();
        let spec = make_spec(DiffusionCoefficient::legendre(), f);
        let report = validate_assumptions(&spec).unwrap();
        assert!(!report.check("reaction_growth").unwrap().passed);
    }

    #[test]
    fn grid_mismatch_is_hard_error() {
        let g1 = Grid::new(64).unwrap();
        let g2 = Grid::new(32).unwrap();
        let r = ProblemSpec::new(
            g1,
            DiffusionCoefficient::legendre(),
            Nonlinearity::zero(2.0).unwrap(),
            Field::constant(g2, 1.0),
            PiecewiseStaticControl::zero(g1, 1.0).unwrap(),
        );
        assert!(matches!(r, Err(Error::GridMismatch(_))));
    }

    #[test]
    fn reports_are_deterministic() {
        let spec = make_spec(
            DiffusionCoefficient::legendre(),
            Nonlinearity::model(2.0, 0.0).unwrap(),
        );
        let a = validate_assumptions(&spec).unwrap();
        let b = validate_assumptions(&spec).unwrap();
        assert_eq!(a.xi_lq.map(f64::to_bits), b.xi_lq.map(f64::to_bits));
        for (x, y) in a.checks.iter().zip(&b.checks) {
            assert_eq!(x.passed, y.passed);
            assert_eq!(x.detail, y.detail);
        }
    }

    #[test]
    fn xi_quadrature_matches_closed_form() {
        let a = DiffusionCoefficient::new("legendre-noclosed", |x| 1.0 - x * x);
        for x in [-0.9f64, -0.5, 0.0, 0.5, 0.9] {
            let expected = 0.5 * ((1.0 + x) / (1.0 - x)).ln();
            assert_relative_eq!(a.xi(x), expected, epsilon = 1e-8);
        }
    }
}
