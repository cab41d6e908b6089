//! Discrete weighted norms and embedding diagnostics.
//!
//! Spatial norms: the discrete L^p norms by the midpoint rule, the weighted
//! seminorm |u|_{1,a} = ‖√a u_x‖ by face-centered differences over interior
//! faces (boundary faces carry a = 0 and contribute nothing), and
//! ‖u‖²_{1,a} = ‖u‖² + |u|²_{1,a}. The seminorm is exactly the quadratic
//! form of the assembled operator: ⟨-A₀u, u⟩ = |u|²_{1,a}.
//!
//! Trajectory norms: ‖u‖²_𝓑 = sup_t ‖u(t)‖² + 2∫₀ᵀ∫ a u_x², and the
//! stronger ‖u‖²_𝓗 = sup_t(‖u‖² + |u|²_{1,a}) + ∫₀ᵀ(‖u_t‖² + ‖(a u_x)_x‖²),
//! with time integrals over the recorded stamps.

use alloc::vec::Vec;

use crate::coeff::DiffusionCoefficient;
use crate::float;
use crate::grid::Field;
use crate::operator::OperatorMatrix;
use crate::quad;
use crate::solver::Trajectory;
use crate::{Error, Result};

/// Spatial norms of one field.
#[derive(Debug, Clone)]
pub struct NormBundle {
    pub l2: f64,
    /// |u|_{1,a} = ‖√a u_x‖.
    pub seminorm_1a: f64,
    /// ‖u‖_{1,a} = sqrt(l2² + seminorm²).
    pub norm_1a: f64,
    /// Requested (p, ‖u‖_{L^p}) pairs.
    pub lp: Vec<(f64, f64)>,
}

impl NormBundle {
    pub fn lp(&self, p: f64) -> Option<f64> {
        self.lp
            .iter()
            .find(|(q, _)| *q == p)
            .map(|(_, v)| *v)
    }
}

/// Weighted seminorm squared: Σ over interior faces of a·((u_{i+1}-u_i)/h)²·h.
pub fn seminorm_1a_sq(u: &Field, a: &DiffusionCoefficient) -> f64 {
    let grid = u.grid();
    let h = grid.h();
    let mut acc = 0.0;
    for i in 0..grid.n_cells() - 1 {
        let slope = (u.get(i + 1) - u.get(i)) / h;
        acc += a.eval(grid.face(i + 1)) * slope * slope;
    }
    acc * h
}

/// Discrete L^p norm by the midpoint rule.
pub fn lp_norm(u: &Field, p: f64) -> f64 {
    let h = u.grid().h();
    let mut acc = 0.0;
    for v in u.values() {
        acc += float::powf(float::abs(*v), p);
    }
    float::powf(h * acc, 1.0 / p)
}

/// All spatial norms of `u`, with L^p entries for each requested exponent.
pub fn norms(u: &Field, a: &DiffusionCoefficient, ps: &[f64]) -> NormBundle {
    let l2 = u.norm_l2();
    let semi_sq = seminorm_1a_sq(u, a);
    NormBundle {
        l2,
        seminorm_1a: float::sqrt(semi_sq),
        norm_1a: float::sqrt(l2 * l2 + semi_sq),
        lp: ps.iter().map(|&p| (p, lp_norm(u, p))).collect(),
    }
}

/// Norms of a trajectory in the solution spaces.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryNorms {
    /// sqrt(sup_t ‖u‖² + dissipation).
    pub b_norm: f64,
    /// The stronger norm with time-derivative and flux-divergence terms.
    pub h_norm: f64,
    pub sup_l2: f64,
    /// 2 ∫₀ᵀ ∫ a u_x² dx dt.
    pub dissipation: f64,
}

/// Evaluate the trajectory norms; time integrals by the trapezoid rule over
/// the recorded stamps, u_t by forward differences, (a u_x)_x by the same
/// discrete operator the solver uses.
pub fn trajectory_norms(traj: &Trajectory, a: &DiffusionCoefficient) -> Result<TrajectoryNorms> {
    if traj.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: traj.len(),
        });
    }
    let grid = traj.grid();
    let op = OperatorMatrix::assemble(a, None, grid);
    let times = traj.times();
    let states = traj.states();

    let mut sup_l2_sq = 0.0f64;
    let mut sup_1a_sq = 0.0f64;
    let mut semi: Vec<f64> = Vec::with_capacity(states.len());
    let mut flux_div: Vec<f64> = Vec::with_capacity(states.len());
    for s in states {
        let l2_sq = s.inner(s);
        let semi_sq = seminorm_1a_sq(s, a);
        sup_l2_sq = sup_l2_sq.max(l2_sq);
        sup_1a_sq = sup_1a_sq.max(l2_sq + semi_sq);
        semi.push(semi_sq);
        let au = op.apply(s);
        flux_div.push(au.inner(&au));
    }

    let mut dissipation = 0.0;
    let mut flux_int = 0.0;
    let mut ut_int = 0.0;
    for j in 0..times.len() - 1 {
        let dt = times[j + 1] - times[j];
        dissipation += dt * (semi[j] + semi[j + 1]);
        flux_int += 0.5 * dt * (flux_div[j] + flux_div[j + 1]);
        let du = states[j + 1].sub(&states[j]);
        let ut_sq = du.inner(&du) / (dt * dt);
        ut_int += dt * ut_sq;
    }
    // dissipation already carries the factor 2: 2·trapezoid = Σ dt (f_j + f_{j+1}).

    Ok(TrajectoryNorms {
        b_norm: float::sqrt(sup_l2_sq + dissipation),
        h_norm: float::sqrt(sup_1a_sq + ut_int + flux_int),
        sup_l2: float::sqrt(sup_l2_sq),
        dissipation,
    })
}

/// Space-time L^p norm over the trajectory's window (midpoint in space,
/// trapezoid in time).
pub fn lp_space_time(traj: &Trajectory, p: f64) -> Result<f64> {
    if traj.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: traj.len(),
        });
    }
    let h = traj.grid().h();
    let times = traj.times();
    let per_stamp: Vec<f64> = traj
        .states()
        .iter()
        .map(|s| {
            s.values()
                .iter()
                .map(|v| float::powf(float::abs(*v), p))
                .sum::<f64>()
                * h
        })
        .collect();
    let mut acc = 0.0;
    for j in 0..times.len() - 1 {
        acc += 0.5 * (times[j + 1] - times[j]) * (per_stamp[j] + per_stamp[j + 1]);
    }
    Ok(float::powf(acc, 1.0 / p))
}

/// Splitting u = u⁺ - u⁻ into nonnegative parts with disjoint supports.
pub fn positive_negative_parts(u: &Field) -> (Field, Field) {
    (u.map(|v| v.max(0.0)), u.map(|v| (-v).max(0.0)))
}

/// The citable constant of the L^{2p} embedding:
/// c_a = ½ ∫ sqrt(|ξ_a|) dx, by endpoint-truncated quadrature.
pub fn embedding_constant(a: &DiffusionCoefficient) -> Result<f64> {
    let r = quad::truncated_integral(
        |x| float::sqrt(float::abs(a.xi(x))),
        1e-8,
        1e-10,
        quad::DIVERGENCE_CAP,
    );
    if !r.converged() {
        return Err(Error::NotIntegrable("sqrt(|xi_a|)".into()));
    }
    Ok(0.5 * r.value())
}

/// One embedding measurement ‖u‖_{L^{2p}} vs the weighted norm.
#[derive(Debug, Clone, Copy)]
pub struct EmbeddingCheck {
    /// ‖u‖_{L^{2p}} / ‖u‖_{1,a}.
    pub ratio: f64,
    /// 2·max{c_a, √2/2}, the constant the embedding proof produces.
    pub bound: f64,
    pub pass: bool,
}

/// Measure the embedding inequality for one field; `tol_disc` absorbs
/// quadrature error in the pass flag (ratio ≤ bound·(1+tol_disc)).
pub fn embedding_ratio(
    u: &Field,
    a: &DiffusionCoefficient,
    p: f64,
    tol_disc: f64,
) -> Result<EmbeddingCheck> {
    embedding_ratio_with_constant(u, a, p, embedding_constant(a)?, tol_disc)
}

/// Same as [`embedding_ratio`] with a precomputed c_a (for sweeps).
pub fn embedding_ratio_with_constant(
    u: &Field,
    a: &DiffusionCoefficient,
    p: f64,
    c_a: f64,
    tol_disc: f64,
) -> Result<EmbeddingCheck> {
    if p < 1.0 {
        return Err(Error::Parameter("embedding exponent p must be >= 1".into()));
    }
    let b = norms(u, a, &[2.0 * p]);
    if b.norm_1a == 0.0 {
        return Err(Error::Parameter(
            "embedding ratio needs a nonzero field".into(),
        ));
    }
    let ratio = b.lp(2.0 * p).unwrap() / b.norm_1a;
    let bound = 2.0 * c_a.max(core::f64::consts::FRAC_1_SQRT_2);
    Ok(EmbeddingCheck {
        ratio,
        bound,
        pass: ratio <= bound * (1.0 + tol_disc),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::solver::{SolverMode, Trajectory, TrajectoryMeta};
    use approx::assert_relative_eq;

    fn meta() -> TrajectoryMeta {
        TrajectoryMeta {
            mode: SolverMode::Imex,
            dt_bits: 0,
            spec_hash: 0,
        }
    }

    #[test]
    fn constant_field_norms() {
        let g = Grid::new(128).unwrap();
        let u = Field::constant(g, 1.0);
        let a = DiffusionCoefficient::legendre();
        let b = norms(&u, &a, &[4.0]);
        assert_relative_eq!(b.l2, core::f64::consts::SQRT_2, epsilon = 1e-13);
        assert_eq!(b.seminorm_1a, 0.0);
        assert_relative_eq!(b.norm_1a, b.l2, epsilon = 1e-13);
        assert_relative_eq!(b.lp(4.0).unwrap(), float::powf(2.0, 0.25), epsilon = 1e-13);
    }

    #[test]
    fn linear_field_seminorm() {
        // u = x, a = 1-x²: |u|²_{1,a} ≈ ∫(1-x²) = 4/3 with O(h²) error.
        let g = Grid::new(256).unwrap();
        let u = Field::from_fn(g, |x| x);
        let a = DiffusionCoefficient::legendre();
        let semi = seminorm_1a_sq(&u, &a);
        assert_relative_eq!(semi, 4.0 / 3.0, max_relative = 1e-4);
    }

    #[test]
    fn seminorm_is_operator_quadratic_form() {
        let g = Grid::new(96).unwrap();
        let a = DiffusionCoefficient::legendre();
        let u = Field::from_fn(g, |x| (1.7 * x).sin() + 0.3);
        let op = OperatorMatrix::assemble(&a, None, g);
        let lhs = -op.apply(&u).inner(&u);
        assert_relative_eq!(lhs, seminorm_1a_sq(&u, &a), max_relative = 1e-12);
    }

    #[test]
    fn l2_matches_simpson_oracle() {
        // Independent oracle: composite Simpson on the closed form at 8x
        // resolution. Fields with zero boundary slope keep the midpoint-rule
        // error at O(h⁴).
        let g = Grid::new(512).unwrap();
        let f = |x: f64| {
            1.0 + (core::f64::consts::PI * x).cos() + 0.3 * (2.0 * core::f64::consts::PI * x).cos()
        };
        let u = Field::from_fn(g, f);
        let panels = 8 * 512;
        let mut acc = 0.0;
        let w = 2.0 / panels as f64;
        for j in 0..panels {
            let x0 = -1.0 + j as f64 * w;
            let (f0, fm, f1) = (f(x0), f(x0 + 0.5 * w), f(x0 + w));
            acc += w / 6.0 * (f0 * f0 + 4.0 * fm * fm + f1 * f1);
        }
        assert_relative_eq!(u.norm_l2(), acc.sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn norm_chain_l2_below_weighted() {
        let g = Grid::new(64).unwrap();
        let a = DiffusionCoefficient::legendre();
        for k in 0..10 {
            let u = Field::from_fn(g, |x| (k as f64 * x).sin() + 0.1 * k as f64);
            let b = norms(&u, &a, &[]);
            assert!(b.l2 <= b.norm_1a + 1e-14);
        }
    }

    #[test]
    fn parts_split_exactly() {
        let g = Grid::new(64).unwrap();
        let u = Field::from_fn(g, |x| x);
        let (plus, minus) = positive_negative_parts(&u);
        for i in 0..64 {
            assert_eq!(plus.get(i) - minus.get(i), u.get(i));
            assert!(plus.get(i) * minus.get(i) == 0.0);
            assert!(plus.get(i) >= 0.0 && minus.get(i) >= 0.0);
        }
        let norm_sq = u.inner(&u);
        assert_relative_eq!(
            plus.inner(&plus) + minus.inner(&minus),
            norm_sq,
            epsilon = 1e-13
        );
    }

    #[test]
    fn nonnegative_field_has_no_negative_part() {
        let g = Grid::new(32).unwrap();
        let u = Field::from_fn(g, |x| 1.0 + x * x);
        let (_, minus) = positive_negative_parts(&u);
        assert_eq!(minus.norm_sup(), 0.0);
    }

    #[test]
    fn constant_trajectory_b_norm() {
        let g = Grid::new(64).unwrap();
        let c = 2.5;
        let u = Field::constant(g, c);
        let traj = Trajectory::new(
            alloc::vec![0.0, 0.5, 1.0],
            alloc::vec![u.clone(), u.clone(), u],
            meta(),
        )
        .unwrap();
        let a = DiffusionCoefficient::legendre();
        let n = trajectory_norms(&traj, &a).unwrap();
        assert_relative_eq!(n.b_norm, core::f64::consts::SQRT_2 * c, epsilon = 1e-12);
        assert_eq!(n.dissipation, 0.0);
        // No time variation and (a·0)' = 0: the h-norm reduces to the sup term.
        assert_relative_eq!(n.h_norm, n.sup_l2, epsilon = 1e-10);
    }

    #[test]
    fn dissipation_scales_linearly_in_horizon() {
        let g = Grid::new(64).unwrap();
        let u = Field::from_fn(g, |x| x * x);
        let a = DiffusionCoefficient::legendre();
        let make = |t_end: f64| {
            Trajectory::new(
                alloc::vec![0.0, 0.5 * t_end, t_end],
                alloc::vec![u.clone(), u.clone(), u.clone()],
                meta(),
            )
            .unwrap()
        };
        let n1 = trajectory_norms(&make(1.0), &a).unwrap();
        let n2 = trajectory_norms(&make(2.0), &a).unwrap();
        assert_relative_eq!(n2.dissipation, 2.0 * n1.dissipation, max_relative = 1e-12);
    }

    #[test]
    fn too_short_trajectory_rejected() {
        let g = Grid::new(32).unwrap();
        let traj =
            Trajectory::new(alloc::vec![0.0], alloc::vec![Field::zeros(g)], meta()).unwrap();
        assert!(matches!(
            trajectory_norms(&traj, &DiffusionCoefficient::legendre()),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn embedding_constant_field() {
        // ratio = 2^{1/2p}/√2 ≤ 1 and bound ≥ √2 always.
        let g = Grid::new(128).unwrap();
        let a = DiffusionCoefficient::legendre();
        let u = Field::constant(g, 3.0);
        for p in [2.0, 3.0] {
            let c = embedding_ratio(&u, &a, p, 0.05).unwrap();
            assert!(c.ratio <= 1.0);
            assert!(c.bound >= core::f64::consts::SQRT_2);
            assert!(c.pass);
        }
    }

    #[test]
    fn embedding_zero_mean_spike() {
        let g = Grid::new(256).unwrap();
        let a = DiffusionCoefficient::legendre();
        let spike = Field::from_fn(g, |x| (-(x * x) * 40.0).exp() - 0.19);
        let c = embedding_ratio(&spike, &a, 2.0, 0.05).unwrap();
        assert!(c.pass, "ratio {} vs bound {}", c.ratio, c.bound);
    }

    #[test]
    fn space_time_lp_of_constant() {
        let g = Grid::new(32).unwrap();
        let u = Field::constant(g, 1.0);
        let traj = Trajectory::new(
            alloc::vec![0.0, 1.0],
            alloc::vec![u.clone(), u],
            meta(),
        )
        .unwrap();
        // ‖1‖_{L^p(Q)} = (T·2)^{1/p}.
        assert_relative_eq!(
            lp_space_time(&traj, 3.0).unwrap(),
            float::powf(2.0, 1.0 / 3.0),
            epsilon = 1e-12
        );
    }
}
