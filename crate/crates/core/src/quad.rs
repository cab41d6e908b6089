//! Scalar quadrature and bracketing utilities.
//!
//! Two kinds of integrals show up throughout the crate: ordinary smooth
//! integrals on interior subintervals (adaptive Simpson), and integrals of
//! quantities that blow up at x = ±1, evaluated by shrinking an endpoint
//! truncation until the increments settle or exceed a divergence cap.

use crate::float;

/// Default divergence cap for endpoint-truncated integrals.
pub const DIVERGENCE_CAP: f64 = 1.0e8;

const MAX_DEPTH: usize = 44;
/// Refinement budget per [`adaptive_simpson`] call; near-singular integrands
/// stop refining here instead of recursing without bound.
const MAX_SPLITS: usize = 100_000;

fn simpson(fa: f64, fm: f64, fb: f64, len: f64) -> f64 {
    len / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    budget: &mut usize,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || *budget == 0 || float::abs(delta) <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    *budget -= 1;
    adaptive_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1, budget)
        + adaptive_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1, budget)
}

/// Adaptive Simpson rule on `[a, b]` with absolute tolerance `tol`.
///
/// The integrand must be finite on the closed interval.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    adaptive_simpson_budget(f, a, b, tol, MAX_SPLITS)
}

/// [`adaptive_simpson`] with an explicit refinement budget (used for nested
/// quadratures, where unbounded refinement would multiply).
pub fn adaptive_simpson_budget(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    budget: usize,
) -> f64 {
    if a == b {
        return 0.0;
    }
    let (a, b, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(fa, fm, fb, b - a);
    let mut budget = budget;
    sign * adaptive_rec(&f, a, fa, b, fb, m, fm, whole, tol, MAX_DEPTH, &mut budget)
}

/// Outcome of an endpoint-truncated integral over (-1, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncated {
    /// Increments fell below tolerance; the value is the converged integral.
    Converged(f64),
    /// The running value crossed the divergence cap.
    Diverged(f64),
}

impl Truncated {
    pub fn value(&self) -> f64 {
        match self {
            Truncated::Converged(v) | Truncated::Diverged(v) => *v,
        }
    }

    pub fn converged(&self) -> bool {
        matches!(self, Truncated::Converged(_))
    }
}

/// Integrate `f` over (-1, 1) by shrinking truncations `[-1+δ, 1-δ]`.
///
/// `δ` starts at 1/8 and is halved until two consecutive edge increments are
/// below `rtol·|total| + atol`, or the total exceeds `cap` (divergence), or
/// 44 halvings have happened (δ near the f64 resolution limit; treated as
/// divergence since the increments never settled).
pub fn truncated_integral(f: impl Fn(f64) -> f64, rtol: f64, atol: f64, cap: f64) -> Truncated {
    let delta0 = 0.125;
    let inner_tol = 0.1 * atol.max(1e-14);
    let strip_budget = 20_000;
    let mut total = adaptive_simpson_budget(&f, -1.0 + delta0, 1.0 - delta0, inner_tol, strip_budget);
    let mut delta = delta0;
    let mut settled = 0;
    for _ in 0..44 {
        let next = 0.5 * delta;
        let left = adaptive_simpson_budget(&f, -1.0 + next, -1.0 + delta, inner_tol, strip_budget);
        let right = adaptive_simpson_budget(&f, 1.0 - delta, 1.0 - next, inner_tol, strip_budget);
        total += left + right;
        if !total.is_finite() || float::abs(total) > cap {
            return Truncated::Diverged(total);
        }
        let increment = float::abs(left) + float::abs(right);
        if increment <= rtol * float::abs(total) + atol {
            settled += 1;
            if settled >= 2 {
                return Truncated::Converged(total);
            }
        } else {
            settled = 0;
        }
        delta = next;
    }
    Truncated::Diverged(total)
}

/// Largest `t` in `[lo, hi]` with `g(t) <= target`, for `g` nondecreasing.
///
/// Returns `None` if even `g(lo) > target`; returns `hi` if `g(hi) <= target`.
/// The search runs in log scale so thresholds many orders of magnitude below
/// `hi` are still located accurately.
pub fn largest_below(g: impl Fn(f64) -> f64, target: f64, lo: f64, hi: f64) -> Option<f64> {
    debug_assert!(lo > 0.0 && hi > lo);
    if g(hi) <= target {
        return Some(hi);
    }
    if g(lo) > target {
        return None;
    }
    let mut a = float::ln(lo);
    let mut b = float::ln(hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(float::exp(m)) <= target {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-14 * float::abs(b).max(1.0) {
            break;
        }
    }
    Some(float::exp(a))
}
