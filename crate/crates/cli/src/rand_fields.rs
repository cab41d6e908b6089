//! Seeded random problem data for the verification sweeps.
//!
//! Fields are low-order cosine series with decaying amplitudes: smooth, zero
//! boundary slope (so midpoint quadrature stays high-order), and generic
//! enough to probe the inequalities. Everything is driven by ChaCha8 with
//! pinned seeds, so sweeps are reproducible across platforms.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bctl_core::{Field, Grid, PiecewiseStaticControl};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smooth field with `modes` cosine components, amplitudes in [-1,1]/(k+1)².
pub fn smooth(grid: Grid, rng: &mut ChaCha8Rng, modes: usize) -> Field {
    let coeffs: Vec<f64> = (0..modes)
        .map(|k| rng.random_range(-1.0..1.0) / ((k + 1) * (k + 1)) as f64)
        .collect();
    Field::from_fn(grid, |x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * (k as f64 * std::f64::consts::PI * x).cos())
            .sum()
    })
}

/// Smooth nonnegative field: the square of a smooth one plus a small floor.
pub fn smooth_nonnegative(grid: Grid, rng: &mut ChaCha8Rng, modes: usize) -> Field {
    let base = smooth(grid, rng, modes);
    let floor = rng.random_range(0.0..0.2);
    base.map(|v| v * v + floor)
}

/// Piecewise static control with 1–3 segments; profiles are smooth and
/// rescaled into [-bound, bound].
pub fn bounded_control(
    grid: Grid,
    rng: &mut ChaCha8Rng,
    horizon: f64,
    bound: f64,
) -> PiecewiseStaticControl {
    let n_segments = rng.random_range(1..=3usize);
    let mut cuts: Vec<f64> = (0..n_segments - 1)
        .map(|_| rng.random_range(0.2..0.8) * horizon)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 0.05 * horizon);
    let mut breakpoints = vec![0.0];
    breakpoints.extend(cuts);
    breakpoints.push(horizon);

    let profiles: Vec<Field> = (0..breakpoints.len() - 1)
        .map(|_| {
            let raw = smooth(grid, rng, 4);
            let sup = raw.norm_sup().max(1e-12);
            let scale = rng.random_range(0.3..1.0) * bound / sup;
            raw.scale(scale)
        })
        .collect();
    PiecewiseStaticControl::new(breakpoints, profiles).expect("generated control is well-formed")
}
