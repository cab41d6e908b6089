//! Piecewise static multiplicative controls.
//!
//! A control is a finite list of time segments, each carrying one bounded
//! spatial profile: α(t,x) = c₁(x) on [t₀, t₁] and c_k(x) on (t_{k-1}, t_k]
//! for k ≥ 2. The first segment is closed on the left so every t in [0, T]
//! belongs to exactly one segment.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{Field, Grid};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct PiecewiseStaticControl {
    /// Breakpoints 0 = t₀ < t₁ < … < t_n = T.
    breakpoints: Vec<f64>,
    /// Profile of segment k lives between breakpoints k and k+1.
    profiles: Vec<Field>,
}

impl PiecewiseStaticControl {
    pub fn new(breakpoints: Vec<f64>, profiles: Vec<Field>) -> Result<Self> {
        if breakpoints.len() < 2 || profiles.len() + 1 != breakpoints.len() {
            return Err(Error::Parameter(format!(
                "{} breakpoints with {} profiles; need n+1 breakpoints for n segments",
                breakpoints.len(),
                profiles.len()
            )));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::Parameter(format!(
                "first breakpoint must be 0, got {}",
                breakpoints[0]
            )));
        }
        for w in breakpoints.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Parameter(format!(
                    "breakpoints must be strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        let grid = profiles[0].grid();
        for p in &profiles {
            p.check_same_grid(&profiles[0], "control profiles")?;
            if !p.norm_sup().is_finite() {
                return Err(Error::Parameter("control profile is not bounded".into()));
            }
        }
        let _ = grid;
        Ok(Self {
            breakpoints,
            profiles,
        })
    }

    /// A single zero segment on [0, horizon].
    pub fn zero(grid: Grid, horizon: f64) -> Result<Self> {
        Self::new(vec![0.0, horizon], vec![Field::zeros(grid)])
    }

    /// A single constant-in-space segment on [0, horizon].
    pub fn constant(grid: Grid, value: f64, horizon: f64) -> Result<Self> {
        Self::new(vec![0.0, horizon], vec![Field::constant(grid, value)])
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.profiles[0].grid()
    }

    #[inline]
    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    #[inline]
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    #[inline]
    pub fn profiles(&self) -> &[Field] {
        &self.profiles
    }

    #[inline]
    pub fn n_segments(&self) -> usize {
        self.profiles.len()
    }

    /// Index of the segment containing `t`: segment 0 on [t₀, t₁], segment k
    /// on (t_k, t_{k+1}].
    pub fn segment_index(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon()).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon(),
            });
        }
        // Count interior breakpoints strictly below t; t = t_k lands in segment k-1.
        Ok(self.breakpoints[1..self.breakpoints.len() - 1]
            .partition_point(|&b| b < t))
    }

    pub fn profile_at(&self, t: f64) -> Result<&Field> {
        Ok(&self.profiles[self.segment_index(t)?])
    }

    /// Value of the control at time `t` in cell `i`.
    pub fn eval(&self, t: f64, i: usize) -> Result<f64> {
        Ok(self.profile_at(t)?.get(i))
    }

    /// Largest positive part over all segments and cells, ‖α⁺‖_∞.
    pub fn sup_positive_part(&self) -> f64 {
        self.profiles
            .iter()
            .fold(0.0, |m: f64, p| m.max(p.max().max(0.0)))
    }

    /// Largest |α| over all segments and cells.
    pub fn sup_abs(&self) -> f64 {
        self.profiles.iter().fold(0.0, |m, p| m.max(p.norm_sup()))
    }

    /// Restriction to [0, t_end] (t_end must be an existing breakpoint or
    /// inside the final segment is fine too; segments past t_end are dropped
    /// and the last kept segment is clipped).
    pub fn clipped(&self, t_end: f64) -> Result<Self> {
        if !(t_end > 0.0 && t_end <= self.horizon()) {
            return Err(Error::TimeOutOfRange {
                t: t_end,
                horizon: self.horizon(),
            });
        }
        let k = self.segment_index(t_end)?;
        let mut breakpoints: Vec<f64> = self.breakpoints[..=k + 1].to_vec();
        breakpoints[k + 1] = t_end;
        let profiles = self.profiles[..=k].to_vec();
        Self::new(breakpoints, profiles)
    }
}
