//! Time integration of the controlled semilinear problem.
//!
//! Three modes:
//! - [`evolve`]: IMEX stepping — the stiff linear part (degenerate diffusion
//!   plus the multiplicative control) is implicit, the reaction explicit;
//! - [`evolve_linear`]: exact per-segment spectral evolution of the linear
//!   problem (f ≡ 0), used both as a solver and as the reference the gap
//!   estimates compare against;
//! - [`evolve_picard`]: fixed-point iteration on the mild-solution map
//!   Λ(u)(t) = e^{tA}u₀ + ∫₀ᵗ e^{(t-s)A} f(s,·,u(s)) ds, quadratured on the
//!   trajectory stamps.
//!
//! Steps never straddle a control breakpoint; every breakpoint appears as a
//! trajectory stamp.

pub(crate) mod imex;
mod linear;
mod picard;

pub mod estimates;

pub use imex::{evolve, evolve_with};
pub use linear::{evolve_linear, evolve_linear_at};
pub use picard::{evolve_picard, PicardReport, PicardSegment};

use alloc::format;
use alloc::vec::Vec;

use crate::control::PiecewiseStaticControl;
use crate::grid::{Field, Grid};
use crate::{Error, Result};

/// Which integrator produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    Imex,
    Spectral,
    Picard,
}

impl SolverMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverMode::Imex => "imex",
            SolverMode::Spectral => "spectral",
            SolverMode::Picard => "picard",
        }
    }
}

/// Integrator knobs.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mode: SolverMode,
    /// Base time step; segments may use a smaller one (see below).
    pub dt: f64,
    /// Record every `stride`-th step (segment ends are always recorded).
    pub stride: usize,
    /// Fixed-point stopping tolerance (sup over stamps of the L² move).
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    /// Pivot breakdown threshold for the tridiagonal solve.
    pub pivot_tol: f64,
    /// Relative amplitude accuracy for stiff control segments: a segment of
    /// length L with |α| up to M takes at least (M·L)²/(2·rel_amp_tol) steps,
    /// which keeps the implicit-Euler error on the e^{αt} amplitude below
    /// rel_amp_tol.
    pub rel_amp_tol: f64,
    /// Hard cap on steps per segment.
    pub max_steps_per_segment: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: SolverMode::Imex,
            dt: 1e-3,
            stride: 32,
            picard_tol: 1e-10,
            picard_max_iters: 80,
            pivot_tol: 1e-12,
            rel_amp_tol: 2e-4,
            max_steps_per_segment: 20_000_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Parameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::Parameter(format!(
                "picard_tol must be positive, got {}",
                self.picard_tol
            )));
        }
        if self.stride == 0 || self.max_steps_per_segment == 0 {
            return Err(Error::Parameter(
                "stride and max_steps_per_segment must be nonzero".into(),
            ));
        }
        Ok(())
    }

    /// Number of steps for a segment of length `len` with control bounds
    /// `alpha_abs` = sup|α| and `alpha_plus` = sup α⁺ on the segment.
    ///
    /// Three constraints: the configured dt, the M-matrix cap
    /// dt ≤ 0.5/‖α⁺‖ (keeps the implicit matrix an M-matrix, hence the
    /// linear step positivity-preserving), and the amplitude-accuracy rule.
    pub(crate) fn segment_steps(&self, len: f64, alpha_abs: f64, alpha_plus: f64) -> usize {
        let mut dt = self.dt.min(len);
        if alpha_plus > 0.0 {
            dt = dt.min(0.5 / alpha_plus);
        }
        if alpha_abs > 0.0 {
            dt = dt.min(2.0 * self.rel_amp_tol / (alpha_abs * alpha_abs * len));
        }
        let n = crate::float::ceil(len / dt) as usize;
        n.clamp(1, self.max_steps_per_segment)
    }
}

/// Provenance attached to a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryMeta {
    pub mode: SolverMode,
    /// Base dt of the run, as bits (0 for the spectral mode).
    pub dt_bits: u64,
    /// Hash of the problem data and config that produced the run.
    pub spec_hash: u64,
}

impl TrajectoryMeta {
    pub fn dt(&self) -> f64 {
        f64::from_bits(self.dt_bits)
    }
}

/// Time-stamped states of one run. Stamps are strictly increasing, start at
/// 0, and include every control breakpoint up to the horizon.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Field>,
    meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<Field>, meta: TrajectoryMeta) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::Parameter(format!(
                "{} stamps with {} states",
                times.len(),
                states.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(Error::Parameter(format!(
                "trajectory must start at t = 0, got {}",
                times[0]
            )));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Parameter(format!(
                    "trajectory stamps must increase: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        for s in &states {
            s.check_same_grid(&states[0], "trajectory states")?;
        }
        Ok(Self {
            times,
            states,
            meta,
        })
    }

    #[inline]
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    #[inline]
    pub fn states(&self) -> &[Field] {
        &self.states
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.states[0].grid()
    }

    pub fn meta(&self) -> TrajectoryMeta {
        self.meta
    }

    pub fn initial_state(&self) -> &Field {
        &self.states[0]
    }

    pub fn final_state(&self) -> &Field {
        self.states.last().unwrap()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// State at an existing stamp (within 1e-12 of the horizon scale), if any.
    pub fn state_at(&self, t: f64) -> Option<&Field> {
        let tol = 1e-12 * self.final_time().max(1.0);
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= tol)
            .map(|i| &self.states[i])
    }

    /// Pointwise difference of two runs recorded on identical stamps.
    pub fn difference(&self, other: &Trajectory) -> Result<Trajectory> {
        if self.times != other.times {
            return Err(Error::Parameter(
                "trajectories recorded on different stamps".into(),
            ));
        }
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.sub(b))
            .collect();
        Trajectory::new(self.times.clone(), states, self.meta)
    }
}

/// Outcome of the nonnegativity check.
#[derive(Debug, Clone, Copy)]
pub struct NonnegativityReport {
    /// The initial state was itself nonnegative; when false the check is
    /// vacuous and `pass` is not meaningful.
    pub precondition_met: bool,
    pub pass: bool,
    /// Most negative value seen over all stamps and cells.
    pub min_excursion: f64,
    pub at_time: f64,
    pub at_cell: usize,
}

/// Verify the trajectory stayed nonnegative (up to `tol`), provided the
/// initial state was.
pub fn check_nonnegative(traj: &Trajectory, tol: f64) -> NonnegativityReport {
    let precondition_met = traj.initial_state().min() >= -tol;
    let mut min_excursion = f64::INFINITY;
    let mut at_time = 0.0;
    let mut at_cell = 0;
    for (t, state) in traj.times().iter().zip(traj.states()) {
        for (i, v) in state.values().iter().enumerate() {
            if *v < min_excursion {
                min_excursion = *v;
                at_time = *t;
                at_cell = i;
            }
        }
    }
    NonnegativityReport {
        precondition_met,
        pass: precondition_met && min_excursion >= -tol,
        min_excursion,
        at_time,
        at_cell,
    }
}

/// FNV-1a over f64 bit patterns; used for trajectory provenance hashes.
pub(crate) struct Fnv(u64);

impl Fnv {
    pub fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    pub fn write_u64(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn write_f64(&mut self, v: f64) {
        self.write_u64(v.to_bits());
    }

    pub fn write_str(&mut self, s: &str) {
        for byte in s.as_bytes() {
            self.0 ^= *byte as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

pub(crate) fn spec_hash(
    a: &crate::coeff::DiffusionCoefficient,
    f: Option<&crate::nonlin::Nonlinearity>,
    u0: &Field,
    control: &PiecewiseStaticControl,
    horizon: f64,
    cfg: &SolverConfig,
) -> u64 {
    let grid = u0.grid();
    let mut h = Fnv::new();
    h.write_u64(grid.n_cells() as u64);
    h.write_str(a.name());
    for i in 0..=16 {
        h.write_f64(a.eval(-1.0 + 2.0 * i as f64 / 16.0));
    }
    if let Some(f) = f {
        h.write_str(f.name());
        h.write_f64(f.gamma0());
        h.write_f64(f.theta());
        h.write_f64(f.nu());
    }
    for v in u0.values() {
        h.write_f64(*v);
    }
    for b in control.breakpoints() {
        h.write_f64(*b);
    }
    for p in control.profiles() {
        for v in p.values() {
            h.write_f64(*v);
        }
    }
    h.write_f64(horizon);
    h.write_str(cfg.mode.as_str());
    h.write_f64(cfg.dt);
    h.write_u64(cfg.stride as u64);
    h.finish()
}

/// Stamp recorder that enforces strict monotonicity; a stamp whose f64 time
/// collides with the previous one keeps the later state instead of adding a
/// duplicate (only possible inside extremely short control segments).
pub(crate) struct Recorder {
    times: Vec<f64>,
    states: Vec<Field>,
}

impl Recorder {
    pub fn new(u0: &Field) -> Self {
        Self {
            times: alloc::vec![0.0],
            states: alloc::vec![u0.clone()],
        }
    }

    pub fn push(&mut self, t: f64, state: &Field) {
        if t > *self.times.last().unwrap() {
            self.times.push(t);
            self.states.push(state.clone());
        } else {
            *self.states.last_mut().unwrap() = state.clone();
        }
    }

    pub fn finish(self, meta: TrajectoryMeta) -> Result<Trajectory> {
        Trajectory::new(self.times, self.states, meta)
    }
}
