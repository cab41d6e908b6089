//! Degenerate diffusion coefficients.
//!
//! A coefficient is a function a(x) on [-1, 1], positive inside and vanishing
//! at both endpoints. The companion quantity ξ_a(x) = ∫₀ˣ ds/a(s) controls
//! which Lebesgue spaces the weighted Sobolev space embeds into; it is kept
//! as an optional closed form with a quadrature fallback.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::float;
use crate::grid::Grid;
use crate::quad;
use crate::{Error, Result};

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Three-point Simpson increment over one short panel.
fn simpson3(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

/// Diffusion coefficient with optional analytic extras.
pub struct DiffusionCoefficient {
    name: String,
    a: Box<ScalarFn>,
    a_prime: Option<Box<ScalarFn>>,
    xi_closed_form: Option<Box<ScalarFn>>,
}

impl core::fmt::Debug for DiffusionCoefficient {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("DiffusionCoefficient")
            .field("name", &self.name)
            .field("has_a_prime", &self.a_prime.is_some())
            .field("has_xi_closed_form", &self.xi_closed_form.is_some())
            .finish()
    }
}

impl DiffusionCoefficient {
    pub fn new(
        name: impl Into<String>,
        a: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            a: Box::new(a),
            a_prime: None,
            xi_closed_form: None,
        }
    }

    pub fn with_derivative(
        mut self,
        a_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.a_prime = Some(Box::new(a_prime));
        self
    }

    pub fn with_xi_closed_form(
        mut self,
        xi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.xi_closed_form = Some(Box::new(xi));
        self
    }

    /// The coefficient of the Budyko–Sellers principal part, a(x) = 1 - x².
    ///
    /// Strongly degenerate: 1/a is not integrable, while
    /// ξ_a(x) = ½ ln((1+x)/(1-x)) lies in every L^p(-1, 1).
    pub fn legendre() -> Self {
        Self::new("legendre", |x| 1.0 - x * x)
            .with_derivative(|x| -2.0 * x)
            .with_xi_closed_form(|x| 0.5 * float::ln((1.0 + x) / (1.0 - x)))
    }

    /// Power-law degeneracy a(x) = (1 - x²)^k, k ≥ 1.
    pub fn power(k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Parameter(format!("power exponent must be > 0, got {k}")));
        }
        let a = move |x: f64| float::powf(1.0 - x * x, k);
        let ap = move |x: f64| -2.0 * k * x * float::powf(1.0 - x * x, k - 1.0);
        Ok(Self::new(format!("power:{k}"), a).with_derivative(ap))
    }

    /// Coefficient given by its values at the faces of `grid`, interpolated
    /// linearly in between.
    pub fn from_face_table(grid: Grid, faces: Vec<f64>) -> Result<Self> {
        if faces.len() != grid.n_cells() + 1 {
            return Err(Error::Parameter(format!(
                "face table needs {} values for {} cells, got {}",
                grid.n_cells() + 1,
                grid.n_cells(),
                faces.len()
            )));
        }
        let n = grid.n_cells() as f64;
        let a = move |x: f64| {
            let t = 0.5 * (x + 1.0) * n;
            let i = (t.max(0.0) as usize).min(faces.len() - 2);
            let frac = t - i as f64;
            faces[i] * (1.0 - frac) + faces[i + 1] * frac
        };
        Ok(Self::new("table", a))
    }

    #[inline]
    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.a)(x)
    }

    pub fn has_derivative(&self) -> bool {
        self.a_prime.is_some()
    }

    pub fn eval_prime(&self, x: f64) -> Option<f64> {
        self.a_prime.as_ref().map(|f| f(x))
    }

    pub fn has_xi_closed_form(&self) -> bool {
        self.xi_closed_form.is_some()
    }

    /// ξ_a(x) = ∫₀ˣ ds/a(s) for interior x: the closed form when present,
    /// otherwise adaptive quadrature. The quadrature carries a tight
    /// refinement budget because ξ evaluations are themselves nested inside
    /// the integrability checks.
    pub fn xi(&self, x: f64) -> f64 {
        if let Some(xi) = &self.xi_closed_form {
            return xi(x);
        }
        quad::adaptive_simpson_budget(|s| 1.0 / self.eval(s), 0.0, x, 1e-11, 4_000)
    }

    /// Endpoint-truncated integral of |ξ_a|^q over (-1, 1) by an outward
    /// geometric sweep that carries ξ along incrementally, so nothing nests.
    ///
    /// Strips [1-δ, 1-δ/2] (and mirrored) are resolved with composite
    /// Simpson; ξ advances by Simpson increments of 1/a on the same panels
    /// unless a closed form is available. A side converges when the strip
    /// increments either drop below `rtol·total + atol` or decay
    /// geometrically (ratio ≤ 0.95 repeatedly; the remaining tail is then
    /// summed as a geometric series). Divergence: the total crosses `cap`,
    /// or the strips never decay — the harmonic borderline included.
    pub fn xi_power_integral(&self, q: f64, rtol: f64, atol: f64, cap: f64) -> quad::Truncated {
        let mut total = 0.0;
        for sign in [1.0, -1.0] {
            let mut x_prev = 0.0;
            let mut xi_prev = 0.0;
            let mut delta = 1.0;
            let mut settled = 0;
            let mut geometric = 0;
            let mut prev_strip = f64::INFINITY;
            let mut side_done = false;
            for j in 0..48 {
                delta *= 0.5;
                let x_next = sign * (1.0 - delta);
                let mut strip = 0.0;
                let panels = 24;
                for p in 0..panels {
                    let xa = x_prev + (x_next - x_prev) * p as f64 / panels as f64;
                    let xb = x_prev + (x_next - x_prev) * (p + 1) as f64 / panels as f64;
                    let xm = 0.5 * (xa + xb);
                    let (xi_a, xi_m, xi_b);
                    if let Some(xi) = &self.xi_closed_form {
                        xi_a = xi(xa);
                        xi_m = xi(xm);
                        xi_b = xi(xb);
                    } else {
                        xi_a = xi_prev;
                        xi_m = xi_prev + simpson3(|s| 1.0 / self.eval(s), xa, xm);
                        xi_b = xi_m + simpson3(|s| 1.0 / self.eval(s), xm, xb);
                        xi_prev = xi_b;
                    }
                    let g = |v: f64| float::powf(float::abs(v), q);
                    strip += float::abs(xb - xa) / 6.0 * (g(xi_a) + 4.0 * g(xi_m) + g(xi_b));
                }
                total += strip;
                if !total.is_finite() || total > cap {
                    return quad::Truncated::Diverged(total);
                }
                if strip <= rtol * total + atol {
                    settled += 1;
                    if settled >= 2 {
                        side_done = true;
                        break;
                    }
                } else {
                    settled = 0;
                }
                let ratio = strip / prev_strip;
                if ratio <= 0.95 {
                    geometric += 1;
                } else {
                    geometric = 0;
                }
                if j >= 12 && geometric >= 3 {
                    total += strip * ratio / (1.0 - ratio);
                    side_done = true;
                    break;
                }
                prev_strip = strip;
                x_prev = x_next;
            }
            if !side_done {
                return quad::Truncated::Diverged(total);
            }
        }
        quad::Truncated::Converged(total)
    }

    /// Check the closed-form ξ_a against 1/a by a central difference at
    /// sampled interior points (relative tolerance 1e-6).
    pub fn check_xi_closed_form(&self) -> Result<()> {
        let Some(xi) = &self.xi_closed_form else {
            return Ok(());
        };
        let dx = 1e-6;
        for k in 1..32 {
            let x = -0.95 + 1.9 * k as f64 / 32.0;
            let numeric = (xi(x + dx) - xi(x - dx)) / (2.0 * dx);
            let expected = 1.0 / self.eval(x);
            if float::abs(numeric - expected) > 1e-6 * float::abs(expected) {
                return Err(Error::Parameter(format!(
                    "xi closed form disagrees with 1/a at x = {x}: {numeric} vs {expected}"
                )));
            }
        }
        Ok(())
    }
}
