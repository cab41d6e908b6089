//! Reaction terms f(t, x, u).
//!
//! The admissible class is superlinear with exponent ϑ ∈ [1, 3): a growth
//! bound |f| ≤ γ₀ |u|^ϑ and a one-sided condition
//! (f(t,x,u) - f(t,x,v))(u - v) ≤ ν (u - v)², which is what enters every
//! stability constant. `nu` here is that one-sided constant; for monotone
//! decreasing reactions it is 0.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;

use crate::float;
use crate::{Error, Result};

type ReactionFn = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;

pub struct Nonlinearity {
    name: String,
    f: Box<ReactionFn>,
    f_u: Option<Box<ReactionFn>>,
    gamma0: f64,
    theta: f64,
    nu: f64,
}

impl core::fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("gamma0", &self.gamma0)
            .field("theta", &self.theta)
            .field("nu", &self.nu)
            .finish()
    }
}

impl Nonlinearity {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        gamma0: f64,
        theta: f64,
        nu: f64,
    ) -> Result<Self> {
        if !(1.0..3.0).contains(&theta) {
            return Err(Error::Parameter(format!(
                "growth exponent theta must lie in [1, 3), got {theta}"
            )));
        }
        if gamma0 < 0.0 || nu < 0.0 {
            return Err(Error::Parameter(format!(
                "gamma0 and nu must be nonnegative, got {gamma0}, {nu}"
            )));
        }
        Ok(Self {
            name: name.into(),
            f: Box::new(f),
            f_u: None,
            gamma0,
            theta,
            nu,
        })
    }

    pub fn with_derivative(
        mut self,
        f_u: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.f_u = Some(Box::new(f_u));
        self
    }

    /// f ≡ 0 with a given exponent (the exponent still parameterizes the
    /// estimate constants downstream).
    pub fn zero(theta: f64) -> Result<Self> {
        Self::new("zero", |_, _, _| 0.0, 0.0, theta, 0.0)
    }

    /// The built-in model reaction
    /// f(t,x,u) = c · min(|u|^{ϑ-1}, 1) u - |u|^{ϑ-1} u
    /// with a constant coefficient c.
    ///
    /// Growth constant: γ₀ = 1 + |c|. One-sided constant: 0 when c ≤ 0
    /// (the map is nonincreasing in u), otherwise max(c, (c-1)ϑ, 0).
    pub fn model(theta: f64, c: f64) -> Result<Self> {
        let tm1 = theta - 1.0;
        // theta = 2 is the hot path in the solver loops; skip powf there.
        let pow_tm1 = move |u: f64| {
            if tm1 == 1.0 {
                float::abs(u)
            } else {
                float::powf(float::abs(u), tm1)
            }
        };
        let f = move |_t: f64, _x: f64, u: f64| {
            let p = pow_tm1(u);
            c * p.min(1.0) * u - p * u
        };
        let f_u = move |_t: f64, _x: f64, u: f64| {
            let p = pow_tm1(u);
            let inner = if p < 1.0 { theta * p } else { 1.0 };
            c * inner - theta * p
        };
        let gamma0 = 1.0 + float::abs(c);
        let nu = if c <= 0.0 {
            0.0
        } else {
            c.max((c - 1.0) * theta).max(0.0)
        };
        Ok(Self::new(format!("model:{theta}:{c}"), f, gamma0, theta, nu)?.with_derivative(f_u))
    }

    #[inline]
    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64, u: f64) -> f64 {
        (self.f)(t, x, u)
    }

    pub fn eval_u(&self, t: f64, x: f64, u: f64) -> Option<f64> {
        self.f_u.as_ref().map(|f| f(t, x, u))
    }

    #[inline]
    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    /// Growth exponent ϑ.
    #[inline]
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// One-sided constant ν.
    #[inline]
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn is_zero(&self) -> bool {
        self.gamma0 == 0.0
    }
}
