//! The discrete degenerate diffusion operator.
//!
//! Finite-volume form on cell centers:
//!
//! ```text
//! (A u)_i = [ a_{i+1/2}(u_{i+1} - u_i) - a_{i-1/2}(u_i - u_{i-1}) ] / h²  +  α_i u_i
//! ```
//!
//! with zero flux through the boundary faces. When a(±1) = 0 the boundary
//! flux vanishes identically, so the matrix is the exact discrete analog of
//! the weighted Neumann problem: symmetric tridiagonal, row sums zero for
//! α = 0, and its negative quadratic form equals the weighted seminorm.

use alloc::vec;
use alloc::vec::Vec;

use crate::coeff::DiffusionCoefficient;
use crate::grid::{Field, Grid};
use crate::{Error, Result};

/// Symmetric tridiagonal matrix for A = A₀ + αI on a fixed grid.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    grid: Grid,
    diag: Vec<f64>,
    offdiag: Vec<f64>,
    alpha: Option<Field>,
}

impl OperatorMatrix {
    /// Assemble A₀ + αI with `a` evaluated at the cell faces.
    pub fn assemble(a: &DiffusionCoefficient, alpha: Option<&Field>, grid: Grid) -> Self {
        let n = grid.n_cells();
        let h2 = grid.h() * grid.h();
        // Interior face conductances a_{i+1/2}/h²; boundary faces carry no flux.
        let offdiag: Vec<f64> = (1..n).map(|i| a.eval(grid.face(i)) / h2).collect();
        let mut diag = vec![0.0; n];
        for i in 0..n {
            let left = if i > 0 { offdiag[i - 1] } else { 0.0 };
            let right = if i < n - 1 { offdiag[i] } else { 0.0 };
            diag[i] = -(left + right);
            if let Some(al) = alpha {
                diag[i] += al.get(i);
            }
        }
        Self {
            grid,
            diag,
            offdiag,
            alpha: alpha.cloned(),
        }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    #[inline]
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    #[inline]
    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn alpha(&self) -> Option<&Field> {
        self.alpha.as_ref()
    }

    /// y = A u.
    pub fn apply_slice(&self, u: &[f64], y: &mut [f64]) {
        let n = self.n();
        debug_assert_eq!(u.len(), n);
        debug_assert_eq!(y.len(), n);
        for i in 0..n {
            let mut v = self.diag[i] * u[i];
            if i > 0 {
                v += self.offdiag[i - 1] * u[i - 1];
            }
            if i < n - 1 {
                v += self.offdiag[i] * u[i + 1];
            }
            y[i] = v;
        }
    }

    pub fn apply(&self, u: &Field) -> Field {
        let mut y = Field::zeros(self.grid);
        self.apply_slice(u.values(), y.values_mut());
        y
    }

    /// Rayleigh quotient of -A: ⟨-A u, u⟩ / ⟨u, u⟩ in the discrete L² product.
    pub fn rayleigh_neg(&self, u: &Field) -> f64 {
        let au = self.apply(u);
        -au.inner(u) / u.inner(u)
    }
}

/// The potential whose operator A₀ + α*I has `v` as ground state:
/// α*(x) = -(a(x) v_x)_x / v(x), for strictly positive `v`.
///
/// When analytic derivatives of `v` are supplied (and `a` carries one),
/// the product rule a'v' + a v'' is used. Otherwise the numerator is the
/// discrete divergence-form operator itself, which reproduces the analytic
/// potential to O(h²) and puts `v` in the kernel of the assembled matrix
/// exactly — the property the stage-2 control relies on.
pub fn alpha_star(
    a: &DiffusionCoefficient,
    v: &Field,
    derivatives: Option<(&Field, &Field)>,
) -> Result<Field> {
    if v.min() <= 0.0 {
        return Err(Error::TargetNotPositive);
    }
    let grid = v.grid();
    match derivatives {
        Some((dv, ddv)) if a.has_derivative() => {
            dv.check_same_grid(v, "alpha_star derivative")?;
            ddv.check_same_grid(v, "alpha_star second derivative")?;
            let mut out = Field::zeros(grid);
            for i in 0..grid.n_cells() {
                let x = grid.center(i);
                let num = a.eval_prime(x).unwrap() * dv.get(i) + a.eval(x) * ddv.get(i);
                out.values_mut()[i] = -num / v.get(i);
            }
            Ok(out)
        }
        _ => {
            let d = OperatorMatrix::assemble(a, None, grid);
            let dv = d.apply(v);
            let mut out = Field::zeros(grid);
            for i in 0..grid.n_cells() {
                out.values_mut()[i] = -dv.get(i) / v.get(i);
            }
            Ok(out)
        }
    }
}
