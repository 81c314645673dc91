//! First-order minorants of the convex terms in the rate constraints.
//!
//! Each function below is convex, so its tangent at the expansion point is
//! a global under-estimator. Replacing the convex side of a
//! `convex <= concave` style constraint by the tangent gives a convex
//! restriction that is exact at the expansion point.

use serde::{Deserialize, Serialize};

use crate::conic::AffineExpr;
use crate::error::{Error, Result};
use crate::fbl;

/// Largest exponent accepted before `exp` would overflow.
pub const EXP_GUARD: f64 = 700.0;
/// Smallest expansion point accepted by [`minorant_dispersion`].
pub const BETA_MIN: f64 = 1e-12;
/// Expansion points below this are lifted before linearizing.
pub const BETA_CLAMP: f64 = 1e-6;

/// `value + slope (z - z0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tangent1 {
    pub z0: f64,
    pub value: f64,
    pub slope: f64,
}

impl Tangent1 {
    pub fn eval(&self, z: f64) -> f64 {
        self.value + self.slope * (z - self.z0)
    }

    /// The tangent as an expression in variable `var`.
    pub fn expr(&self, var: usize) -> AffineExpr {
        self.apply(&AffineExpr::var(var))
    }

    /// The tangent composed with an affine argument.
    pub fn apply(&self, z: &AffineExpr) -> AffineExpr {
        z.clone() * self.slope + (self.value - self.slope * self.z0)
    }
}

/// `value + dx (x - x0) + dy (y - y0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tangent2 {
    pub x0: f64,
    pub y0: f64,
    pub value: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Tangent2 {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.value + self.dx * (x - self.x0) + self.dy * (y - self.y0)
    }

    pub fn expr(&self, x_var: usize, y_var: usize) -> AffineExpr {
        self.apply(&AffineExpr::var(x_var), &AffineExpr::var(y_var))
    }

    pub fn apply(&self, x: &AffineExpr, y: &AffineExpr) -> AffineExpr {
        x.clone() * self.dx + y.clone() * self.dy + (self.value - self.dx * self.x0 - self.dy * self.y0)
    }
}

/// `f2(beta) = -D sqrt(1 - (1 + beta)^-2)`.
pub fn dispersion_term(beta: f64, d: f64) -> f64 {
    -d * fbl::dispersion(beta.max(0.0)).unwrap_or(0.0).sqrt()
}

/// Tangent of [`dispersion_term`] at `beta0`:
/// slope `-D / (sqrt(1 - (1 + beta0)^-2) (1 + beta0)^3)`.
pub fn minorant_dispersion(beta0: f64, d: f64) -> Result<Tangent1> {
    if d == 0.0 {
        return Ok(Tangent1 {
            z0: beta0,
            value: 0.0,
            slope: 0.0,
        });
    }
    if !(beta0 > BETA_MIN) || !beta0.is_finite() {
        return Err(Error::DegenerateExpansion {
            function: "minorant_dispersion",
            value: beta0,
        });
    }
    let lam = fbl::dispersion(beta0)?;
    let z = 1.0 + beta0;
    Ok(Tangent1 {
        z0: beta0,
        value: -d * lam.sqrt(),
        slope: -d / (lam.sqrt() * z * z * z),
    })
}

/// Tangent of `exp(x - y)` at `(x0, y0)`.
pub fn minorant_exp_diff(x0: f64, y0: f64) -> Result<Tangent2> {
    let s = x0 - y0;
    if !(s <= EXP_GUARD) || !x0.is_finite() || !y0.is_finite() {
        return Err(Error::DegenerateExpansion {
            function: "minorant_exp_diff",
            value: s,
        });
    }
    let e = s.exp();
    Ok(Tangent2 {
        x0,
        y0,
        value: e,
        dx: e,
        dy: -e,
    })
}

/// Tangent of `exp(y)` at `y0`.
pub fn minorant_exp(y0: f64) -> Result<Tangent1> {
    if !(y0 <= EXP_GUARD) || !y0.is_finite() {
        return Err(Error::DegenerateExpansion {
            function: "minorant_exp",
            value: y0,
        });
    }
    let e = y0.exp();
    Ok(Tangent1 {
        z0: y0,
        value: e,
        slope: e,
    })
}
