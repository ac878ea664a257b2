//! Bivariate copula families: densities, h-functions and their inverses.
//!
//! `h(u, v)` is the conditional distribution `P(U ≤ u | V = v) = ∂C(u,v)/∂v`.
//! Rotated families are defined from their base copula `C₀` as
//!
//! * 90°:  `C(u,v) = v − C₀(1−u, v)`, parameter negated
//! * 180°: `C(u,v) = u + v − 1 + C₀(1−u, 1−v)`
//! * 270°: `C(u,v) = u − C₀(u, 1−v)`, parameter negated

mod families;
mod fit;
mod tau;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bisect_increasing;

pub use fit::{fit, fit_with_tau, select_family, theta_from_tau};
pub use tau::{empirical_tau, independence_threshold};

pub(crate) const EPS: f64 = 1e-10;

pub(crate) fn clamp_unit(x: f64) -> f64 {
    x.clamp(EPS, 1.0 - EPS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CopulaFamily {
    Independence,
    Gaussian,
    StudentT,
    Clayton,
    Gumbel,
    Frank,
    Clayton90,
    Clayton180,
    Clayton270,
    Gumbel90,
    Gumbel180,
    Gumbel270,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Base {
    Independence,
    Gaussian,
    StudentT,
    Clayton,
    Gumbel,
    Frank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 12] = [
        CopulaFamily::Independence,
        CopulaFamily::Gaussian,
        CopulaFamily::StudentT,
        CopulaFamily::Clayton,
        CopulaFamily::Gumbel,
        CopulaFamily::Frank,
        CopulaFamily::Clayton90,
        CopulaFamily::Clayton180,
        CopulaFamily::Clayton270,
        CopulaFamily::Gumbel90,
        CopulaFamily::Gumbel180,
        CopulaFamily::Gumbel270,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CopulaFamily::Independence => "independence",
            CopulaFamily::Gaussian => "gaussian",
            CopulaFamily::StudentT => "student-t",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Gumbel => "gumbel",
            CopulaFamily::Frank => "frank",
            CopulaFamily::Clayton90 => "clayton90",
            CopulaFamily::Clayton180 => "clayton180",
            CopulaFamily::Clayton270 => "clayton270",
            CopulaFamily::Gumbel90 => "gumbel90",
            CopulaFamily::Gumbel180 => "gumbel180",
            CopulaFamily::Gumbel270 => "gumbel270",
        }
    }

    /// Number of free parameters.
    pub fn n_params(self) -> usize {
        match self {
            CopulaFamily::Independence => 0,
            CopulaFamily::StudentT => 2,
            _ => 1,
        }
    }

    pub(crate) fn base(self) -> Base {
        use CopulaFamily::*;
        match self {
            Independence => Base::Independence,
            Gaussian => Base::Gaussian,
            StudentT => Base::StudentT,
            Clayton | Clayton90 | Clayton180 | Clayton270 => Base::Clayton,
            Gumbel | Gumbel90 | Gumbel180 | Gumbel270 => Base::Gumbel,
            Frank => Base::Frank,
        }
    }

    pub(crate) fn rotation(self) -> Rotation {
        use CopulaFamily::*;
        match self {
            Clayton90 | Gumbel90 => Rotation::R90,
            Clayton180 | Gumbel180 => Rotation::R180,
            Clayton270 | Gumbel270 => Rotation::R270,
            _ => Rotation::R0,
        }
    }

    /// Family of the copula of `(V, U)` when `self` is the copula of `(U, V)`.
    pub fn transposed(self) -> CopulaFamily {
        use CopulaFamily::*;
        match self {
            Clayton90 => Clayton270,
            Clayton270 => Clayton90,
            Gumbel90 => Gumbel270,
            Gumbel270 => Gumbel90,
            other => other,
        }
    }

    /// Checks `theta` (and `theta2` for Student t) against the family range.
    pub fn validate(self, theta: f64, theta2: Option<f64>) -> Result<()> {
        use CopulaFamily::*;
        let ok = theta.is_finite()
            && match self {
                Independence => true,
                Gaussian => theta.abs() < 1.0,
                StudentT => {
                    theta.abs() < 1.0 && theta2.is_some_and(|nu| nu > 2.0 && nu.is_finite())
                }
                Clayton | Clayton180 => theta > 0.0,
                Clayton90 | Clayton270 => theta < 0.0,
                Gumbel | Gumbel180 => theta >= 1.0,
                Gumbel90 | Gumbel270 => theta <= -1.0,
                Frank => theta != 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{} with theta={theta}{}",
                self.name(),
                theta2.map(|t| format!(", theta2={t}")).unwrap_or_default()
            )))
        }
    }

    /// Search interval for `theta`, 1e-4 inside the open family range.
    pub fn theta_bounds(self) -> (f64, f64) {
        use CopulaFamily::*;
        match self {
            Independence => (0.0, 0.0),
            Gaussian | StudentT => (-0.9999, 0.9999),
            Clayton | Clayton180 => (1e-4, 28.0),
            Clayton90 | Clayton270 => (-28.0, -1e-4),
            Gumbel | Gumbel180 => (1.0001, 17.0),
            Gumbel90 | Gumbel270 => (-17.0, -1.0001),
            Frank => (-35.0, 35.0),
        }
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CopulaFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CopulaFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown copula family `{s}`")))
    }
}

/// A parameterized bivariate copula, optionally carrying fit diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedBicop {
    pub family: CopulaFamily,
    pub theta: f64,
    pub theta2: Option<f64>,
    pub loglik: f64,
    pub n_obs: usize,
}

impl FittedBicop {
    pub fn new(family: CopulaFamily, theta: f64, theta2: Option<f64>) -> Result<Self> {
        let theta = if family == CopulaFamily::Independence {
            0.0
        } else {
            theta
        };
        let theta2 = if family == CopulaFamily::StudentT {
            theta2
        } else {
            None
        };
        family.validate(theta, theta2)?;
        Ok(FittedBicop {
            family,
            theta,
            theta2,
            loglik: 0.0,
            n_obs: 0,
        })
    }

    pub fn independence() -> Self {
        FittedBicop {
            family: CopulaFamily::Independence,
            theta: 0.0,
            theta2: None,
            loglik: 0.0,
            n_obs: 0,
        }
    }

    /// Base-copula parameter: the rotations with negated ranges map back to
    /// the positive base range.
    fn base_params(&self) -> families::Params {
        let theta = match self.family.rotation() {
            Rotation::R90 | Rotation::R270 => -self.theta,
            _ => self.theta,
        };
        families::Params {
            base: self.family.base(),
            theta,
            nu: self.theta2.unwrap_or(0.0),
        }
    }

    pub fn check(&self) -> Result<()> {
        self.family.validate(self.theta, self.theta2)
    }

    /// Copula of `(V, U)`.
    pub fn transposed(&self) -> FittedBicop {
        FittedBicop {
            family: self.family.transposed(),
            ..*self
        }
    }

    pub fn log_density(&self, u: f64, v: f64) -> Result<f64> {
        self.check()?;
        Ok(self.log_density_unchecked(u, v))
    }

    pub(crate) fn log_density_unchecked(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let p = self.base_params();
        match self.family.rotation() {
            Rotation::R0 => p.log_pdf(u, v),
            Rotation::R90 => p.log_pdf(1.0 - u, v),
            Rotation::R180 => p.log_pdf(1.0 - u, 1.0 - v),
            Rotation::R270 => p.log_pdf(u, 1.0 - v),
        }
    }

    pub fn density(&self, u: f64, v: f64) -> Result<f64> {
        self.log_density(u, v).map(f64::exp)
    }

    /// Copula distribution function `C(u, v)`. Closed form for the
    /// Archimedean families, numerical quadrature for the elliptical ones.
    pub fn cdf(&self, u: f64, v: f64) -> Result<f64> {
        self.check()?;
        if u <= 0.0 || v <= 0.0 {
            return Ok(0.0);
        }
        if u >= 1.0 {
            return Ok(v.min(1.0));
        }
        if v >= 1.0 {
            return Ok(u);
        }
        let p = self.base_params();
        Ok(match self.family.rotation() {
            Rotation::R0 => p.cdf(u, v),
            Rotation::R90 => v - p.cdf(1.0 - u, v),
            Rotation::R180 => u + v - 1.0 + p.cdf(1.0 - u, 1.0 - v),
            Rotation::R270 => u - p.cdf(u, 1.0 - v),
        })
    }

    /// `P(U ≤ u | V = v)`.
    pub fn h_func(&self, u: f64, v: f64) -> Result<f64> {
        self.check()?;
        Ok(self.h_unchecked(u, v))
    }

    pub(crate) fn h_unchecked(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let p = self.base_params();
        let h = match self.family.rotation() {
            Rotation::R0 => p.h(u, v),
            Rotation::R90 => 1.0 - p.h(1.0 - u, v),
            Rotation::R180 => 1.0 - p.h(1.0 - u, 1.0 - v),
            Rotation::R270 => p.h(u, 1.0 - v),
        };
        h.clamp(0.0, 1.0)
    }

    /// `P(V ≤ v | U = u)`.
    pub fn h_rev(&self, u: f64, v: f64) -> Result<f64> {
        self.transposed().h_func(v, u)
    }

    /// Solves `h(u | v) = w` for `u`.
    pub fn inv_h(&self, w: f64, v: f64) -> Result<f64> {
        self.check()?;
        self.inv_h_unchecked(w, v)
    }

    pub(crate) fn inv_h_unchecked(&self, w: f64, v: f64) -> Result<f64> {
        let w = w.clamp(0.0, 1.0);
        let vc = clamp_unit(v);
        let p = self.base_params();
        let closed = match self.family.rotation() {
            Rotation::R0 => p.h_inv(w, vc),
            Rotation::R90 => p.h_inv(1.0 - w, vc).map(|x| 1.0 - x),
            Rotation::R180 => p.h_inv(1.0 - w, 1.0 - vc).map(|x| 1.0 - x),
            Rotation::R270 => p.h_inv(w, 1.0 - vc),
        };
        let h = |u: f64| self.h_unchecked(u, vc);
        if let Some(u) = closed {
            if u.is_finite() && (h(u) - w).abs() <= 1e-11 {
                return Ok(u.clamp(EPS, 1.0 - EPS));
            }
        }
        if w <= h(EPS) {
            return Ok(EPS);
        }
        if w >= h(1.0 - EPS) {
            return Ok(1.0 - EPS);
        }
        bisect_increasing(h, w, EPS, 1.0 - EPS, 1e-11, 200).ok_or_else(|| {
            Error::NonConvergence(format!(
                "{} theta={} at w={w}, v={v}",
                self.family.name(),
                self.theta
            ))
        })
    }

    /// Kendall's tau implied by the parameters.
    pub fn model_tau(&self) -> f64 {
        let tau = self.base_params().tau();
        match self.family.rotation() {
            Rotation::R90 | Rotation::R270 => -tau,
            _ => tau,
        }
    }

    /// Draws `n` pairs `(u, v)` by conditional inversion.
    pub fn simulate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check()?;
        let mut us = Vec::with_capacity(n);
        let mut vs = Vec::with_capacity(n);
        for _ in 0..n {
            let v: f64 = rng.random();
            let w: f64 = rng.random();
            us.push(self.inv_h_unchecked(w, v)?);
            vs.push(v);
        }
        Ok((us, vs))
    }

    /// Sum of log densities over paired observations.
    pub fn loglik(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter()
            .zip(v)
            .map(|(&a, &b)| self.log_density_unchecked(a, b))
            .sum()
    }

    pub fn aic(&self) -> f64 {
        2.0 * self.family.n_params() as f64 - 2.0 * self.loglik
    }
}
