//! Unrotated base copulas. All bases are exchangeable, so `h` serves both
//! conditioning directions.

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use super::Base;
use crate::numeric::{adaptive_simpson, debye1, norm_cdf, norm_quantile};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Params {
    pub base: Base,
    pub theta: f64,
    pub nu: f64,
}

fn t_dist(nu: f64) -> StudentsT {
    StudentsT::new(0.0, 1.0, nu).expect("degrees of freedom > 0")
}

/// ln(u^−θ + v^−θ − 1) without overflow.
fn clayton_log_sum(u: f64, v: f64, theta: f64) -> f64 {
    let a = -theta * u.ln();
    let b = -theta * v.ln();
    let m = a.max(b);
    if m < 1.0 {
        (a.exp_m1() + b.exp_m1()).ln_1p()
    } else {
        m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
    }
}

impl Params {
    pub fn log_pdf(&self, u: f64, v: f64) -> f64 {
        let th = self.theta;
        match self.base {
            Base::Independence => 0.0,
            Base::Gaussian => {
                let (x, y) = (norm_quantile(u), norm_quantile(v));
                let r2 = 1.0 - th * th;
                -0.5 * r2.ln() - (th * th * (x * x + y * y) - 2.0 * th * x * y) / (2.0 * r2)
            }
            Base::StudentT => {
                let nu = self.nu;
                let t = t_dist(nu);
                let (x, y) = (t.inverse_cdf(u), t.inverse_cdf(v));
                let r2 = 1.0 - th * th;
                ln_gamma((nu + 2.0) / 2.0) + ln_gamma(nu / 2.0)
                    - 2.0 * ln_gamma((nu + 1.0) / 2.0)
                    - 0.5 * r2.ln()
                    - (nu + 2.0) / 2.0 * (1.0 + (x * x + y * y - 2.0 * th * x * y) / (nu * r2)).ln()
                    + (nu + 1.0) / 2.0 * ((x * x / nu).ln_1p() + (y * y / nu).ln_1p())
            }
            Base::Clayton => {
                th.ln_1p()
                    - (1.0 + th) * (u.ln() + v.ln())
                    - (2.0 + 1.0 / th) * clayton_log_sum(u, v, th)
            }
            Base::Gumbel => {
                let (a, b) = (-u.ln(), -v.ln());
                let big_a = a.powf(th) + b.powf(th);
                let a1 = big_a.powf(1.0 / th);
                -a1 - u.ln() - v.ln()
                    + (th - 1.0) * (a.ln() + b.ln())
                    + (2.0 / th - 2.0) * big_a.ln()
                    + ((th - 1.0) / a1).ln_1p()
            }
            Base::Frank => {
                let a = (-th * u).exp_m1();
                let b = (-th * v).exp_m1();
                let c = (-th).exp_m1();
                (th * -c).ln() - th * (u + v) - 2.0 * (c + a * b).abs().ln()
            }
        }
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        let th = self.theta;
        match self.base {
            Base::Independence => u * v,
            Base::Clayton => (-clayton_log_sum(u, v, th) / th).exp(),
            Base::Gumbel => {
                let (a, b) = (-u.ln(), -v.ln());
                (-(a.powf(th) + b.powf(th)).powf(1.0 / th)).exp()
            }
            Base::Frank => {
                let a = (-th * u).exp_m1();
                let b = (-th * v).exp_m1();
                let c = (-th).exp_m1();
                -(a * b / c).ln_1p() / th
            }
            Base::Gaussian | Base::StudentT => {
                // integrate P(V ≤ v | U = p) over p in (0, u)
                adaptive_simpson(
                    |p| self.h(v, p.clamp(1e-15, 1.0 - 1e-15)),
                    0.0,
                    u,
                    1e-13,
                    50,
                )
            }
        }
    }

    /// `P(U ≤ u | V = v)` for the base copula.
    pub fn h(&self, u: f64, v: f64) -> f64 {
        let th = self.theta;
        match self.base {
            Base::Independence => u,
            Base::Gaussian => {
                let (x, y) = (norm_quantile(u), norm_quantile(v));
                norm_cdf((x - th * y) / (1.0 - th * th).sqrt())
            }
            Base::StudentT => {
                let nu = self.nu;
                let t = t_dist(nu);
                let (x, y) = (t.inverse_cdf(u), t.inverse_cdf(v));
                let scale = ((nu + y * y) * (1.0 - th * th) / (nu + 1.0)).sqrt();
                t_dist(nu + 1.0).cdf((x - th * y) / scale)
            }
            Base::Clayton => {
                (-(th + 1.0) * v.ln() - (1.0 / th + 1.0) * clayton_log_sum(u, v, th)).exp()
            }
            Base::Gumbel => {
                let (a, b) = (-u.ln(), -v.ln());
                let big_a = a.powf(th) + b.powf(th);
                let a1 = big_a.powf(1.0 / th);
                (-a1 + (1.0 / th - 1.0) * big_a.ln() + (th - 1.0) * b.ln() - v.ln()).exp()
            }
            Base::Frank => {
                let a = (-th * u).exp_m1();
                let b = (-th * v).exp_m1();
                let c = (-th).exp_m1();
                (b + 1.0) * a / (c + a * b)
            }
        }
    }

    /// Closed-form inverse of `h` in its first argument where one exists.
    pub fn h_inv(&self, w: f64, v: f64) -> Option<f64> {
        let th = self.theta;
        match self.base {
            Base::Independence => Some(w),
            Base::Gaussian => {
                let (z, y) = (
                    norm_quantile(w.clamp(1e-300, 1.0 - 1e-16)),
                    norm_quantile(v),
                );
                Some(norm_cdf(z * (1.0 - th * th).sqrt() + th * y))
            }
            Base::StudentT => {
                let nu = self.nu;
                let t = t_dist(nu);
                let y = t.inverse_cdf(v);
                let z = t_dist(nu + 1.0).inverse_cdf(w);
                let scale = ((nu + y * y) * (1.0 - th * th) / (nu + 1.0)).sqrt();
                Some(t.cdf(z * scale + th * y))
            }
            Base::Clayton => {
                let inner = (-th / (th + 1.0) * (w.ln() + (th + 1.0) * v.ln())).exp() + 1.0
                    - (-th * v.ln()).exp();
                Some(inner.powf(-1.0 / th))
            }
            Base::Gumbel => None,
            Base::Frank => {
                let b = (-th * v).exp();
                let c = (-th).exp_m1();
                Some(-(w * c / (b * (1.0 - w) + w)).ln_1p() / th)
            }
        }
    }

    pub fn tau(&self) -> f64 {
        let th = self.theta;
        match self.base {
            Base::Independence => 0.0,
            Base::Gaussian | Base::StudentT => 2.0 / std::f64::consts::PI * th.asin(),
            Base::Clayton => th / (th + 2.0),
            Base::Gumbel => 1.0 - 1.0 / th,
            Base::Frank => 1.0 - 4.0 / th * (1.0 - debye1(th)),
        }
    }
}
