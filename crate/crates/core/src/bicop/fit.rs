use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use super::{clamp_unit, empirical_tau, CopulaFamily, FittedBicop};
use crate::error::{Error, Result};
use crate::numeric::{bisect_increasing, golden_max};

const TAU_GRID: usize = 40;
const NU_MIN: f64 = 2.0001;
const NU_MAX: f64 = 30.0;

/// Parameter with the given Kendall's tau, clamped to the search bounds.
/// `None` when the sign of `tau` is outside what the family can express.
pub fn theta_from_tau(family: CopulaFamily, tau: f64) -> Option<f64> {
    use CopulaFamily::*;
    let (lo, hi) = family.theta_bounds();
    let raw = match family {
        Independence => return Some(0.0),
        Gaussian | StudentT => (std::f64::consts::FRAC_PI_2 * tau).sin(),
        Clayton | Clayton180 if tau > 0.0 => 2.0 * tau / (1.0 - tau),
        Clayton90 | Clayton270 if tau < 0.0 => 2.0 * tau / (1.0 + tau),
        Gumbel | Gumbel180 if tau > 0.0 => 1.0 / (1.0 - tau),
        Gumbel90 | Gumbel270 if tau < 0.0 => -1.0 / (1.0 + tau),
        Frank if tau != 0.0 => {
            let tau_of = |t: f64| {
                FittedBicop {
                    family: Frank,
                    theta: t,
                    theta2: None,
                    loglik: 0.0,
                    n_obs: 0,
                }
                .model_tau()
            };
            let t_hi = tau_of(hi);
            let target = tau.clamp(-t_hi, t_hi);
            let mag = bisect_increasing(tau_of, target.abs(), 1e-4, hi, 1e-12, 200).unwrap_or(hi);
            mag.copysign(tau)
        }
        _ => return None,
    };
    if !raw.is_finite() {
        return None;
    }
    Some(clamp_theta(family, raw, lo, hi))
}

fn clamp_theta(family: CopulaFamily, theta: f64, lo: f64, hi: f64) -> f64 {
    let t = theta.clamp(lo, hi);
    if family == CopulaFamily::Frank && t.abs() < 1e-4 {
        1e-4_f64.copysign(if t == 0.0 { 1.0 } else { t })
    } else {
        t
    }
}

fn with_theta(family: CopulaFamily, theta: f64, theta2: Option<f64>) -> FittedBicop {
    FittedBicop {
        family,
        theta,
        theta2,
        loglik: 0.0,
        n_obs: 0,
    }
}

/// Evenly spaced tau values mapped to parameters, plus the bounds.
fn theta_grid(family: CopulaFamily) -> Vec<f64> {
    let (lo, hi) = family.theta_bounds();
    let t_lo = with_theta(family, lo, Some(5.0)).model_tau();
    let t_hi = with_theta(family, hi, Some(5.0)).model_tau();
    let mut grid: Vec<f64> = (0..TAU_GRID)
        .filter_map(|k| {
            let tau = t_lo + (t_hi - t_lo) * (k as f64 + 0.5) / TAU_GRID as f64;
            theta_from_tau(family, tau)
        })
        .collect();
    grid.push(lo);
    grid.push(hi);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Grid scan plus golden-section refinement between the neighbours of the
/// best grid point. Always returns the best point evaluated.
fn maximize<F: FnMut(f64) -> f64>(mut f: F, grid: &[f64], start: Option<f64>) -> (f64, f64) {
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    let mut values = Vec::with_capacity(grid.len());
    for &t in grid {
        let v = f(t);
        values.push(v);
        if v > best.1 {
            best = (t, v);
        }
    }
    if let Some(s) = start {
        let v = f(s);
        if v > best.1 {
            best = (s, v);
        }
    }
    if let Some(i) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
    {
        let a = grid[i.saturating_sub(1)];
        let b = grid[(i + 1).min(grid.len() - 1)];
        if b > a {
            let tol = 1e-8 * (1.0 + a.abs().max(b.abs()));
            let (t, v) = golden_max(&mut f, a, b, tol, 200);
            if v > best.1 {
                best = (t, v);
            }
        }
    }
    best
}

fn finite_or_neg_inf(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        f64::NEG_INFINITY
    }
}

/// Maximum-likelihood fit of one family, starting from the tau inversion.
pub fn fit(family: CopulaFamily, u: &[f64], v: &[f64]) -> Result<FittedBicop> {
    let tau = empirical_tau(u, v)?;
    fit_with_tau(family, u, v, tau)
}

/// As [`fit`] with a precomputed empirical tau.
pub fn fit_with_tau(family: CopulaFamily, u: &[f64], v: &[f64], tau: f64) -> Result<FittedBicop> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    if u.len() < 8 {
        return Err(Error::FitFailure(format!(
            "{} observations, need at least 8",
            u.len()
        )));
    }
    let u: Vec<f64> = u.iter().map(|&x| clamp_unit(x)).collect();
    let v: Vec<f64> = v.iter().map(|&x| clamp_unit(x)).collect();
    let n_obs = u.len();

    let fitted = match family {
        CopulaFamily::Independence => FittedBicop {
            n_obs,
            ..FittedBicop::independence()
        },
        CopulaFamily::StudentT => fit_student(&u, &v, tau)?,
        _ => {
            let (lo, hi) = family.theta_bounds();
            let start = theta_from_tau(family, tau).unwrap_or(if tau >= 0.0 { lo } else { hi });
            let objective = |t: f64| {
                let t = clamp_theta(family, t, lo, hi);
                finite_or_neg_inf(with_theta(family, t, None).loglik(&u, &v))
            };
            let (theta, ll) = maximize(objective, &theta_grid(family), Some(start));
            FittedBicop {
                family,
                theta: clamp_theta(family, theta, lo, hi),
                theta2: None,
                loglik: ll,
                n_obs,
            }
        }
    };
    if fitted.check().is_err() || !fitted.loglik.is_finite() {
        return Err(Error::FitFailure(format!(
            "{} produced theta={} loglik={}",
            family.name(),
            fitted.theta,
            fitted.loglik
        )));
    }
    Ok(fitted)
}

/// Student t log-likelihood with the t quantiles precomputed for one `nu`.
struct StudentProfile {
    nu: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    log_margins: f64,
    constant: f64,
}

impl StudentProfile {
    fn new(nu: f64, u: &[f64], v: &[f64]) -> Self {
        let t = StudentsT::new(0.0, 1.0, nu).expect("nu > 2");
        let x: Vec<f64> = u.iter().map(|&p| t.inverse_cdf(p)).collect();
        let y: Vec<f64> = v.iter().map(|&p| t.inverse_cdf(p)).collect();
        let log_margins = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (nu + 1.0) / 2.0 * ((a * a / nu).ln_1p() + (b * b / nu).ln_1p()))
            .sum();
        let constant =
            ln_gamma((nu + 2.0) / 2.0) + ln_gamma(nu / 2.0) - 2.0 * ln_gamma((nu + 1.0) / 2.0);
        StudentProfile {
            nu,
            x,
            y,
            log_margins,
            constant,
        }
    }

    fn loglik(&self, rho: f64) -> f64 {
        let r2 = 1.0 - rho * rho;
        let m = self.x.len() as f64;
        let kernel: f64 = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(a, b)| (1.0 + (a * a + b * b - 2.0 * rho * a * b) / (self.nu * r2)).ln())
            .sum();
        finite_or_neg_inf(
            m * (self.constant - 0.5 * r2.ln()) - (self.nu + 2.0) / 2.0 * kernel + self.log_margins,
        )
    }

    fn best_rho(&self, grid: &[f64], start: f64) -> (f64, f64) {
        maximize(|r| self.loglik(r.clamp(-0.9999, 0.9999)), grid, Some(start))
    }
}

fn fit_student(u: &[f64], v: &[f64], tau: f64) -> Result<FittedBicop> {
    let rho_grid = theta_grid(CopulaFamily::Gaussian);
    let rho0 = theta_from_tau(CopulaFamily::StudentT, tau).unwrap_or(0.0);
    let nu0 = 8.0;
    let start_ll = StudentProfile::new(nu0, u, v).loglik(rho0);
    let mut best = (rho0, nu0, start_ll);

    let nu_grid: Vec<f64> = (0..10)
        .map(|k| (NU_MIN.ln() + (NU_MAX.ln() - NU_MIN.ln()) * k as f64 / 9.0).exp())
        .collect();
    let mut best_k = 0;
    let mut best_grid_ll = f64::NEG_INFINITY;
    for (k, &nu) in nu_grid.iter().enumerate() {
        let (rho, ll) = StudentProfile::new(nu, u, v).best_rho(&rho_grid, rho0);
        if ll > best_grid_ll {
            best_grid_ll = ll;
            best_k = k;
        }
        if ll > best.2 {
            best = (rho, nu, ll);
        }
    }

    // coordinate refinement: ln(nu) with rho fixed, then rho with nu fixed
    let lo = nu_grid[best_k.saturating_sub(1)].ln();
    let hi = nu_grid[(best_k + 1).min(nu_grid.len() - 1)].ln();
    for _ in 0..2 {
        let rho = best.0;
        let (lnu, ll) = golden_max(
            |l| StudentProfile::new(l.exp(), u, v).loglik(rho),
            lo,
            hi,
            1e-4,
            60,
        );
        let nu = lnu.exp().clamp(NU_MIN, NU_MAX);
        if ll > best.2 {
            best = (rho, nu, ll);
        }
        let profile = StudentProfile::new(best.1, u, v);
        let a = (best.0 - 0.05).max(-0.9999);
        let b = (best.0 + 0.05).min(0.9999);
        let (rho, ll) = golden_max(|r| profile.loglik(r), a, b, 1e-9, 200);
        if ll > best.2 {
            best = (rho, best.1, ll);
        }
    }

    Ok(FittedBicop {
        family: CopulaFamily::StudentT,
        theta: best.0,
        theta2: Some(best.1),
        loglik: best.2,
        n_obs: u.len(),
    })
}

/// Fits every candidate and keeps the one with the smallest AIC
/// (`2k − 2·loglik`). Earlier candidates win ties.
pub fn select_family(u: &[f64], v: &[f64], candidates: &[CopulaFamily]) -> Result<FittedBicop> {
    if candidates.is_empty() {
        return Err(Error::FitFailure("empty candidate set".into()));
    }
    let tau = empirical_tau(u, v)?;
    let mut best: Option<FittedBicop> = None;
    let mut last_err = None;
    for &family in candidates {
        match fit_with_tau(family, u, v, tau) {
            Ok(fitted) => {
                if best.is_none_or(|b| fitted.aic() < b.aic()) {
                    best = Some(fitted);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::FitFailure("no candidate fitted".into())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(f: CopulaFamily, theta: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let nu = (f == CopulaFamily::StudentT).then_some(6.0);
        FittedBicop::new(f, theta, nu)
            .unwrap()
            .simulate(n, &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap()
    }

    #[test]
    fn tau_inversion_round_trips() {
        for f in CopulaFamily::ALL {
            if f == CopulaFamily::Independence {
                continue;
            }
            let tau = if matches!(
                f,
                CopulaFamily::Clayton90
                    | CopulaFamily::Clayton270
                    | CopulaFamily::Gumbel90
                    | CopulaFamily::Gumbel270
            ) {
                -0.4
            } else {
                0.4
            };
            let t = theta_from_tau(f, tau).unwrap();
            let back = FittedBicop::new(f, t, Some(5.0)).unwrap().model_tau();
            assert!((back - tau).abs() < 1e-9, "{f}: {back}");
        }
        assert!(theta_from_tau(CopulaFamily::Clayton, -0.3).is_none());
    }

    #[test]
    fn clayton_fit_recovers_parameter() {
        let (u, v) = sample(CopulaFamily::Clayton, 2.0, 2000, 21);
        let fitted = fit(CopulaFamily::Clayton, &u, &v).unwrap();
        assert!((1.7..=2.3).contains(&fitted.theta), "{}", fitted.theta);
        assert_eq!(fitted.n_obs, 2000);
    }

    #[test]
    fn gaussian_fit_on_independent_data_is_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (u, v): (Vec<f64>, Vec<f64>) = (0..2000)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .unzip();
        let fitted = fit(CopulaFamily::Gaussian, &u, &v).unwrap();
        assert!(fitted.theta.abs() < 0.08);
    }

    #[test]
    fn comonotone_data_pushes_gumbel_to_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u: Vec<f64> = (0..200).map(|_| rng.random()).collect();
        let fitted = fit(CopulaFamily::Gumbel, &u, &u).unwrap();
        assert_eq!(fitted.theta, CopulaFamily::Gumbel.theta_bounds().1);
    }

    #[test]
    fn fit_improves_on_starting_point() {
        for (f, t) in [
            (CopulaFamily::Frank, -4.0),
            (CopulaFamily::Gumbel180, 1.8),
            (CopulaFamily::Clayton270, -1.5),
            (CopulaFamily::StudentT, 0.5),
        ] {
            let (u, v) = sample(f, t, 400, 5);
            let tau = empirical_tau(&u, &v).unwrap();
            let start = theta_from_tau(f, tau).unwrap();
            let start_ll = FittedBicop::new(f, start, Some(8.0))
                .unwrap()
                .loglik(&u, &v);
            let fitted = fit(f, &u, &v).unwrap();
            assert!(fitted.loglik >= start_ll - 1e-9, "{f}");
            assert!(
                (fitted.loglik - fitted.loglik(&u, &v)).abs() < 1e-6 * fitted.loglik.abs().max(1.0)
            );
        }
    }

    #[test]
    fn student_fit_finds_heavy_tails() {
        let (u, v) = sample(CopulaFamily::StudentT, 0.6, 2000, 8);
        let fitted = fit(CopulaFamily::StudentT, &u, &v).unwrap();
        assert!((fitted.theta - 0.6).abs() < 0.05);
        let nu = fitted.theta2.unwrap();
        assert!((3.0..=12.0).contains(&nu), "nu={nu}");
    }

    #[test]
    fn selection_prefers_generating_family() {
        let candidates = [
            CopulaFamily::Gaussian,
            CopulaFamily::Clayton,
            CopulaFamily::Gumbel,
            CopulaFamily::Frank,
        ];
        let hits = (0..20)
            .filter(|&seed| {
                let (u, v) = sample(CopulaFamily::Clayton, 3.0, 2000, 100 + seed);
                select_family(&u, &v, &candidates).unwrap().family == CopulaFamily::Clayton
            })
            .count();
        assert!(hits >= 18, "{hits}/20");
    }

    #[test]
    fn single_candidate_and_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (u, v): (Vec<f64>, Vec<f64>) = (0..500)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .unzip();
        let only = select_family(&u, &v, &[CopulaFamily::Frank]).unwrap();
        assert_eq!(only.family, CopulaFamily::Frank);
        let chosen = select_family(
            &u,
            &v,
            &[
                CopulaFamily::Independence,
                CopulaFamily::Gaussian,
                CopulaFamily::Clayton,
            ],
        )
        .unwrap();
        assert_eq!(chosen.family, CopulaFamily::Independence);
        assert!(select_family(&u, &v, &[]).is_err());
    }
}
