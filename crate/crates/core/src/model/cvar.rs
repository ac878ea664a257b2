use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvarResult {
    /// Value-at-risk: the lower β-quantile of the loss distribution.
    pub alpha: f64,
    pub cvar: f64,
    /// Shortfall `max(loss − α, 0)` per scenario.
    pub excess: Vec<f64>,
}

/// Discrete CVaR in linearized form
/// `α + Σ p·max(L − α, 0) / (1 − β)`, evaluated at the smallest loss whose
/// cumulative probability reaches β (a minimizer of the auxiliary function).
pub fn cvar_objective(losses: &[f64], probabilities: &[f64], beta: f64) -> Result<CvarResult> {
    let alpha = value_at_risk(losses, probabilities, beta)?;
    let excess: Vec<f64> = losses.iter().map(|&l| (l - alpha).max(0.0)).collect();
    let tail: f64 = excess.iter().zip(probabilities).map(|(e, p)| e * p).sum();
    Ok(CvarResult {
        alpha,
        cvar: alpha + tail / (1.0 - beta),
        excess,
    })
}

/// CVaR value only, without the shortfall vector.
pub fn cvar_value(losses: &[f64], probabilities: &[f64], beta: f64) -> Result<(f64, f64)> {
    let alpha = value_at_risk(losses, probabilities, beta)?;
    let tail: f64 = losses
        .iter()
        .zip(probabilities)
        .map(|(&l, p)| (l - alpha).max(0.0) * p)
        .sum();
    Ok((alpha, alpha + tail / (1.0 - beta)))
}

pub fn value_at_risk(losses: &[f64], probabilities: &[f64], beta: f64) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::EmptyScenarios);
    }
    if losses.len() != probabilities.len() {
        return Err(Error::LengthMismatch {
            left: losses.len(),
            right: probabilities.len(),
        });
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidInstance(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    let n = losses.len();
    let p0 = probabilities[0];
    if probabilities.iter().all(|&p| p == p0) {
        let k = ((beta * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
        let mut buf = losses.to_vec();
        let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
        return Ok(*kth);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]));
    let mut cum = 0.0;
    for &i in &order {
        cum += probabilities[i];
        if cum >= beta - 1e-12 {
            return Ok(losses[i]);
        }
    }
    Ok(losses[order[n - 1]])
}

/// `Σ p^r (W^r / W0 − 1)`.
pub fn expected_return(wealth: &[f64], probabilities: &[f64], w0: f64) -> f64 {
    wealth
        .iter()
        .zip(probabilities)
        .map(|(w, p)| p * (w / w0 - 1.0))
        .sum()
}

pub fn target_residual(expected: f64, mu: f64) -> f64 {
    (mu - expected).max(0.0)
}
