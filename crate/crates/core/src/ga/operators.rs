use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Rank scaling: the `r`-th best (lowest) fitness gets `1/√r`. Ties keep
/// index order.
pub fn rank_scale(fitness: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
    let mut scaled = vec![0.0; fitness.len()];
    for (rank, &i) in order.iter().enumerate() {
        scaled[i] = 1.0 / ((rank + 1) as f64).sqrt();
    }
    scaled
}

/// Lays the weights out on a line and walks it in `count` equal steps from
/// a random start below the step size.
pub fn stochastic_uniform<R: Rng>(weights: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || count == 0 || !(total > 0.0) {
        return Vec::new();
    }
    let step = total / count as f64;
    let mut pointer = rng.random::<f64>() * step;
    let mut picks = Vec::with_capacity(count);
    let mut idx = 0;
    let mut edge = weights[0];
    for _ in 0..count {
        while pointer >= edge && idx + 1 < weights.len() {
            idx += 1;
            edge += weights[idx];
        }
        picks.push(idx);
        pointer += step;
    }
    picks
}

/// Stochastic uniform selection on rank-scaled fitness (lower is better).
pub fn select_stochastic_uniform<R: Rng>(fitness: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    stochastic_uniform(&rank_scale(fitness), count, rng)
}

pub fn crossover_arithmetic(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect())
}

/// Moves `individual` by `sigma` along a random unit direction (scaled per
/// gene by the bound range) and clips the result to the bounds.
pub fn mutate_adaptive_feasible<R: Rng>(
    individual: &[f64],
    sigma: f64,
    lower: &[f64],
    upper: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    let dir: Vec<f64> = (0..individual.len())
        .map(|_| StandardNormal.sample(rng))
        .collect();
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    if sigma == 0.0 || norm == 0.0 {
        return individual.to_vec();
    }
    individual
        .iter()
        .zip(&dir)
        .zip(lower.iter().zip(upper))
        .map(|((&x, &d), (&lo, &hi))| (x + sigma * (hi - lo) * d / norm).clamp(lo, hi))
        .collect()
}
