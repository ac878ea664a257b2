use serde::{Deserialize, Serialize};

use super::{generate_mvn, Method, RvcModel};
use crate::error::Result;
use crate::ga::GaConfig;
use crate::harness::{frontier, PointStatus};
use crate::model::Instance;
use crate::panel::ReturnPanel;
use crate::rvine::SelectOptions;

#[derive(Debug, Clone)]
pub struct StabilityOptions {
    pub sizes: Vec<usize>,
    /// Scenario-generation seeds; every size is run once per seed.
    pub seeds: Vec<u64>,
    pub method: Method,
    pub mus: Vec<f64>,
    pub ga: GaConfig,
    pub select: SelectOptions,
}

/// Optimal-CVaR statistics over all solved (target, seed) runs of one size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub size: usize,
    pub runs: usize,
    pub average: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub range: f64,
    /// Std across seeds at a fixed target, averaged over targets.
    pub seed_std: f64,
    pub failures: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn row(size: usize, by_target: &[Vec<f64>], failures: usize) -> StabilityRow {
    let all: Vec<f64> = by_target.iter().flatten().copied().collect();
    let spreads: Vec<f64> = by_target
        .iter()
        .filter(|v| v.len() >= 2)
        .map(|v| sample_std(v))
        .collect();
    let (min, max) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let empty = all.is_empty();
    StabilityRow {
        size,
        runs: all.len(),
        average: if empty { f64::NAN } else { mean(&all) },
        std: sample_std(&all),
        min: if empty { f64::NAN } else { min },
        max: if empty { f64::NAN } else { max },
        range: if empty { f64::NAN } else { max - min },
        seed_std: if spreads.is_empty() {
            0.0
        } else {
            mean(&spreads)
        },
        failures,
    }
}

/// Solves the target grid on scenario sets of each size and summarizes the
/// optimal CVaR. Unsolved targets are counted as failures.
pub fn stability_report(
    panel: &ReturnPanel,
    inst: &Instance,
    opts: &StabilityOptions,
) -> Result<Vec<StabilityRow>> {
    let model = match opts.method {
        Method::Rvc => Some(RvcModel::fit(panel, &opts.select)?),
        Method::Mvn => None,
    };
    let mut rows = Vec::with_capacity(opts.sizes.len());
    for &size in &opts.sizes {
        let mut by_target = vec![Vec::new(); opts.mus.len()];
        let mut failures = 0;
        for &seed in &opts.seeds {
            let set = match &model {
                Some(m) => m.generate(size, seed)?,
                None => generate_mvn(panel, size, seed)?,
            };
            for (t, point) in frontier(inst, &set, &opts.mus, &opts.ga)?
                .into_iter()
                .enumerate()
            {
                if point.status == PointStatus::Solved {
                    by_target[t].push(point.cvar);
                } else {
                    failures += 1;
                }
            }
        }
        rows.push(row(size, &by_target, failures));
    }
    Ok(rows)
}
