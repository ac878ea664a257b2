use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::{self, GaConfig, GaResult};
use crate::model::{scenario_price_table, Evaluation, Instance, Solution};
use crate::panel::currency_column;
use crate::scenarios::ScenarioSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointStatus {
    Solved,
    Infeasible,
    TargetUnreachable,
}

impl PointStatus {
    pub fn name(self) -> &'static str {
        match self {
            PointStatus::Solved => "solved",
            PointStatus::Infeasible => "infeasible",
            PointStatus::TargetUnreachable => "target-unreachable",
        }
    }
}

/// One frontier portfolio. Shares are relative to first-stage wealth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub mu: f64,
    pub achieved_return: f64,
    pub cvar: f64,
    pub equity_share: f64,
    pub fx_exposure: f64,
    pub total_overlay: f64,
    pub status: PointStatus,
    pub violation: f64,
    pub fitness: f64,
    #[serde(skip)]
    pub solution: Option<Solution>,
}

impl FrontierPoint {
    fn unsolved(mu: f64, status: PointStatus) -> Self {
        FrontierPoint {
            mu,
            achieved_return: f64::NAN,
            cvar: f64::NAN,
            equity_share: f64::NAN,
            fx_exposure: f64::NAN,
            total_overlay: f64::NAN,
            status,
            violation: f64::NAN,
            fitness: f64::NAN,
            solution: None,
        }
    }

    pub fn from_result(inst: &Instance, mu: f64, res: &GaResult) -> Self {
        let ev = &res.evaluation;
        let (equity_share, fx_exposure, total_overlay) = summary(inst, ev);
        FrontierPoint {
            mu,
            achieved_return: ev.expected_return,
            cvar: ev.cvar,
            equity_share,
            fx_exposure,
            total_overlay,
            status: classify(ev),
            violation: ev.violation,
            fitness: ev.fitness,
            solution: Some(res.solution.clone()),
        }
    }
}

fn summary(inst: &Instance, ev: &Evaluation) -> (f64, f64, f64) {
    let first = &ev.first;
    let w = first.wealth;
    let assets: f64 = first
        .holdings
        .units
        .iter()
        .zip(&inst.assets)
        .map(|(u, a)| u * a.price)
        .sum();
    let foreign: f64 = first
        .exposure
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != inst.base)
        .map(|(_, e)| e)
        .sum();
    (assets / w, foreign / w, first.total_overlay / w)
}

fn classify(ev: &Evaluation) -> PointStatus {
    if ev.feasible() {
        PointStatus::Solved
    } else if ev.violation == ev.target_residual {
        PointStatus::TargetUnreachable
    } else {
        PointStatus::Infeasible
    }
}

/// Upper bound on the expected return any portfolio can reach on `set`:
/// the best expected asset return (or zero for cash) plus the widest spread
/// of expected currency returns across forward legs, levered by the
/// overlay limit.
pub fn return_upper_bound(inst: &Instance, set: &ScenarioSet) -> Result<f64> {
    let prices = scenario_price_table(inst, set)?;
    let p = &set.probabilities;
    let best_asset = inst
        .assets
        .iter()
        .enumerate()
        .map(|(i, a)| {
            prices
                .iter()
                .zip(p)
                .map(|(s, w)| w * s.asset[i])
                .sum::<f64>()
                / a.price
                - 1.0
        })
        .fold(0.0, f64::max);
    let mean_fx = |j: usize| {
        set.column_index(&currency_column(&inst.currencies[j].code))
            .map_or(0.0, |c| {
                set.values
                    .iter()
                    .zip(p)
                    .map(|(row, w)| w * row[c])
                    .sum::<f64>()
            })
    };
    let mut fx = vec![None; inst.n_currencies()];
    for &(l, s) in &inst.forward_legs {
        fx[l] = Some(mean_fx(l));
        fx[s] = Some(mean_fx(s));
    }
    let legs: Vec<f64> = fx.into_iter().flatten().collect();
    let spread = match (
        legs.iter().copied().reduce(f64::max),
        legs.iter().copied().reduce(f64::min),
    ) {
        (Some(hi), Some(lo)) => hi - lo,
        _ => 0.0,
    };
    Ok(best_asset + inst.params.overlay_limit * (1.0 + best_asset) * spread + 1e-9)
}

/// Solves the instance at target `mu`. Targets above the return bound are
/// flagged without running the optimizer.
pub fn solve_point(
    inst: &Instance,
    set: &ScenarioSet,
    mu: f64,
    bound: f64,
    cfg: &GaConfig,
) -> FrontierPoint {
    if mu > bound {
        return FrontierPoint::unsolved(mu, PointStatus::TargetUnreachable);
    }
    let inst = inst.with_mu(mu);
    match ga::run(&inst, set, cfg) {
        Ok(res) => FrontierPoint::from_result(&inst, mu, &res),
        Err(_) => FrontierPoint::unsolved(mu, PointStatus::Infeasible),
    }
}

/// One point per target, solved in parallel with the same GA seed, so the
/// output does not depend on the order of `grid`.
pub fn frontier(
    inst: &Instance,
    set: &ScenarioSet,
    grid: &[f64],
    cfg: &GaConfig,
) -> Result<Vec<FrontierPoint>> {
    if grid.is_empty() {
        return Err(Error::Config {
            key: "mu_points".into(),
            message: "the return grid is empty".into(),
        });
    }
    cfg.validate()?;
    let bound = return_upper_bound(inst, set)?;
    Ok(grid
        .par_iter()
        .map(|&mu| solve_point(inst, set, mu, bound, cfg))
        .collect())
}

pub fn write_frontier_csv(points: &[FrontierPoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "mu",
        "achieved_return",
        "cvar",
        "equity_share",
        "fx_exposure",
        "total_overlay",
        "status",
    ])?;
    for p in points {
        w.write_record([
            p.mu.to_string(),
            p.achieved_return.to_string(),
            p.cvar.to_string(),
            p.equity_share.to_string(),
            p.fx_exposure.to_string(),
            p.total_overlay.to_string(),
            p.status.name().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
