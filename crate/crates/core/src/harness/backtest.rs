use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{evaluate_first_stage, evaluate_recourse, Instance, PriceMap, StageDecision};
use crate::panel::ReturnPanel;

/// Out-of-sample record of a fixed allocation. `wealth` starts at 100 and
/// holds one value per period after that period's return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub periods: Vec<String>,
    pub returns: Vec<f64>,
    pub wealth: Vec<f64>,
    pub final_wealth: f64,
    pub mean_return: f64,
    /// Mean of the returns strictly below the 5th percentile.
    pub cvar: f64,
    /// `mean_return / |cvar|`, absent when the CVaR is zero.
    pub ratio: Option<f64>,
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Mean of the returns strictly below the 5th percentile, or the percentile
/// itself when nothing lies below it.
pub fn historical_cvar(returns: &[f64]) -> f64 {
    let cut = quantile(returns, 0.05);
    let tail: Vec<f64> = returns.iter().copied().filter(|&r| r < cut).collect();
    if tail.is_empty() {
        cut
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

/// Applies the first-stage allocation to every row of the adjusted
/// out-of-sample panel. Each period starts from the same allocation, so the
/// period return is the scenario wealth over first-stage wealth, minus one.
pub fn backtest(
    inst: &Instance,
    first: &StageDecision,
    panel: &ReturnPanel,
) -> Result<BacktestReport> {
    if panel.is_empty() {
        return Err(Error::EmptyScenarios);
    }
    let start = evaluate_first_stage(inst, first)?;
    if !(start.wealth > 0.0) {
        return Err(Error::InvalidInstance(
            "first-stage wealth is not positive".into(),
        ));
    }
    let map = PriceMap::new(inst, panel.names())?;
    let cols = panel.columns();
    let mut returns = Vec::with_capacity(panel.len());
    let mut row = vec![0.0; cols.len()];
    for t in 0..panel.len() {
        for (x, c) in row.iter_mut().zip(cols) {
            *x = c[t];
        }
        let prices = map.prices(inst, &row);
        let end = evaluate_recourse(inst, &start, None, &prices)?;
        returns.push(end.wealth / start.wealth - 1.0);
    }
    let mut level = 100.0;
    let wealth: Vec<f64> = returns
        .iter()
        .map(|r| {
            level *= 1.0 + r;
            level
        })
        .collect();
    let mean_return = returns.iter().sum::<f64>() / returns.len() as f64;
    let cvar = historical_cvar(&returns);
    Ok(BacktestReport {
        periods: panel.periods().to_vec(),
        final_wealth: level,
        mean_return,
        ratio: (cvar != 0.0).then(|| mean_return / cvar.abs()),
        cvar,
        returns,
        wealth,
    })
}

pub fn write_backtest_csv(report: &BacktestReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["period", "wealth", "return"])?;
    for ((p, v), r) in report
        .periods
        .iter()
        .zip(&report.wealth)
        .zip(&report.returns)
    {
        w.write_record([p.clone(), v.to_string(), r.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
