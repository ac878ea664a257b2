//! Two-stage stochastic portfolio model with a currency overlay.
//!
//! Money amounts are in base currency. Fixed costs, trade sizes and the
//! margin are expressed relative to the initial wealth `W0`; holding and
//! exposure bounds relative to the wealth of the stage being checked.

mod cvar;
mod evaluate;
mod instance;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cvar::{
    cvar_objective, cvar_value, expected_return, target_residual, value_at_risk, CvarResult,
};
pub use evaluate::{
    evaluate, evaluate_first_stage, evaluate_recourse, penalized_fitness, penalty_weight,
    scenario_price_table, scenario_prices, wealth, Evaluation, Holdings, PriceMap, Residuals,
    ScenarioPrices, StageReport,
};
pub use instance::{
    Asset, CostTable, Costs, CurrencySpec, Forward, Instance, InstanceFile, Params,
};

/// Trades and binaries of one stage. Trade amounts are in units; a trade
/// only takes effect when its flag is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDecision {
    pub buy: Vec<f64>,
    pub sell: Vec<f64>,
    pub buy_flag: Vec<bool>,
    pub sell_flag: Vec<bool>,
    pub fwd_buy: Vec<f64>,
    pub fwd_sell: Vec<f64>,
    pub fwd_buy_flag: Vec<bool>,
    pub fwd_sell_flag: Vec<bool>,
    /// Country (currency) selection binaries.
    pub country: Vec<bool>,
}

impl StageDecision {
    pub fn zero(inst: &Instance) -> Self {
        let (a, k, c) = (inst.n_assets(), inst.n_forwards(), inst.n_currencies());
        StageDecision {
            buy: vec![0.0; a],
            sell: vec![0.0; a],
            buy_flag: vec![false; a],
            sell_flag: vec![false; a],
            fwd_buy: vec![0.0; k],
            fwd_sell: vec![0.0; k],
            fwd_buy_flag: vec![false; k],
            fwd_sell_flag: vec![false; k],
            country: vec![false; c],
        }
    }

    pub fn check(&self, inst: &Instance) -> Result<()> {
        let (a, k, c) = (inst.n_assets(), inst.n_forwards(), inst.n_currencies());
        let dims = [
            (self.buy.len(), a),
            (self.sell.len(), a),
            (self.buy_flag.len(), a),
            (self.sell_flag.len(), a),
            (self.fwd_buy.len(), k),
            (self.fwd_sell.len(), k),
            (self.fwd_buy_flag.len(), k),
            (self.fwd_sell_flag.len(), k),
            (self.country.len(), c),
        ];
        if let Some(&(got, want)) = dims.iter().find(|(g, w)| g != w) {
            return Err(Error::DimensionMismatch(format!(
                "decision vector of length {got}, expected {want}"
            )));
        }
        let trades = self
            .buy
            .iter()
            .chain(&self.sell)
            .chain(&self.fwd_buy)
            .chain(&self.fwd_sell);
        if trades.clone().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInstance(
                "trade amounts must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Buys `value` of asset `i` at price `price`, setting the flag.
    pub fn buy_value(&mut self, i: usize, value: f64, price: f64) {
        self.buy[i] = value / price;
        self.buy_flag[i] = value > 0.0;
    }

    /// Net signed forward trade of `units` on forward `k`.
    pub fn trade_forward(&mut self, k: usize, units: f64) {
        if units >= 0.0 {
            self.fwd_buy[k] = units;
            self.fwd_buy_flag[k] = units > 0.0;
        } else {
            self.fwd_sell[k] = -units;
            self.fwd_sell_flag[k] = true;
        }
    }

    pub fn has_trades(&self) -> bool {
        self.buy_flag
            .iter()
            .chain(&self.sell_flag)
            .chain(&self.fwd_buy_flag)
            .chain(&self.fwd_sell_flag)
            .any(|&f| f)
    }
}

/// First-stage decisions plus one recourse decision per scenario. An empty
/// `recourse` list means no recourse trades.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub first: StageDecision,
    pub recourse: Vec<StageDecision>,
}

impl Solution {
    pub fn cash_only(inst: &Instance) -> Self {
        Solution {
            first: StageDecision::zero(inst),
            recourse: Vec::new(),
        }
    }

    pub fn recourse_at(&self, r: usize) -> Option<&StageDecision> {
        self.recourse.get(r)
    }

    pub fn check(&self, inst: &Instance, n_scenarios: usize) -> Result<()> {
        self.first.check(inst)?;
        if !self.recourse.is_empty() && self.recourse.len() != n_scenarios {
            return Err(Error::LengthMismatch {
                left: self.recourse.len(),
                right: n_scenarios,
            });
        }
        self.recourse.iter().try_for_each(|d| d.check(inst))
    }
}
