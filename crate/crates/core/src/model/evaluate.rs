use serde::Serialize;

use super::cvar::{cvar_value, expected_return, target_residual};
use super::{Instance, Solution, StageDecision};
use crate::error::{Error, Result};
use crate::panel::currency_column;
use crate::scenarios::ScenarioSet;

/// Column indices of the scenario series each instrument is priced from.
#[derive(Debug, Clone)]
pub struct PriceMap {
    asset_col: Vec<usize>,
    fx_col: Vec<Option<usize>>,
}

impl PriceMap {
    /// Every asset needs its own column and every non-base currency an
    /// `fx.<CCY>` column; a missing base-currency column reads as zero.
    pub fn new(inst: &Instance, names: &[String]) -> Result<Self> {
        let find = |name: &str| names.iter().position(|n| n == name);
        let asset_col = inst
            .assets
            .iter()
            .map(|a| find(&a.name).ok_or_else(|| Error::MissingColumn(a.name.clone())))
            .collect::<Result<_>>()?;
        let fx_col = inst
            .currencies
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let col = currency_column(&c.code);
                match find(&col) {
                    Some(idx) => Ok(Some(idx)),
                    None if j == inst.base => Ok(None),
                    None => Err(Error::MissingColumn(col)),
                }
            })
            .collect::<Result<_>>()?;
        Ok(PriceMap { asset_col, fx_col })
    }

    fn fx(&self, row: &[f64], j: usize) -> f64 {
        self.fx_col[j].map_or(0.0, |c| row[c])
    }

    pub fn prices(&self, inst: &Instance, row: &[f64]) -> ScenarioPrices {
        let asset = inst
            .assets
            .iter()
            .zip(&self.asset_col)
            .zip(&inst.asset_currency)
            .map(|((a, &col), &j)| a.price * (1.0 + row[col] + self.fx(row, j)))
            .collect();
        let forward = inst
            .forwards
            .iter()
            .zip(&inst.forward_legs)
            .map(|(f, &(l, s))| f.price * (self.fx(row, l) - self.fx(row, s)))
            .collect();
        ScenarioPrices { asset, forward }
    }
}

/// Scenario prices: asset price per unit, and the value change per unit of
/// each forward.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioPrices {
    pub asset: Vec<f64>,
    pub forward: Vec<f64>,
}

pub fn scenario_prices(inst: &Instance, names: &[String], row: &[f64]) -> Result<ScenarioPrices> {
    if row.len() != names.len() {
        return Err(Error::LengthMismatch {
            left: names.len(),
            right: row.len(),
        });
    }
    Ok(PriceMap::new(inst, names)?.prices(inst, row))
}

pub fn scenario_price_table(inst: &Instance, set: &ScenarioSet) -> Result<Vec<ScenarioPrices>> {
    let map = PriceMap::new(inst, &set.names)?;
    Ok(set.values.iter().map(|row| map.prices(inst, row)).collect())
}

/// Per-constraint residuals of one stage; zero means satisfied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Residuals {
    pub cash_balance: f64,
    pub overlay_limit: f64,
    pub asset_buy_sell: f64,
    pub forward_buy_sell: f64,
    pub asset_trade_size: f64,
    pub forward_trade_size: f64,
    pub currency_exposure: f64,
    pub country_trades: f64,
    pub currency_cardinality: f64,
    pub forward_cardinality: f64,
    pub holding_bounds: f64,
    pub country_link: f64,
}

impl Residuals {
    pub const NAMES: [&'static str; 12] = [
        "cash_balance",
        "overlay_limit",
        "asset_buy_sell",
        "forward_buy_sell",
        "asset_trade_size",
        "forward_trade_size",
        "currency_exposure",
        "country_trades",
        "currency_cardinality",
        "forward_cardinality",
        "holding_bounds",
        "country_link",
    ];

    pub fn values(&self) -> [f64; 12] {
        [
            self.cash_balance,
            self.overlay_limit,
            self.asset_buy_sell,
            self.forward_buy_sell,
            self.asset_trade_size,
            self.forward_trade_size,
            self.currency_exposure,
            self.country_trades,
            self.currency_cardinality,
            self.forward_cardinality,
            self.holding_bounds,
            self.country_link,
        ]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> {
        Self::NAMES.into_iter().zip(self.values())
    }

    pub fn total(&self) -> f64 {
        self.values().iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.values().iter().all(|&v| v == 0.0)
    }

    pub fn add(&mut self, o: &Residuals) {
        self.cash_balance += o.cash_balance;
        self.overlay_limit += o.overlay_limit;
        self.asset_buy_sell += o.asset_buy_sell;
        self.forward_buy_sell += o.forward_buy_sell;
        self.asset_trade_size += o.asset_trade_size;
        self.forward_trade_size += o.forward_trade_size;
        self.currency_exposure += o.currency_exposure;
        self.country_trades += o.country_trades;
        self.currency_cardinality += o.currency_cardinality;
        self.forward_cardinality += o.forward_cardinality;
        self.holding_bounds += o.holding_bounds;
        self.country_link += o.country_link;
    }
}

/// Positions after a stage: asset units, forward units, the free cash
/// account and the cash reserved as forward margin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Holdings {
    pub units: Vec<f64>,
    pub fwd_units: Vec<f64>,
    pub free_cash: f64,
    pub margin: f64,
}

impl Holdings {
    pub fn initial(inst: &Instance) -> Self {
        Holdings {
            units: inst.assets.iter().map(|a| a.initial_units).collect(),
            fwd_units: inst.forwards.iter().map(|f| f.initial_units).collect(),
            free_cash: inst.params.initial_cash,
            margin: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub holdings: Holdings,
    /// Currency exposure `c_j` in money.
    pub exposure: Vec<f64>,
    /// Net overlay position per currency in money.
    pub overlay: Vec<f64>,
    pub total_overlay: f64,
    pub wealth: f64,
    pub residuals: Residuals,
}

struct Scratch {
    holdings: Holdings,
    exposure: Vec<f64>,
    overlay: Vec<f64>,
}

impl Scratch {
    fn new(inst: &Instance) -> Self {
        Scratch {
            holdings: Holdings::initial(inst),
            exposure: vec![0.0; inst.n_currencies()],
            overlay: vec![0.0; inst.n_currencies()],
        }
    }

    fn report(&self, wealth: f64, total_overlay: f64, residuals: Residuals) -> StageReport {
        StageReport {
            holdings: self.holdings.clone(),
            exposure: self.exposure.clone(),
            overlay: self.overlay.clone(),
            total_overlay,
            wealth,
            residuals,
        }
    }
}

const CASH_TOLERANCE: f64 = 1e-9;
const HELD: f64 = 1e-12;

/// Applies one stage's trades to `start` and checks that stage's
/// constraints. `mtm` is the per-unit value change of the forwards held at
/// `start` (absent in the first stage, where forwards are worth zero).
fn run_stage(
    inst: &Instance,
    start: &Holdings,
    d: Option<&StageDecision>,
    prices: &[f64],
    mtm: Option<&[f64]>,
    first: bool,
    out: &mut Scratch,
) -> (f64, f64, Residuals) {
    let w0 = inst.w0;
    let p = &inst.params;
    let mut res = Residuals::default();
    let h = &mut out.holdings;
    h.units.clone_from(&start.units);
    h.fwd_units.clone_from(&start.fwd_units);
    let mut cash_flow = 0.0;
    if let Some(d) = d {
        for (i, a) in inst.assets.iter().enumerate() {
            let c = inst.asset_costs(i);
            let price = prices[i];
            let (x, y) = (d.buy_flag[i], d.sell_flag[i]);
            if x {
                h.units[i] += d.buy[i];
                cash_flow -= d.buy[i] * price * (1.0 + c.buy_variable) + c.buy_fixed * w0;
                res.asset_trade_size += (a.min_trade - d.buy[i] * price / w0).max(0.0);
            }
            if y {
                h.units[i] -= d.sell[i];
                cash_flow += d.sell[i] * price * (1.0 - c.sell_variable) - c.sell_fixed * w0;
                res.asset_trade_size += (a.min_trade - d.sell[i] * price / w0).max(0.0);
            }
            res.asset_trade_size +=
                ((d.buy[i] - inst.big_b).max(0.0) + (d.sell[i] - inst.big_b).max(0.0)) * price / w0;
            if x && y {
                res.asset_buy_sell += 1.0;
            }
        }
        let mut traded = 0usize;
        for (k, f) in inst.forwards.iter().enumerate() {
            let c = inst.forward_costs(k);
            let (x, y) = (d.fwd_buy_flag[k], d.fwd_sell_flag[k]);
            if x {
                h.fwd_units[k] += d.fwd_buy[k];
                cash_flow -= c.buy_fixed * w0 + c.buy_variable * d.fwd_buy[k] * f.price;
                res.forward_trade_size += (f.min_trade - d.fwd_buy[k] * f.price / w0).max(0.0);
            }
            if y {
                h.fwd_units[k] -= d.fwd_sell[k];
                cash_flow -= c.sell_fixed * w0 + c.sell_variable * d.fwd_sell[k] * f.price;
                res.forward_trade_size += (f.min_trade - d.fwd_sell[k] * f.price / w0).max(0.0);
            }
            res.forward_trade_size += ((d.fwd_buy[k] - inst.big_b).max(0.0)
                + (d.fwd_sell[k] - inst.big_b).max(0.0))
                * f.price
                / w0;
            if x && y {
                res.forward_buy_sell += 1.0;
            }
            traded += usize::from(x) + usize::from(y);
        }
        res.forward_cardinality = (traded as f64 - p.max_forwards as f64).max(0.0);
    }
    h.margin = p.margin
        * inst
            .forwards
            .iter()
            .zip(&h.fwd_units)
            .map(|(f, q)| q.abs() * f.price)
            .sum::<f64>();
    h.free_cash = start.free_cash + start.margin + cash_flow - h.margin;

    let asset_value: f64 = h.units.iter().zip(prices).map(|(u, p)| u * p).sum();
    let fwd_value: f64 = mtm.map_or(0.0, |m| {
        start.fwd_units.iter().zip(m).map(|(q, v)| q * v).sum()
    });
    let wealth = asset_value + fwd_value + h.margin + h.free_cash;
    let scale = if first || wealth <= 0.0 { w0 } else { wealth };

    out.exposure.iter_mut().for_each(|x| *x = 0.0);
    out.overlay.iter_mut().for_each(|x| *x = 0.0);
    for (i, &j) in inst.asset_currency.iter().enumerate() {
        out.exposure[j] += h.units[i] * prices[i];
    }
    for (k, &(l, s)) in inst.forward_legs.iter().enumerate() {
        let v = h.fwd_units[k] * inst.forwards[k].price;
        out.overlay[l] += v;
        out.overlay[s] -= v;
    }
    for (e, o) in out.exposure.iter_mut().zip(&out.overlay) {
        *e += o;
    }
    out.exposure[inst.base] += h.margin;
    let total_overlay = 0.5 * out.overlay.iter().map(|v| v.abs()).sum::<f64>();

    if h.free_cash < -CASH_TOLERANCE * w0 {
        res.cash_balance = -h.free_cash / w0;
    }
    res.overlay_limit =
        (total_overlay - p.overlay_limit * out.exposure.iter().sum::<f64>()).max(0.0) / w0;

    let selected = |j: usize| d.is_some_and(|d| d.country[j]);
    let mut n_selected = 0usize;
    for (j, spec) in inst.currencies.iter().enumerate() {
        let z = selected(j);
        n_selected += usize::from(z);
        let share = out.exposure[j] / scale;
        let floor = if z { spec.min_exposure } else { 0.0 };
        res.currency_exposure += (floor - share).max(0.0) + (share - spec.max_exposure).max(0.0);
        let mut trades = 0usize;
        let mut held = false;
        for (i, &cj) in inst.asset_currency.iter().enumerate() {
            if cj != j {
                continue;
            }
            if let Some(d) = d {
                trades += usize::from(d.buy_flag[i]) + usize::from(d.sell_flag[i]);
            }
            held |= h.units[i] * prices[i] / scale > HELD;
        }
        if z && trades == 0 {
            res.country_trades += 1.0;
        }
        if first && held && !z {
            res.country_link += 1.0;
        }
    }
    res.currency_cardinality = (n_selected as f64 - p.max_currencies as f64).max(0.0);

    for (i, a) in inst.assets.iter().enumerate() {
        let share = h.units[i] * prices[i] / scale;
        res.holding_bounds += (-share).max(0.0) + (share - a.max_share).max(0.0);
        if share > HELD {
            res.holding_bounds += (a.min_share - share).max(0.0);
        }
    }
    (wealth, total_overlay, res)
}

fn first_prices(inst: &Instance) -> Vec<f64> {
    inst.assets.iter().map(|a| a.price).collect()
}

/// First-stage positions, cash, exposures and residuals at prices `P0`.
pub fn evaluate_first_stage(inst: &Instance, d: &StageDecision) -> Result<StageReport> {
    d.check(inst)?;
    let mut s = Scratch::new(inst);
    let (w, t, r) = run_stage(
        inst,
        &Holdings::initial(inst),
        Some(d),
        &first_prices(inst),
        None,
        true,
        &mut s,
    );
    Ok(s.report(w, t, r))
}

/// Recourse stage at one scenario, starting from the first-stage report.
/// `None` means no recourse trades.
pub fn evaluate_recourse(
    inst: &Instance,
    first: &StageReport,
    d: Option<&StageDecision>,
    prices: &ScenarioPrices,
) -> Result<StageReport> {
    if let Some(d) = d {
        d.check(inst)?;
    }
    if prices.asset.len() != inst.n_assets() || prices.forward.len() != inst.n_forwards() {
        return Err(Error::DimensionMismatch(
            "scenario prices do not match the instance".into(),
        ));
    }
    let mut s = Scratch::new(inst);
    let (w, t, r) = run_stage(
        inst,
        &first.holdings,
        d,
        &prices.asset,
        Some(&prices.forward),
        false,
        &mut s,
    );
    Ok(s.report(w, t, r))
}

/// End-of-horizon wealth `W^r` of scenario `r`.
pub fn wealth(inst: &Instance, sol: &Solution, r: usize, prices: &ScenarioPrices) -> Result<f64> {
    let first = evaluate_first_stage(inst, &sol.first)?;
    Ok(evaluate_recourse(inst, &first, sol.recourse_at(r), prices)?.wealth)
}

pub fn penalty_weight(cvar: f64) -> f64 {
    1e3 * cvar.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub first: StageReport,
    pub wealth: Vec<f64>,
    pub alpha: f64,
    pub cvar: f64,
    pub expected_return: f64,
    pub target_residual: f64,
    /// Recourse residuals summed over scenarios.
    pub recourse_residuals: Residuals,
    /// Sum of all residuals, including the return target.
    pub violation: f64,
    pub fitness: f64,
}

impl Evaluation {
    pub fn feasible(&self) -> bool {
        self.violation == 0.0
    }
}

/// Full evaluation against precomputed scenario prices.
pub fn evaluate(
    inst: &Instance,
    sol: &Solution,
    prices: &[ScenarioPrices],
    probabilities: &[f64],
) -> Result<Evaluation> {
    if prices.is_empty() {
        return Err(Error::EmptyScenarios);
    }
    sol.check(inst, prices.len())?;
    let mut s = Scratch::new(inst);
    let (w1, t1, r1) = run_stage(
        inst,
        &Holdings::initial(inst),
        Some(&sol.first),
        &first_prices(inst),
        None,
        true,
        &mut s,
    );
    let first = s.report(w1, t1, r1);
    let mut recourse_residuals = Residuals::default();
    let mut wealth = Vec::with_capacity(prices.len());
    for (r, p) in prices.iter().enumerate() {
        let (w, _, res) = run_stage(
            inst,
            &first.holdings,
            sol.recourse_at(r),
            &p.asset,
            Some(&p.forward),
            false,
            &mut s,
        );
        recourse_residuals.add(&res);
        wealth.push(w);
    }
    let w0 = inst.w0;
    let losses: Vec<f64> = wealth.iter().map(|w| -(w / w0 - 1.0)).collect();
    let (alpha, cvar) = cvar_value(&losses, probabilities, inst.params.beta)?;
    let er = expected_return(&wealth, probabilities, w0);
    let tr = target_residual(er, inst.params.mu);
    let violation = first.residuals.total() + recourse_residuals.total() + tr;
    Ok(Evaluation {
        first,
        wealth,
        alpha,
        cvar,
        expected_return: er,
        target_residual: tr,
        recourse_residuals,
        violation,
        fitness: cvar + penalty_weight(cvar) * violation,
    })
}

/// `cvar + w_c · Σ residuals` over the scenario set.
pub fn penalized_fitness(inst: &Instance, sol: &Solution, set: &ScenarioSet) -> Result<f64> {
    let prices = scenario_price_table(inst, set)?;
    Ok(evaluate(inst, sol, &prices, &set.probabilities)?.fitness)
}
