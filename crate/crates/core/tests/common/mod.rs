#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use vinehedge_core::model::{
    evaluate, scenario_price_table, scenario_prices, Instance, Residuals, ScenarioPrices, Solution,
    StageDecision,
};
use vinehedge_core::scenarios::ScenarioSet;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Writes `run.toml` in `dir` for the desk data with a small scenario set and GA.
pub fn run_config(dir: &Path, extra: &str) -> PathBuf {
    let data = data_dir().canonicalize().unwrap();
    let text = format!(
        "panel = \"{}\"\ninstance = \"{}\"\nseed = 3\nn_scenarios = 60\nin_sample_periods = 120\n\
         population = 12\ngenerations = 6\nrecourse_mode = \"no-recourse-trades\"\nmu = 0.004\n{extra}",
        data.join("desk_panel.csv").display(),
        data.join("desk_instance.json").display(),
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

/// Two assets (one per currency), USD/EUR, one forward, no effective
/// cardinality limits.
pub fn tiny_instance(mu: f64) -> Instance {
    let text = format!(
        r#"{{
        "assets": [ {{ "name": "A.USD", "price": 10.0 }}, {{ "name": "B.EUR", "price": 20.0 }} ],
        "currencies": [ {{ "code": "USD" }}, {{ "code": "EUR" }} ],
        "forwards": [ {{ "long": "USD", "short": "EUR" }} ],
        "params": {{ "base_currency": "USD", "mu": {mu}, "max_currencies": 2, "max_forwards": 2 }}
    }}"#
    );
    Instance::from_json(&text).unwrap()
}

/// Twenty correlated scenarios for the tiny instance.
pub fn tiny_scenarios() -> ScenarioSet {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let rows = (0..20)
        .map(|_| {
            let z: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
            vec![
                0.010 + 0.04 * z[0],
                0.012 + 0.06 * (0.5 * z[0] + 0.866 * z[1]),
                0.002 + 0.03 * (-0.4 * z[1] + 0.917 * z[2]),
            ]
        })
        .collect();
    ScenarioSet::new(vec!["A.USD".into(), "B.EUR".into(), "fx.EUR".into()], rows).unwrap()
}

/// First-stage decision putting shares `w` of the investable budget into the
/// assets and a forward position worth `f·W0` (long USD when positive). The
/// budget is what remains of the cash after margin and all costs.
pub fn allocation(inst: &Instance, w: &[f64], f: f64) -> StageDecision {
    let mut d = StageDecision::zero(inst);
    let w0 = inst.w0;
    let fc = inst.forward_costs(0);
    let notional = f.abs() * w0;
    let mut cash = inst.params.initial_cash - inst.params.margin * notional;
    if notional > 0.0 {
        let units = notional / inst.forwards[0].price;
        d.trade_forward(0, if f > 0.0 { units } else { -units });
        let (fixed, var) = if f > 0.0 {
            (fc.buy_fixed, fc.buy_variable)
        } else {
            (fc.sell_fixed, fc.sell_variable)
        };
        cash -= fixed * w0 + var * notional;
    }
    let held: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let fixed: f64 = held
        .iter()
        .map(|&i| inst.asset_costs(i).buy_fixed * w0)
        .sum();
    let budget = (cash - fixed).max(0.0);
    for &i in &held {
        let c = inst.asset_costs(i);
        d.buy_value(
            i,
            w[i] * budget / (1.0 + c.buy_variable),
            inst.assets[i].price,
        );
    }
    for &i in &held {
        d.country[inst.asset_currency[i]] = true;
    }
    d
}

/// Lowest penalized fitness over asset weights on a 5% simplex grid and
/// forward positions in 5% steps of `W0`.
pub fn grid_optimum(inst: &Instance, set: &ScenarioSet) -> (f64, Solution) {
    let prices = scenario_price_table(inst, set).unwrap();
    let mut best = (f64::INFINITY, Solution::cash_only(inst));
    for a in 0..=20 {
        for b in 0..=(20 - a) {
            for f in -20..=20 {
                let sol = Solution {
                    first: allocation(inst, &[a as f64 / 20.0, b as f64 / 20.0], f as f64 / 20.0),
                    recourse: Vec::new(),
                };
                let fit = evaluate(inst, &sol, &prices, &set.probabilities)
                    .unwrap()
                    .fitness;
                if fit < best.0 {
                    best = (fit, sol);
                }
            }
        }
    }
    best
}

/// Two assets, two currencies, one forward, with bounds chosen so that most
/// constraints bind in the hand-built decisions below.
pub fn hand_instance() -> Instance {
    Instance::from_json(
        r#"{
        "assets": [
            { "name": "A.USD", "price": 10.0, "min_share": 0.5 },
            { "name": "B.EUR", "price": 20.0, "max_share": 0.45 }
        ],
        "currencies": [ { "code": "USD" }, { "code": "EUR", "max_exposure": 0.6 } ],
        "forwards": [ { "long": "USD", "short": "EUR", "min_trade": 0.02 } ],
        "costs": {
            "assets": { "buy_fixed": 1e-4, "sell_fixed": 1e-4, "buy_variable": 1e-3, "sell_variable": 1e-3 },
            "forwards": { "buy_fixed": 1e-4, "sell_fixed": 1e-4, "buy_variable": 2e-3, "sell_variable": 2e-3 }
        },
        "params": { "base_currency": "USD", "overlay_limit": 0.3, "max_currencies": 1, "max_forwards": 1, "margin": 0.1 }
    }"#,
    )
    .unwrap()
}

/// Buy 4000 A and 2500 B, flag a sale of A with zero units, buy 1000 and sell
/// 30000 forward units, select USD only.
pub fn hand_first(inst: &Instance) -> StageDecision {
    let mut d = StageDecision::zero(inst);
    d.buy = vec![4000.0, 2500.0];
    d.buy_flag = vec![true, true];
    d.sell_flag[0] = true;
    d.fwd_buy[0] = 1000.0;
    d.fwd_buy_flag[0] = true;
    d.fwd_sell[0] = 30000.0;
    d.fwd_sell_flag[0] = true;
    d.country = vec![true, false];
    d
}

/// Free cash after the hand-built first stage: asset outlays
/// 40000·1.001 + 10 and 50000·1.001 + 10, 10 for the flagged empty sale,
/// forward costs 10 + 2 and 10 + 60, and margin 0.1·29000.
pub const HAND_FREE_CASH: f64 = 100_000.0 - (40_050.0 + 50_060.0 + 10.0 + 12.0 + 70.0) - 2_900.0;

pub fn hand_first_residuals() -> Residuals {
    Residuals {
        cash_balance: 0.0,
        // overlay 29000 against 0.3 of exposures 13900 + 79000
        overlay_limit: (29_000.0 - 0.3 * 92_900.0) / 1e5,
        asset_buy_sell: 1.0,
        forward_buy_sell: 1.0,
        asset_trade_size: 1e-3,
        forward_trade_size: 0.02 - 0.01,
        currency_exposure: 0.79 - 0.6,
        country_trades: 0.0,
        currency_cardinality: 0.0,
        forward_cardinality: 1.0,
        holding_bounds: (0.5 - 0.4) + (0.5 - 0.45),
        country_link: 1.0,
    }
}

/// A +5%, B −2%, EUR +3%: prices 10.5 and 20.2, forward value −0.03 per unit.
pub fn hand_prices(inst: &Instance) -> ScenarioPrices {
    let names = vec![
        "A.USD".to_string(),
        "B.EUR".to_string(),
        "fx.EUR".to_string(),
    ];
    scenario_prices(inst, &names, &[0.05, -0.02, 0.03]).unwrap()
}

/// Buy 500 B with both currencies selected.
pub fn hand_recourse(inst: &Instance) -> StageDecision {
    let mut d = StageDecision::zero(inst);
    d.buy[1] = 500.0;
    d.buy_flag[1] = true;
    d.country = vec![true, true];
    d
}

/// Free cash 6898 − (10100·1.001 + 10) = −3222.1; wealth
/// 42000 + 60600 + 870 + 2900 − 3222.1 = 103147.9.
pub fn hand_recourse_residuals() -> Residuals {
    let w = 103_147.9;
    Residuals {
        cash_balance: 3_222.1 / 1e5,
        overlay_limit: 0.0,
        asset_buy_sell: 0.0,
        forward_buy_sell: 0.0,
        asset_trade_size: 0.0,
        forward_trade_size: 0.0,
        currency_exposure: 89_600.0 / w - 0.6,
        country_trades: 1.0,
        currency_cardinality: 1.0,
        forward_cardinality: 0.0,
        holding_bounds: (0.5 - 42_000.0 / w) + (60_600.0 / w - 0.45),
        country_link: 0.0,
    }
}
