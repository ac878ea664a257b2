use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::overlay::build_ternary;
use crate::panel::{classify, SeriesKind};

/// Transaction costs of one instrument. Fixed costs are fractions of `W0`,
/// variable costs fractions of the traded value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Costs {
    #[serde(default)]
    pub buy_fixed: f64,
    #[serde(default)]
    pub sell_fixed: f64,
    #[serde(default)]
    pub buy_variable: f64,
    #[serde(default)]
    pub sell_variable: f64,
}

impl Costs {
    pub const ZERO: Costs = Costs {
        buy_fixed: 0.0,
        sell_fixed: 0.0,
        buy_variable: 0.0,
        sell_variable: 0.0,
    };
}

impl Default for Costs {
    fn default() -> Self {
        Costs::ZERO
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostTable {
    pub assets: Costs,
    pub forwards: Costs,
}

impl Default for CostTable {
    fn default() -> Self {
        CostTable {
            assets: Costs {
                buy_fixed: 1e-5,
                sell_fixed: 1e-5,
                buy_variable: 1e-4,
                sell_variable: 1e-4,
            },
            forwards: Costs {
                buy_fixed: 1e-5,
                sell_fixed: 1e-5,
                buy_variable: 2e-4,
                sell_variable: 2e-4,
            },
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_min_share() -> f64 {
    1e-4
}

fn default_min_trade() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Asset {
    /// Scenario column holding the asset's adjusted return.
    pub name: String,
    /// Defaults to the `<CCY>` suffix of the name.
    #[serde(default)]
    pub currency: String,
    #[serde(default = "one")]
    pub price: f64,
    #[serde(default)]
    pub initial_units: f64,
    #[serde(default = "default_min_share")]
    pub min_share: f64,
    #[serde(default = "one")]
    pub max_share: f64,
    #[serde(default = "default_min_trade")]
    pub min_trade: f64,
    /// Overrides the instance-wide asset costs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<Costs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurrencySpec {
    pub code: String,
    #[serde(default = "default_min_share")]
    pub min_exposure: f64,
    #[serde(default = "one")]
    pub max_exposure: f64,
}

/// Forward buying `long` and selling `short`; one unit is `price` of
/// base-currency notional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Forward {
    pub long: String,
    pub short: String,
    #[serde(default = "one")]
    pub price: f64,
    #[serde(default)]
    pub initial_units: f64,
    #[serde(default = "default_min_trade")]
    pub min_trade: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<Costs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub base_currency: String,
    /// Target expected return per period.
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "one")]
    pub overlay_limit: f64,
    #[serde(default = "default_kc")]
    pub max_currencies: usize,
    #[serde(default = "default_kg")]
    pub max_forwards: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_cash")]
    pub initial_cash: f64,
    /// Trade-size cap in units; `10·W0 / min(P0)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_b: Option<f64>,
}

fn default_beta() -> f64 {
    0.95
}

fn default_kc() -> usize {
    14
}

fn default_kg() -> usize {
    91
}

fn default_margin() -> f64 {
    0.1
}

fn default_cash() -> f64 {
    100_000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub assets: Vec<Asset>,
    pub currencies: Vec<CurrencySpec>,
    #[serde(default)]
    pub forwards: Vec<Forward>,
    #[serde(default)]
    pub costs: CostTable,
    pub params: Params,
}

/// Validated model instance with resolved indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub assets: Vec<Asset>,
    pub currencies: Vec<CurrencySpec>,
    pub forwards: Vec<Forward>,
    pub costs: CostTable,
    pub params: Params,
    /// Currency index of each asset.
    pub asset_currency: Vec<usize>,
    /// `(long, short)` currency indices of each forward.
    pub forward_legs: Vec<(usize, usize)>,
    pub base: usize,
    pub w0: f64,
    pub big_b: f64,
}

impl Instance {
    pub fn from_file(file: InstanceFile) -> Result<Self> {
        let InstanceFile {
            mut assets,
            currencies,
            forwards,
            costs,
            params,
        } = file;
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        if assets.is_empty() {
            return bad("no assets".into());
        }
        let code_index = |code: &str| currencies.iter().position(|c| c.code == code);
        for (i, c) in currencies.iter().enumerate() {
            if currencies[..i].iter().any(|d| d.code == c.code) {
                return bad(format!("duplicate currency {}", c.code));
            }
            if !(0.0..=c.max_exposure).contains(&c.min_exposure) {
                return bad(format!("currency {}: exposure bounds out of order", c.code));
            }
        }
        let Some(base) = code_index(&params.base_currency) else {
            return bad(format!("base currency {} not listed", params.base_currency));
        };
        let mut asset_currency = Vec::with_capacity(assets.len());
        for a in assets.iter_mut() {
            if a.currency.is_empty() {
                a.currency = match classify(&a.name) {
                    SeriesKind::Asset { currency } => currency,
                    _ => return bad(format!("asset {}: no currency", a.name)),
                };
            }
            let Some(j) = code_index(&a.currency) else {
                return bad(format!("asset {}: unknown currency {}", a.name, a.currency));
            };
            if !(a.price > 0.0 && a.price.is_finite()) {
                return bad(format!("asset {}: price must be positive", a.name));
            }
            if !(0.0..=a.max_share).contains(&a.min_share)
                || a.initial_units < 0.0
                || a.min_trade < 0.0
            {
                return bad(format!("asset {}: invalid bounds", a.name));
            }
            asset_currency.push(j);
        }
        for i in 1..assets.len() {
            if assets[..i].iter().any(|b| b.name == assets[i].name) {
                return bad(format!("duplicate asset {}", assets[i].name));
            }
        }
        let c = currencies.len();
        if forwards.len() > c * c.saturating_sub(1) / 2 {
            return bad(format!(
                "{} forwards exceed C(C-1)/2 for {c} currencies",
                forwards.len()
            ));
        }
        let mut forward_legs = Vec::with_capacity(forwards.len());
        for f in &forwards {
            let (Some(l), Some(s)) = (code_index(&f.long), code_index(&f.short)) else {
                return bad(format!("forward {}/{}: unknown currency", f.long, f.short));
            };
            if l == s {
                return bad(format!("forward {}/{}: legs must differ", f.long, f.short));
            }
            if forward_legs
                .iter()
                .any(|&(a, b)| (a, b) == (l, s) || (a, b) == (s, l))
            {
                return bad(format!("forward {}/{}: duplicate pair", f.long, f.short));
            }
            if !(f.price > 0.0 && f.price.is_finite()) || f.min_trade < 0.0 {
                return bad(format!(
                    "forward {}/{}: invalid price or trade size",
                    f.long, f.short
                ));
            }
            forward_legs.push((l, s));
        }
        let p = &params;
        if !(p.beta > 0.0 && p.beta < 1.0) {
            return bad("beta must lie in (0, 1)".into());
        }
        if !(0.0..=1.0).contains(&p.margin) || !(0.0..=1.0).contains(&p.overlay_limit) {
            return bad("margin and overlay_limit must lie in [0, 1]".into());
        }
        if p.initial_cash < 0.0 || !p.mu.is_finite() {
            return bad("initial_cash must be nonnegative and mu finite".into());
        }
        let w0 = p.initial_cash
            + assets
                .iter()
                .map(|a| a.initial_units * a.price)
                .sum::<f64>();
        if !(w0 > 0.0) {
            return bad("initial wealth must be positive".into());
        }
        let min_price = assets
            .iter()
            .map(|a| a.price)
            .chain(forwards.iter().map(|f| f.price))
            .fold(f64::INFINITY, f64::min);
        let big_b = p.big_b.unwrap_or(10.0 * w0 / min_price);
        Ok(Instance {
            assets,
            currencies,
            forwards,
            costs,
            params,
            asset_currency,
            forward_legs,
            base,
            w0,
            big_b,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            assets: self.assets.clone(),
            currencies: self.currencies.clone(),
            forwards: self.forwards.clone(),
            costs: self.costs.clone(),
            params: self.params.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("instance serializes")
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn n_currencies(&self) -> usize {
        self.currencies.len()
    }

    pub fn n_forwards(&self) -> usize {
        self.forwards.len()
    }

    pub fn asset_costs(&self, i: usize) -> Costs {
        self.assets[i].costs.unwrap_or(self.costs.assets)
    }

    pub fn forward_costs(&self, k: usize) -> Costs {
        self.forwards[k].costs.unwrap_or(self.costs.forwards)
    }

    /// Copy with a different return target.
    pub fn with_mu(&self, mu: f64) -> Instance {
        let mut out = self.clone();
        out.params.mu = mu;
        out
    }

    /// Replaces the forward list with every currency pair, in lexicographic
    /// currency order.
    pub fn with_all_forwards(&self, template: &Forward) -> Result<Instance> {
        let t = build_ternary(self.n_currencies())?;
        let mut file = self.to_file();
        file.forwards = t
            .pairs()
            .iter()
            .map(|&(a, b)| Forward {
                long: self.currencies[a].code.clone(),
                short: self.currencies[b].code.clone(),
                ..template.clone()
            })
            .collect();
        Instance::from_file(file)
    }
}
