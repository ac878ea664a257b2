use rand::Rng;

use super::RecourseMode;
use crate::model::{Instance, Solution, StageDecision};

/// Chromosome layout. Each stage occupies one block of genes:
/// asset buys, asset sells, buy flags, sell flags, forward buys, forward
/// sells, forward flags (buy, sell), then country flags. Trade genes are
/// traded value as a fraction of `W0`; flag genes are on at `≥ 0.5`. Every
/// gene lies in `[0, 1]`. A first-stage country flag decodes as on whenever
/// an asset of that currency is held after the trades.
#[derive(Debug, Clone)]
pub struct Encoding {
    n_assets: usize,
    n_forwards: usize,
    n_currencies: usize,
    n_recourse: usize,
    w0: f64,
    asset_price: Vec<f64>,
    asset_currency: Vec<usize>,
    initial_units: Vec<f64>,
    fwd_price: Vec<f64>,
}

fn flag(g: f64) -> bool {
    g >= 0.5
}

fn gene(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl Encoding {
    pub fn new(inst: &Instance, mode: RecourseMode, n_scenarios: usize) -> Self {
        Encoding {
            n_assets: inst.n_assets(),
            n_forwards: inst.n_forwards(),
            n_currencies: inst.n_currencies(),
            n_recourse: match mode {
                RecourseMode::Full => n_scenarios,
                RecourseMode::NoRecourseTrades => 0,
            },
            w0: inst.w0,
            asset_price: inst.assets.iter().map(|a| a.price).collect(),
            asset_currency: inst.asset_currency.clone(),
            initial_units: inst.assets.iter().map(|a| a.initial_units).collect(),
            fwd_price: inst.forwards.iter().map(|f| f.price).collect(),
        }
    }

    pub fn stage_len(&self) -> usize {
        4 * self.n_assets + 4 * self.n_forwards + self.n_currencies
    }

    pub fn len(&self) -> usize {
        self.stage_len() * (1 + self.n_recourse)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.len()], vec![1.0; self.len()])
    }

    fn decode_stage(&self, g: &[f64]) -> StageDecision {
        let (a, k) = (self.n_assets, self.n_forwards);
        let units =
            |value: f64, on: bool, price: f64| if on { value * self.w0 / price } else { 0.0 };
        let buy_flag: Vec<bool> = g[2 * a..3 * a].iter().map(|&x| flag(x)).collect();
        let sell_flag: Vec<bool> = g[3 * a..4 * a].iter().map(|&x| flag(x)).collect();
        let f = 4 * a;
        let fwd_buy_flag: Vec<bool> = g[f + 2 * k..f + 3 * k].iter().map(|&x| flag(x)).collect();
        let fwd_sell_flag: Vec<bool> = g[f + 3 * k..f + 4 * k].iter().map(|&x| flag(x)).collect();
        StageDecision {
            buy: (0..a)
                .map(|i| units(g[i], buy_flag[i], self.asset_price[i]))
                .collect(),
            sell: (0..a)
                .map(|i| units(g[a + i], sell_flag[i], self.asset_price[i]))
                .collect(),
            buy_flag,
            sell_flag,
            fwd_buy: (0..k)
                .map(|i| units(g[f + i], fwd_buy_flag[i], self.fwd_price[i]))
                .collect(),
            fwd_sell: (0..k)
                .map(|i| units(g[f + k + i], fwd_sell_flag[i], self.fwd_price[i]))
                .collect(),
            fwd_buy_flag,
            fwd_sell_flag,
            country: g[f + 4 * k..].iter().map(|&x| flag(x)).collect(),
        }
    }

    fn encode_stage(&self, d: &StageDecision, out: &mut Vec<f64>) {
        let value = |u: f64, price: f64| u * price / self.w0;
        out.extend(
            d.buy
                .iter()
                .zip(&self.asset_price)
                .map(|(&u, &p)| value(u, p)),
        );
        out.extend(
            d.sell
                .iter()
                .zip(&self.asset_price)
                .map(|(&u, &p)| value(u, p)),
        );
        out.extend(d.buy_flag.iter().map(|&b| gene(b)));
        out.extend(d.sell_flag.iter().map(|&b| gene(b)));
        out.extend(
            d.fwd_buy
                .iter()
                .zip(&self.fwd_price)
                .map(|(&u, &p)| value(u, p)),
        );
        out.extend(
            d.fwd_sell
                .iter()
                .zip(&self.fwd_price)
                .map(|(&u, &p)| value(u, p)),
        );
        out.extend(d.fwd_buy_flag.iter().map(|&b| gene(b)));
        out.extend(d.fwd_sell_flag.iter().map(|&b| gene(b)));
        out.extend(d.country.iter().map(|&b| gene(b)));
    }

    /// Trades whose flag is off decode to zero units.
    pub fn decode(&self, genes: &[f64]) -> Solution {
        let s = self.stage_len();
        let mut first = self.decode_stage(&genes[..s]);
        for (i, &c) in self.asset_currency.iter().enumerate() {
            if self.initial_units[i] + first.buy[i] - first.sell[i] > 0.0 {
                first.country[c] = true;
            }
        }
        Solution {
            first,
            recourse: (0..self.n_recourse)
                .map(|r| self.decode_stage(&genes[s * (r + 1)..s * (r + 2)]))
                .collect(),
        }
    }

    pub fn encode(&self, sol: &Solution) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.encode_stage(&sol.first, &mut out);
        for r in 0..self.n_recourse {
            match sol.recourse.get(r) {
                Some(d) => self.encode_stage(d, &mut out),
                None => out.extend(std::iter::repeat_n(0.0, self.stage_len())),
            }
        }
        out
    }

    /// Random first stage: Bernoulli(0.5) flags, with sell flags off for
    /// assets not held initially, forward notionals drawn
    /// uniformly up to a quarter of the overlay limit split over the
    /// forwards, and the initial cash left after margin and costs spread
    /// over all assets with uniform random weights. Recourse genes are zero.
    pub fn random_individual<R: Rng>(&self, inst: &Instance, rng: &mut R) -> Vec<f64> {
        let (a, k) = (self.n_assets, self.n_forwards);
        let f = 4 * a;
        let mut g = vec![0.0; self.len()];
        for i in 0..a {
            g[2 * a + i] = rng.random();
            if self.initial_units[i] > 0.0 {
                g[3 * a + i] = rng.random();
            }
        }
        for x in g[f + 2 * k..self.stage_len()].iter_mut() {
            *x = rng.random();
        }

        let mut cash = inst.params.initial_cash / inst.w0;
        let cap = 0.25 * inst.params.overlay_limit / k.max(1) as f64;
        for j in 0..k {
            let c = inst.forward_costs(j);
            let sides = [
                (c.buy_fixed, c.buy_variable),
                (c.sell_fixed, c.sell_variable),
            ];
            for (side, (fixed, var)) in sides.into_iter().enumerate() {
                let notional = cap * rng.random::<f64>();
                g[f + side * k + j] = notional;
                if flag(g[f + (2 + side) * k + j]) {
                    cash -= fixed + (var + inst.params.margin) * notional;
                }
            }
        }

        let fixed: f64 = (0..a).map(|i| inst.asset_costs(i).buy_fixed).sum();
        let max_var = (0..a)
            .map(|i| inst.asset_costs(i).buy_variable)
            .fold(0.0, f64::max);
        let budget = ((cash - fixed) / (1.0 + max_var)).max(0.0);
        let weights: Vec<f64> = (0..a)
            .map(|_| -rng.random::<f64>().max(1e-300).ln())
            .collect();
        let total: f64 = weights.iter().sum();
        for (i, w) in weights.iter().enumerate() {
            g[i] = (budget * w / total).min(1.0);
        }
        g
    }
}
