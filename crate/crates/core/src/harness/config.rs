use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::{GaConfig, RecourseMode};
use crate::model::{Instance, InstanceFile};
use crate::scenarios::Method;

/// Flat run configuration. Model keys left unset keep the instance file's
/// values; the instance file in turn defaults to the values listed here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub panel: Option<PathBuf>,
    pub instance: Option<PathBuf>,
    pub base_currency: String,
    pub seed: u64,
    pub method: String,
    pub n_scenarios: usize,
    /// Leading panel periods used for estimation; the rest is out of sample.
    pub in_sample_periods: Option<usize>,

    pub population: usize,
    pub generations: usize,
    pub selection: f64,
    pub crossover: f64,
    pub elite: usize,
    pub initial_step: f64,
    pub recourse_mode: String,

    pub mu: Option<f64>,
    pub mu_start: f64,
    pub mu_step: f64,
    pub mu_points: usize,
    pub beta: Option<f64>,
    pub min_holding: Option<f64>,
    pub max_holding: Option<f64>,
    pub min_exposure: Option<f64>,
    pub max_exposure: Option<f64>,
    pub min_trade: Option<f64>,
    pub overlay_limit: Option<f64>,
    pub max_currencies: Option<usize>,
    pub max_forwards: Option<usize>,
    pub margin: Option<f64>,
    pub initial_cash: Option<f64>,
    pub asset_buy_fixed: Option<f64>,
    pub asset_sell_fixed: Option<f64>,
    pub asset_buy_variable: Option<f64>,
    pub asset_sell_variable: Option<f64>,
    pub forward_buy_fixed: Option<f64>,
    pub forward_sell_fixed: Option<f64>,
    pub forward_buy_variable: Option<f64>,
    pub forward_sell_variable: Option<f64>,

    pub stability_sizes: Vec<usize>,
    pub stability_seeds: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            panel: None,
            instance: None,
            base_currency: "USD".into(),
            seed: 0,
            method: "rvc".into(),
            n_scenarios: 1000,
            in_sample_periods: None,
            population: 500,
            generations: 500,
            selection: 0.1,
            crossover: 0.8,
            elite: 1,
            initial_step: 0.05,
            recourse_mode: "full".into(),
            mu: None,
            mu_start: 0.0055,
            mu_step: 0.0005,
            mu_points: 22,
            beta: None,
            min_holding: None,
            max_holding: None,
            min_exposure: None,
            max_exposure: None,
            min_trade: None,
            overlay_limit: None,
            max_currencies: None,
            max_forwards: None,
            margin: None,
            initial_cash: None,
            asset_buy_fixed: None,
            asset_sell_fixed: None,
            asset_buy_variable: None,
            asset_sell_variable: None,
            forward_buy_fixed: None,
            forward_sell_fixed: None,
            forward_buy_variable: None,
            forward_sell_variable: None,
            stability_sizes: vec![500, 1000, 1500, 2000],
            stability_seeds: 1,
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

/// Names the offending key of a TOML error: the unknown field, or the key
/// on the line the error points at.
fn key_of(err: &toml::de::Error, text: &str) -> String {
    let msg = err.message();
    if let Some(rest) = msg.strip_prefix("unknown field `") {
        return rest.split('`').next().unwrap_or_default().to_string();
    }
    err.span()
        .and_then(|span| {
            let start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
            let line = text[start..].lines().next()?;
            line.split_once('=').map(|(k, _)| k.trim().to_string())
        })
        .unwrap_or_else(|| "config".to_string())
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| {
            let key = key_of(&e, text);
            invalid(&key, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.panel, &mut cfg.instance].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.method()?;
        self.ga()?;
        if self.n_scenarios == 0 {
            return Err(invalid("n_scenarios", "must be positive"));
        }
        if self.mu_points == 0 {
            return Err(invalid("mu_points", "must be positive"));
        }
        if !(self.mu_step.is_finite() && self.mu_start.is_finite()) {
            return Err(invalid("mu_step", "must be finite"));
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b < 1.0) {
                return Err(invalid("beta", "must lie in (0, 1)"));
            }
        }
        for (key, v) in [
            ("margin", self.margin),
            ("overlay_limit", self.overlay_limit),
        ] {
            if v.is_some_and(|v| !(0.0..=1.0).contains(&v)) {
                return Err(invalid(key, "must lie in [0, 1]"));
            }
        }
        if self.stability_sizes.is_empty() || self.stability_sizes.contains(&0) {
            return Err(invalid(
                "stability_sizes",
                "must be a non-empty list of positive sizes",
            ));
        }
        if self.stability_seeds == 0 {
            return Err(invalid("stability_seeds", "must be positive"));
        }
        Ok(())
    }

    pub fn method(&self) -> Result<Method> {
        self.method.parse()
    }

    pub fn mode(&self) -> Result<RecourseMode> {
        self.recourse_mode.parse()
    }

    pub fn ga(&self) -> Result<GaConfig> {
        let ga = GaConfig {
            population: self.population,
            generations: self.generations,
            selection: self.selection,
            crossover: self.crossover,
            elite: self.elite,
            initial_step: self.initial_step,
            seed: self.seed,
            mode: self.mode()?,
            ..GaConfig::default()
        };
        ga.validate()?;
        Ok(ga)
    }

    /// `mu_start + k·mu_step` for `k < mu_points`, rounded to 1e-10.
    pub fn mu_grid(&self) -> Vec<f64> {
        (0..self.mu_points)
            .map(|k| ((self.mu_start + k as f64 * self.mu_step) * 1e10).round() / 1e10)
            .collect()
    }

    /// Applies the model keys that are set to an instance file.
    pub fn apply(&self, file: &mut InstanceFile) {
        let p = &mut file.params;
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut p.mu, self.mu);
        set(&mut p.beta, self.beta);
        set(&mut p.overlay_limit, self.overlay_limit);
        set(&mut p.margin, self.margin);
        set(&mut p.initial_cash, self.initial_cash);
        if let Some(k) = self.max_currencies {
            p.max_currencies = k;
        }
        if let Some(k) = self.max_forwards {
            p.max_forwards = k;
        }
        for a in &mut file.assets {
            set(&mut a.min_share, self.min_holding);
            set(&mut a.max_share, self.max_holding);
            set(&mut a.min_trade, self.min_trade);
        }
        for f in &mut file.forwards {
            set(&mut f.min_trade, self.min_trade);
        }
        for c in &mut file.currencies {
            set(&mut c.min_exposure, self.min_exposure);
            set(&mut c.max_exposure, self.max_exposure);
        }
        let a = &mut file.costs.assets;
        set(&mut a.buy_fixed, self.asset_buy_fixed);
        set(&mut a.sell_fixed, self.asset_sell_fixed);
        set(&mut a.buy_variable, self.asset_buy_variable);
        set(&mut a.sell_variable, self.asset_sell_variable);
        let f = &mut file.costs.forwards;
        set(&mut f.buy_fixed, self.forward_buy_fixed);
        set(&mut f.sell_fixed, self.forward_sell_fixed);
        set(&mut f.buy_variable, self.forward_buy_variable);
        set(&mut f.sell_variable, self.forward_sell_variable);
    }

    /// Reads the instance file and applies the configured overrides.
    pub fn load_instance(&self, path: &Path) -> Result<Instance> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut file: InstanceFile = serde_json::from_str(&text)?;
        self.apply(&mut file);
        Instance::from_file(file)
    }
}
