//! Scenario generation: R-vine copula (RVC) and multivariate normal (MVN).

mod stability;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::MarginalModel;
use crate::numeric::mean;
use crate::panel::ReturnPanel;
use crate::rvine::{select_and_fit, RVineSpec, SelectOptions};

pub use stability::{sample_std, stability_report, StabilityOptions, StabilityRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rvc,
    Mvn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rvc => "rvc",
            Method::Mvn => "mvn",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rvc" => Ok(Method::Rvc),
            "mvn" => Ok(Method::Mvn),
            other => Err(Error::Config {
                key: "method".into(),
                message: format!("unknown method `{other}` (expected rvc or mvn)"),
            }),
        }
    }
}

/// `N` equiprobable joint return realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub names: Vec<String>,
    /// Row `r` holds scenario `r`, one value per column.
    pub values: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
}

impl ScenarioSet {
    pub fn new(names: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyScenarios);
        }
        if let Some(row) = values.iter().find(|r| r.len() != names.len()) {
            return Err(Error::LengthMismatch {
                left: names.len(),
                right: row.len(),
            });
        }
        if values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInstance("non-finite scenario value".into()));
        }
        let p = 1.0 / values.len() as f64;
        let probabilities = vec![p; values.len()];
        Ok(ScenarioSet {
            names,
            values,
            probabilities,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.column_index(name)
            .map(|j| self.values.iter().map(|r| r[j]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["scenario_id".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (r, row) in self.values.iter().enumerate() {
            let mut rec = vec![(r + 1).to_string()];
            rec.extend(row.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.get(0) != Some("scenario_id") {
            return Err(Error::ParseError {
                line: 1,
                message: "first column must be `scenario_id`".into(),
            });
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut values = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let row = record
                .iter()
                .skip(1)
                .zip(&names)
                .map(|(cell, name)| {
                    cell.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::NonNumericCell {
                            line,
                            column: name.clone(),
                            value: cell.to_string(),
                        })
                })
                .collect::<Result<Vec<f64>>>()?;
            values.push(row);
        }
        ScenarioSet::new(names, values)
    }
}

/// Sidecar metadata written next to a scenario CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub seed: u64,
    pub method: Method,
    pub n: usize,
    pub timestamp: String,
}

/// Columns with zero variance are carried through as constants; only the
/// varying columns enter the dependence model.
fn split_constant(panel: &ReturnPanel) -> (Vec<usize>, Vec<(usize, f64)>) {
    let mut varying = Vec::new();
    let mut constant = Vec::new();
    for (j, col) in panel.columns().iter().enumerate() {
        if col.iter().all(|&x| x == col[0]) {
            constant.push((j, col.first().copied().unwrap_or(0.0)));
        } else {
            varying.push(j);
        }
    }
    (varying, constant)
}

/// Fitted RVC generator: KDE marginals plus an R-vine on the PIT values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RvcModel {
    pub names: Vec<String>,
    pub marginals: Vec<MarginalModel>,
    /// Indices (into `names`) of the columns driven by the vine.
    pub varying: Vec<usize>,
    pub constants: Vec<(usize, f64)>,
    /// `None` when fewer than two columns vary.
    pub vine: Option<RVineSpec>,
}

impl RvcModel {
    pub fn fit(panel: &ReturnPanel, opts: &SelectOptions) -> Result<Self> {
        if panel.names().is_empty() {
            return Err(Error::EmptyPanel);
        }
        let (varying, constants) = split_constant(panel);
        let mut marginals = Vec::with_capacity(varying.len());
        let mut uniforms = Vec::with_capacity(varying.len());
        for &j in &varying {
            let col = &panel.columns()[j];
            let model = MarginalModel::fit_kde(col)
                .map_err(|e| e.in_column(panel.names()[j].clone()).in_stage("marginals"))?;
            uniforms.push(col.iter().map(|&x| model.cdf(x)).collect::<Vec<f64>>());
            marginals.push(model);
        }
        let vine = if varying.len() >= 2 {
            Some(select_and_fit(&uniforms, opts).map_err(|e| e.in_stage("vine-fit"))?)
        } else {
            None
        };
        Ok(RvcModel {
            names: panel.names().to_vec(),
            marginals,
            varying,
            constants,
            vine,
        })
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<ScenarioSet> {
        if n == 0 {
            return Err(Error::EmptyScenarios);
        }
        let uniforms: Vec<Vec<f64>> = match &self.vine {
            Some(vine) => vine.sample(n, seed).map_err(|e| e.in_stage("sampling"))?,
            None => {
                use rand::Rng;
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                (0..n)
                    .map(|_| {
                        (0..self.varying.len())
                            .map(|_| rng.random::<f64>())
                            .collect()
                    })
                    .collect()
            }
        };
        let d = self.names.len();
        let values = uniforms
            .iter()
            .map(|u| {
                let mut row = vec![0.0; d];
                for (k, &j) in self.varying.iter().enumerate() {
                    row[j] = self.marginals[k].inv_cdf(u[k]);
                }
                for &(j, c) in &self.constants {
                    row[j] = c;
                }
                row
            })
            .collect();
        ScenarioSet::new(self.names.clone(), values)
    }
}

/// KDE marginals + R-vine dependence, sampled `n` times.
pub fn generate_rvc(
    panel: &ReturnPanel,
    n: usize,
    opts: &SelectOptions,
    seed: u64,
) -> Result<ScenarioSet> {
    RvcModel::fit(panel, opts)?.generate(n, seed)
}

/// Sample mean and covariance (`n − 1` denominator) of the panel columns.
pub fn moments(panel: &ReturnPanel) -> (Vec<f64>, Vec<Vec<f64>>) {
    let cols = panel.columns();
    let mu: Vec<f64> = cols.iter().map(|c| mean(c)).collect();
    let m = panel.len() as f64;
    let d = cols.len();
    let mut cov = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = cols[i]
                .iter()
                .zip(&cols[j])
                .map(|(a, b)| (a - mu[i]) * (b - mu[j]))
                .sum::<f64>()
                / (m - 1.0);
            cov[i][j] = s;
            cov[j][i] = s;
        }
    }
    (mu, cov)
}

/// Lower Cholesky factor, retrying once with `1e-10·trace` added to the diagonal.
pub fn cholesky_with_jitter(cov: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = cov.len();
    let mat = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
    if let Some(ch) = mat.clone().cholesky() {
        return Ok(ch.l());
    }
    let jitter = 1e-10 * mat.trace();
    let jittered = &mat + DMatrix::identity(d, d) * jitter;
    jittered.cholesky().map(|c| c.l()).ok_or_else(|| {
        Error::CovarianceFailure(format!("not positive definite after jitter {jitter:e}"))
    })
}

/// Multivariate normal draws with the panel's sample mean and covariance.
pub fn generate_mvn(panel: &ReturnPanel, n: usize, seed: u64) -> Result<ScenarioSet> {
    if panel.names().is_empty() {
        return Err(Error::EmptyPanel);
    }
    if n == 0 {
        return Err(Error::EmptyScenarios);
    }
    let (mu, cov) = moments(panel);
    let (varying, constants) = split_constant(panel);
    let sub: Vec<Vec<f64>> = varying
        .iter()
        .map(|&i| varying.iter().map(|&j| cov[i][j]).collect())
        .collect();
    let l = if varying.is_empty() {
        DMatrix::zeros(0, 0)
    } else {
        cholesky_with_jitter(&sub)?
    };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let d = panel.names().len();
    let k = varying.len();
    let values = (0..n)
        .map(|_| {
            let z = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
            let x = &l * z;
            let mut row = vec![0.0; d];
            for (a, &j) in varying.iter().enumerate() {
                row[j] = mu[j] + x[a];
            }
            for &(j, c) in &constants {
                row[j] = c;
            }
            row
        })
        .collect();
    ScenarioSet::new(panel.names().to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel() -> ReturnPanel {
        let a: Vec<f64> = (0..60)
            .map(|t| ((t * 37 % 17) as f64 - 8.0) / 100.0)
            .collect();
        let b: Vec<f64> = a
            .iter()
            .enumerate()
            .map(|(t, x)| 0.5 * x + ((t * 11 % 7) as f64 - 3.0) / 200.0)
            .collect();
        let c = vec![0.002; 60];
        ReturnPanel::from_columns(
            vec!["a.USD".into(), "b.USD".into(), "fx.USD".into()],
            vec![a, b, c],
            "USD",
        )
        .unwrap()
    }

    #[test]
    fn probabilities_are_uniform() {
        let s = generate_mvn(&panel(), 7, 1).unwrap();
        assert_eq!(s.len(), 7);
        assert!((s.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_columns_pass_through() {
        let p = panel();
        let r = generate_rvc(&p, 50, &SelectOptions::default(), 3).unwrap();
        let m = generate_mvn(&p, 50, 3).unwrap();
        for s in [&r, &m] {
            assert!(s.column("fx.USD").unwrap().iter().all(|&x| x == 0.002));
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let p = panel();
        let opts = SelectOptions::default();
        assert_eq!(
            generate_rvc(&p, 30, &opts, 9).unwrap(),
            generate_rvc(&p, 30, &opts, 9).unwrap()
        );
        assert_eq!(
            generate_mvn(&p, 30, 9).unwrap(),
            generate_mvn(&p, 30, 9).unwrap()
        );
        assert_ne!(
            generate_mvn(&p, 30, 9).unwrap(),
            generate_mvn(&p, 30, 10).unwrap()
        );
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = generate_mvn(&panel(), 12, 4).unwrap();
        s.write_csv(&path).unwrap();
        assert_eq!(ScenarioSet::read_csv(&path).unwrap(), s);
    }

    #[test]
    fn jitter_rescues_singular_covariance() {
        let cov = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let l = cholesky_with_jitter(&cov).unwrap();
        assert!(l[(1, 1)] > 0.0);
        assert!(matches!(
            cholesky_with_jitter(&[vec![1.0, 2.0], vec![2.0, 1.0]]),
            Err(Error::CovarianceFailure(_))
        ));
    }
}
