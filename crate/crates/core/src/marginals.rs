//! Kernel density marginals and the probability integral transform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{quantile_sorted, sample_std, sorted_copy};
use crate::panel::ReturnPanel;

pub const GRID_POINTS: usize = 1024;
pub const MIN_SAMPLES: usize = 8;

/// Rule-of-thumb constant for the Epanechnikov kernel.
pub const EPANECHNIKOV_SILVERMAN: f64 = 2.345;

/// Smoothed marginal distribution of one return series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalModel {
    samples: Vec<f64>,
    bandwidth: f64,
    grid: Vec<f64>,
    density: Vec<f64>,
    cdf: Vec<f64>,
}

fn epanechnikov(t: f64) -> f64 {
    if t.abs() <= 1.0 {
        0.75 * (1.0 - t * t)
    } else {
        0.0
    }
}

/// h = 2.345 · min(std, IQR/1.349) · m^(−1/5).
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let sorted = sorted_copy(samples);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let sd = sample_std(samples);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.349) } else { sd };
    EPANECHNIKOV_SILVERMAN * spread * (samples.len() as f64).powf(-0.2)
}

impl MarginalModel {
    pub fn fit_kde(samples: &[f64]) -> Result<Self> {
        if samples.len() < MIN_SAMPLES {
            return Err(Error::DegenerateSample(format!(
                "{} samples, need at least {MIN_SAMPLES}",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
            return Err(Error::DegenerateSample(format!("non-finite sample {bad}")));
        }
        let (lo, hi) = samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
        if lo == hi {
            return Err(Error::DegenerateSample(format!("all samples equal {lo}")));
        }

        let h = silverman_bandwidth(samples);
        let start = lo - 3.0 * h;
        let end = hi + 3.0 * h;
        let step = (end - start) / (GRID_POINTS - 1) as f64;
        let grid: Vec<f64> = (0..GRID_POINTS)
            .map(|i| {
                if i + 1 == GRID_POINTS {
                    end
                } else {
                    start + step * i as f64
                }
            })
            .collect();

        let scale = 1.0 / (samples.len() as f64 * h);
        let mut density: Vec<f64> = grid
            .iter()
            .map(|&x| {
                scale
                    * samples
                        .iter()
                        .map(|&s| epanechnikov((x - s) / h))
                        .sum::<f64>()
            })
            .collect();

        let mut cdf = Vec::with_capacity(GRID_POINTS);
        cdf.push(0.0);
        for i in 1..GRID_POINTS {
            let area = 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
            cdf.push(cdf[i - 1] + area);
        }
        let total = cdf[GRID_POINTS - 1];
        for d in &mut density {
            *d /= total;
        }
        for c in &mut cdf {
            *c /= total;
        }
        cdf[GRID_POINTS - 1] = 1.0;

        Ok(MarginalModel {
            samples: samples.to_vec(),
            bandwidth: h,
            grid,
            density,
            cdf,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn density_table(&self) -> &[f64] {
        &self.density
    }

    pub fn cdf_table(&self) -> &[f64] {
        &self.cdf
    }

    pub fn grid_step(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    pub fn support(&self) -> (f64, f64) {
        (self.grid[0], self.grid[GRID_POINTS - 1])
    }

    /// Density by linear interpolation of the grid table, zero outside.
    pub fn density(&self, x: f64) -> f64 {
        self.interpolate(x, &self.density, 0.0, 0.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.interpolate(x, &self.cdf, 0.0, 1.0).clamp(0.0, 1.0)
    }

    fn interpolate(&self, x: f64, table: &[f64], below: f64, above: f64) -> f64 {
        let (lo, hi) = self.support();
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= lo {
            return if x == lo { table[0] } else { below };
        }
        if x >= hi {
            return if x == hi {
                table[GRID_POINTS - 1]
            } else {
                above
            };
        }
        let pos = (x - lo) / self.grid_step();
        let i = (pos.floor() as usize).min(GRID_POINTS - 2);
        let t = (x - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
        table[i] + t * (table[i + 1] - table[i])
    }

    /// Generalized inverse of [`cdf`](Self::cdf).
    pub fn inv_cdf(&self, u: f64) -> f64 {
        let (lo, hi) = self.support();
        if u <= 0.0 {
            return lo;
        }
        if u >= 1.0 {
            return hi;
        }
        let i = self
            .cdf
            .partition_point(|&c| c < u)
            .clamp(1, GRID_POINTS - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        if c1 <= c0 {
            return self.grid[i];
        }
        let t = (u - c0) / (c1 - c0);
        self.grid[i - 1] + t * (self.grid[i] - self.grid[i - 1])
    }
}

/// Uniform pseudo-observations of every panel column together with the
/// marginal models that produced them.
#[derive(Debug, Clone)]
pub struct PitPanel {
    pub names: Vec<String>,
    pub models: Vec<MarginalModel>,
    pub uniforms: Vec<Vec<f64>>,
}

pub fn pit_transform(panel: &ReturnPanel) -> Result<PitPanel> {
    if panel.names().is_empty() {
        return Err(Error::EmptyPanel);
    }
    let mut models = Vec::with_capacity(panel.names().len());
    let mut uniforms = Vec::with_capacity(panel.names().len());
    for (name, column) in panel.names().iter().zip(panel.columns()) {
        let model = MarginalModel::fit_kde(column).map_err(|e| e.in_column(name.clone()))?;
        uniforms.push(column.iter().map(|&x| model.cdf(x)).collect());
        models.push(model);
    }
    Ok(PitPanel {
        names: panel.names().to_vec(),
        models,
        uniforms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_draws(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn bandwidth_matches_hand_formula() {
        let xs = normal_draws(120, 1);
        let m = MarginalModel::fit_kde(&xs).unwrap();

        // independent recomputation
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        let mut s = xs.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| {
            let pos = p * (n - 1.0);
            let i = pos.floor() as usize;
            s[i] + (pos - i as f64) * (s[i + 1] - s[i])
        };
        let iqr = q(0.75) - q(0.25);
        let expected = 2.345 * sd.min(iqr / 1.349) * n.powf(-0.2);
        assert!((m.bandwidth() - expected).abs() < 1e-14);
    }

    #[test]
    fn constant_and_short_samples_are_degenerate() {
        assert!(matches!(
            MarginalModel::fit_kde(&[0.01; 20]),
            Err(Error::DegenerateSample(_))
        ));
        assert!(matches!(
            MarginalModel::fit_kde(&[0.1, 0.2, 0.3]),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn density_integrates_to_one_and_is_symmetric() {
        let half = normal_draws(60, 2);
        let xs: Vec<f64> = half.iter().flat_map(|&x| [x, -x]).collect();
        let m = MarginalModel::fit_kde(&xs).unwrap();
        let g = m.grid();
        let d = m.density_table();
        let integral: f64 = (1..g.len())
            .map(|i| 0.5 * (d[i] + d[i - 1]) * (g[i] - g[i - 1]))
            .sum();
        assert!((integral - 1.0).abs() < 1e-6);
        for (i, &x) in g.iter().enumerate() {
            assert!(d[i] >= 0.0);
            assert!((m.density(x) - m.density(-x)).abs() < 1e-9);
        }
        assert!((m.cdf(0.0) - 0.5).abs() < 0.02);
        let median = quantile_sorted(&sorted_copy(&xs), 0.5);
        assert!((m.inv_cdf(0.5) - median).abs() < 0.05);
    }

    #[test]
    fn cdf_boundaries_and_inverse_endpoints() {
        let m = MarginalModel::fit_kde(&normal_draws(50, 3)).unwrap();
        let (lo, hi) = m.support();
        assert_eq!(m.cdf(lo - 1.0), 0.0);
        assert_eq!(m.cdf(hi + 1.0), 1.0);
        assert_eq!(m.inv_cdf(0.0), lo);
        assert_eq!(m.inv_cdf(1.0), hi);
        assert!(m.cdf_table()[0].abs() < 1e-9);
        assert!((m.cdf_table()[GRID_POINTS - 1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip_within_one_grid_step() {
        let xs = normal_draws(200, 4);
        let m = MarginalModel::fit_kde(&xs).unwrap();
        let (lo, hi) = (
            xs.iter().cloned().fold(f64::INFINITY, f64::min),
            xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        for k in 0..100 {
            let x = lo + (hi - lo) * (k as f64 + 0.5) / 100.0;
            assert!((m.inv_cdf(m.cdf(x)) - x).abs() < m.grid_step());
        }
    }

    #[test]
    fn fit_is_bit_deterministic() {
        let xs = normal_draws(64, 5);
        assert_eq!(
            MarginalModel::fit_kde(&xs).unwrap(),
            MarginalModel::fit_kde(&xs).unwrap()
        );
    }
}
