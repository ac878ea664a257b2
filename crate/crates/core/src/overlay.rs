//! Currency-overlay algebra.
//!
//! A forward on pair `(j1, j2)` with `j1 < j2` and signed notional `q` buys
//! `q` of currency `j1` and sells `q` of `j2`; a negative `q` reverses the
//! legs. Each pair is a row of the ternary matrix `T` with `+1` at `j1` and
//! `−1` at `j2`, and the overlay matrix is `F[k][j] = T[k][j]·q[k]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TernaryMatrix {
    n_currencies: usize,
    pairs: Vec<(usize, usize)>,
}

impl TernaryMatrix {
    pub fn n_currencies(&self) -> usize {
        self.n_currencies
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// `(long, short)` currency indices, in row order.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn entry(&self, k: usize, j: usize) -> i8 {
        let (a, b) = self.pairs[k];
        if j == a {
            1
        } else if j == b {
            -1
        } else {
            0
        }
    }

    pub fn row(&self, k: usize) -> Vec<i8> {
        (0..self.n_currencies).map(|j| self.entry(k, j)).collect()
    }

    /// Row index of the pair `(a, b)`, in either orientation, with the sign
    /// needed to express "buy `a`, sell `b`".
    pub fn find(&self, a: usize, b: usize) -> Option<(usize, f64)> {
        self.pairs
            .iter()
            .position(|&p| p == (a, b))
            .map(|k| (k, 1.0))
            .or_else(|| {
                self.pairs
                    .iter()
                    .position(|&p| p == (b, a))
                    .map(|k| (k, -1.0))
            })
    }
}

/// All `C(C−1)/2` currency pairs in lexicographic order.
pub fn build_ternary(n_currencies: usize) -> Result<TernaryMatrix> {
    if n_currencies < 2 {
        return Err(Error::DimensionMismatch(format!(
            "an overlay needs at least 2 currencies, got {n_currencies}"
        )));
    }
    let pairs = (0..n_currencies)
        .flat_map(|a| (a + 1..n_currencies).map(move |b| (a, b)))
        .collect();
    Ok(TernaryMatrix {
        n_currencies,
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayState {
    pub q: Vec<f64>,
    pub f: Vec<Vec<f64>>,
}

impl OverlayState {
    /// Net overlay position per currency (column sums of `F`).
    pub fn positions(&self) -> Vec<f64> {
        let c = self.f.first().map_or(0, Vec::len);
        (0..c)
            .map(|j| self.f.iter().map(|row| row[j]).sum())
            .collect()
    }

    pub fn total(&self) -> f64 {
        total_overlay(&self.f)
    }

    /// Carry of each contract: its row of `F` weighted by the rates.
    pub fn contract_carry(&self, rates: &[f64]) -> Vec<f64> {
        self.f.iter().map(|row| cost_of_carry(row, rates)).collect()
    }
}

pub fn build_overlay(t: &TernaryMatrix, q: &[f64]) -> Result<OverlayState> {
    if q.len() != t.n_pairs() {
        return Err(Error::DimensionMismatch(format!(
            "{} forward positions for {} pairs",
            q.len(),
            t.n_pairs()
        )));
    }
    let f = q
        .iter()
        .enumerate()
        .map(|(k, &qk)| {
            (0..t.n_currencies)
                .map(|j| f64::from(t.entry(k, j)) * qk)
                .collect()
        })
        .collect();
    Ok(OverlayState { q: q.to_vec(), f })
}

/// Net carry `Σ_j v_j·i_j` of per-currency overlay positions.
///
/// # Panics
/// If the two slices differ in length.
pub fn cost_of_carry(positions: &[f64], rates: &[f64]) -> f64 {
    assert_eq!(
        positions.len(),
        rates.len(),
        "positions and rates must align"
    );
    positions.iter().zip(rates).map(|(v, i)| v * i).sum()
}

/// `½·Σ_j |Σ_k F[k][j]|`.
pub fn total_overlay(f: &[Vec<f64>]) -> f64 {
    let c = f.first().map_or(0, Vec::len);
    0.5 * (0..c)
        .map(|j| f.iter().map(|row| row[j]).sum::<f64>().abs())
        .sum::<f64>()
}

/// Currency exposure: asset value plus net overlay per currency, with the
/// forward margin cash counted in the base currency (index `base`).
pub fn currency_exposure(
    asset_values: &[f64],
    overlay: &[f64],
    margin: f64,
    base: usize,
) -> Result<Vec<f64>> {
    if asset_values.len() != overlay.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} asset exposures for {} overlay columns",
            asset_values.len(),
            overlay.len()
        )));
    }
    if base >= asset_values.len() {
        return Err(Error::DimensionMismatch(format!(
            "base currency index {base} out of range"
        )));
    }
    let mut c: Vec<f64> = asset_values
        .iter()
        .zip(overlay)
        .map(|(a, f)| a + f)
        .collect();
    c[base] += margin;
    Ok(c)
}
