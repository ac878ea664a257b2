//! Return panels: named per-period series with interest-rate columns.
//!
//! Column naming: `rate.<CCY>` holds per-period interest rates, `fx.<CCY>`
//! holds the return of currency `<CCY>` against the base currency, and any
//! other `<name>.<CCY>` is an asset return in local currency `<CCY>`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeriesKind {
    Rate(String),
    Currency(String),
    Asset { currency: String },
    Other,
}

pub fn classify(name: &str) -> SeriesKind {
    match name.rsplit_once('.') {
        Some(("rate", ccy)) => SeriesKind::Rate(ccy.to_string()),
        Some(("fx", ccy)) => SeriesKind::Currency(ccy.to_string()),
        Some((_, ccy)) if !ccy.is_empty() => SeriesKind::Asset {
            currency: ccy.to_string(),
        },
        _ => SeriesKind::Other,
    }
}

pub fn currency_column(ccy: &str) -> String {
    format!("fx.{ccy}")
}

pub fn rate_column(ccy: &str) -> String {
    format!("rate.{ccy}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnPanel {
    periods: Vec<String>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    base_currency: String,
}

impl ReturnPanel {
    pub fn new(
        periods: Vec<String>,
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
        base_currency: impl Into<String>,
    ) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::LengthMismatch {
                left: names.len(),
                right: columns.len(),
            });
        }
        for col in &columns {
            if col.len() != periods.len() {
                return Err(Error::LengthMismatch {
                    left: periods.len(),
                    right: col.len(),
                });
            }
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name) {
                return Err(Error::InvalidInstance(format!("duplicate column `{name}`")));
            }
        }
        Ok(ReturnPanel {
            periods,
            names,
            columns,
            base_currency: base_currency.into(),
        })
    }

    /// Panel with generated period labels `1..=len`.
    pub fn from_columns(
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
        base_currency: &str,
    ) -> Result<Self> {
        let len = columns.first().map_or(0, Vec::len);
        let periods = (1..=len).map(|p| p.to_string()).collect();
        Self::new(periods, names, columns, base_currency)
    }

    pub fn periods(&self) -> &[String] {
        &self.periods
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn base_currency(&self) -> &str {
        &self.base_currency
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Currencies referenced by any column, base currency first, others sorted.
    pub fn currencies(&self) -> Vec<String> {
        let mut others = BTreeSet::new();
        for name in &self.names {
            match classify(name) {
                SeriesKind::Rate(c)
                | SeriesKind::Currency(c)
                | SeriesKind::Asset { currency: c } => {
                    if c != self.base_currency {
                        others.insert(c);
                    }
                }
                SeriesKind::Other => {}
            }
        }
        std::iter::once(self.base_currency.clone())
            .chain(others)
            .collect()
    }

    /// Contiguous row range as a new panel.
    pub fn slice(&self, start: usize, end: usize) -> ReturnPanel {
        ReturnPanel {
            periods: self.periods[start..end].to_vec(),
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| c[start..end].to_vec())
                .collect(),
            base_currency: self.base_currency.clone(),
        }
    }

    /// Checks that every currency used by an asset or currency column has a
    /// rate series.
    pub fn validate_rates(&self) -> Result<()> {
        for name in &self.names {
            let ccy = match classify(name) {
                SeriesKind::Currency(c) | SeriesKind::Asset { currency: c } => c,
                _ => continue,
            };
            if self.column(&rate_column(&ccy)).is_none() {
                return Err(Error::MissingRateSeries(ccy));
            }
        }
        Ok(())
    }

    /// Carry-adjusted panel: assets become `r^a − i`, currencies `r^c + i`,
    /// and the base currency gets an explicit `fx.<BASE>` column equal to its
    /// rate. Rate columns are dropped, since every rate now lives inside the
    /// adjusted returns.
    pub fn adjust_returns(&self) -> Result<ReturnPanel> {
        self.validate_rates()?;
        let base_rate = self
            .column(&rate_column(&self.base_currency))
            .ok_or_else(|| Error::MissingRateSeries(self.base_currency.clone()))?;
        let mut names = Vec::new();
        let mut columns = Vec::new();
        let mut has_base_fx = false;
        for (name, col) in self.names.iter().zip(&self.columns) {
            let adjusted: Vec<f64> = match classify(name) {
                SeriesKind::Rate(_) => continue,
                SeriesKind::Other => col.clone(),
                SeriesKind::Asset { currency } => {
                    let rate = self.require(&rate_column(&currency))?;
                    col.iter().zip(rate).map(|(r, i)| r - i).collect()
                }
                SeriesKind::Currency(currency) => {
                    has_base_fx |= currency == self.base_currency;
                    let rate = self.require(&rate_column(&currency))?;
                    col.iter().zip(rate).map(|(r, i)| r + i).collect()
                }
            };
            names.push(name.clone());
            columns.push(adjusted);
        }
        if !has_base_fx {
            names.push(currency_column(&self.base_currency));
            columns.push(base_rate.to_vec());
        }
        ReturnPanel::new(
            self.periods.clone(),
            names,
            columns,
            self.base_currency.clone(),
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["period".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (t, period) in self.periods.iter().enumerate() {
            let mut row = vec![period.clone()];
            row.extend(self.columns.iter().map(|c| c[t].to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Reads a panel CSV: header `period,<series>...`, one row per period.
pub fn load_panel(path: &Path, base_currency: &str) -> Result<ReturnPanel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_panel(&text, base_currency)
}

pub fn parse_panel(text: &str, base_currency: &str) -> Result<ReturnPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::ParseError {
        line: 1,
        message: e.to_string(),
    })?;
    if header.get(0) != Some("period") {
        return Err(Error::ParseError {
            line: 1,
            message: "first column must be `period`".into(),
        });
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if names.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let mut periods = Vec::new();
    let mut columns = vec![Vec::new(); names.len()];
    for record in reader.records() {
        let record = record.map_err(|e| Error::ParseError {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != names.len() + 1 {
            return Err(Error::ParseError {
                line,
                message: format!(
                    "expected {} fields, found {}",
                    names.len() + 1,
                    record.len()
                ),
            });
        }
        periods.push(record[0].to_string());
        for (j, cell) in record.iter().skip(1).enumerate() {
            if cell.is_empty() {
                return Err(Error::ParseError {
                    line,
                    message: format!("blank cell in column `{}`", names[j]),
                });
            }
            let value: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                line,
                column: names[j].clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonNumericCell {
                    line,
                    column: names[j].clone(),
                    value: cell.to_string(),
                });
            }
            columns[j].push(value);
        }
    }
    let panel = ReturnPanel::new(periods, names, columns, base_currency)?;
    panel.validate_rates()?;
    Ok(panel)
}
