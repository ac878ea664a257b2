//! Vine-copula scenario generation and two-stage CVaR portfolio optimization
//! with a currency overlay.

pub mod bicop;
pub mod error;
pub mod ga;
pub mod harness;
pub mod marginals;
pub mod model;
pub mod numeric;
pub mod overlay;
pub mod panel;
pub mod rvine;
pub mod scenarios;

pub use error::{Error, Result};
