//! Run configuration, frontier sweeps, out-of-sample backtests, run
//! manifests and the command-line interface.

mod backtest;
pub mod cli;
mod config;
mod frontier;
mod manifest;

pub use backtest::{backtest, historical_cvar, quantile, write_backtest_csv, BacktestReport};
pub use config::Config;
pub use frontier::{
    frontier, return_upper_bound, solve_point, write_frontier_csv, FrontierPoint, PointStatus,
};
pub use manifest::{sha256_file, timestamp, FileDigest, Manifest};
