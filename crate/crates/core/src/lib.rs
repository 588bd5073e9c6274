//! Deterministic, leakage-guarded backtesting engine for a hierarchical
//! multi-agent trading system.
//!
//! The crate is organized around the monthly decision loop of a long-short
//! equity desk staffed by language-model agents:
//!
//! - [`data`] loads and time-slices market fixtures (prices, statements,
//!   news, macro indicators) with a hard no-look-ahead guarantee.
//! - [`indicators`] computes the technical feature set (RoC, Bollinger-Z,
//!   MACD, RSI, KDJ) and the raw price window fed to coarse-grained agents.
//! - [`fundamentals`] builds trailing-twelve-month metric packs and raw
//!   statement packs, plus sector averages.
//! - [`agents`] renders prompts, drives the three-level agent hierarchy
//!   against pluggable chat backends, parses outputs, and persists
//!   transcripts.
//! - [`portfolio`] turns final scores into market-neutral books and runs
//!   the open-to-open monthly backtest.
//! - [`optimizer`] builds the equal-risk-contribution strategy composite
//!   and the index blend sweep.
//! - [`analysis`] houses the statistical machinery: Mann-Whitney U,
//!   log-odds with a Dirichlet prior, embedding similarity, and the
//!   Sharpe-difference tables.
//! - [`testkit`] generates deterministic synthetic fixtures for tests and
//!   demos.

pub mod agents;
pub mod analysis;
pub mod data;
pub mod fundamentals;
pub mod indicators;
pub mod num;
pub mod optimizer;
pub mod portfolio;
pub mod testkit;
pub mod time;

pub use time::Month;
