//! Statistical machinery over backtest results and transcripts: log-odds
//! corpus comparison with a Dirichlet prior, Mann-Whitney U tests,
//! embedding-based similarity propagation, and the Sharpe-difference
//! tables.

mod embed;
mod logodds;
mod mwu;
mod report;

use thiserror::Error;

pub use embed::{cosine, EmbeddingBackend, HttpEmbedder, HttpEmbedderConfig, OfflineEmbedder};
pub use logodds::{log_odds, tokenize, top_k, LogOddsResult, TokenCorpus, TokenStat, TopTokens};
pub use mwu::{mann_whitney_u, PValueMethod, Stars, UTestResult};
pub use report::{
    delta_sharpe_tables, propagation_report, AblationTable, DeltaCell, DeltaRow, DeltaSrTables,
    SimilarityReport, SimilarityRow, TrialSharpe,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("corpus {0:?} is empty")]
    EmptyCorpus(String),
    #[error("sample is empty")]
    EmptySample,
    #[error("embedding backend failure: {0}")]
    Backend(String),
    #[error("{0}")]
    MissingData(String),
}
