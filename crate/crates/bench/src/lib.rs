//! Benchmark instances (trees, random graphs, cylinders), the reachability
//! and same-generation encodings, in-memory answer oracles and a ladder
//! runner.

pub mod encode;
pub mod gen;
pub mod oracle;
pub mod suite;

pub use encode::{Problem, Regime};
pub use gen::{Family, GraphInstance};
pub use suite::{run_suite, ReportRow, SuiteSpec};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("infeasible instance: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Engine(#[from] sqlog_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
