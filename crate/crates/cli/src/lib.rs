//! Harness around `kpl-core`: run configuration, Matrix Market fetching,
//! solve and shift-analysis orchestration, and the benchmark table.

pub mod bench;
pub mod config;
pub mod error;
pub mod fetch;
pub mod run;

pub use bench::{
    reference_table, run_benchmark_suite, BenchmarkDescriptor, BenchmarkReport, BenchmarkRow,
    RowOutcome,
};
pub use config::{MatrixSource, PrecondSpec, RhsMode, RunConfig, RunOptions};
pub use error::{HarnessError, Result};
pub use fetch::{default_cache_dir, fetch_matrix, fetch_matrix_with, Transport, UreqTransport};
pub use run::{run_analyze_shift, run_solve, run_solve_to, AnalyzeRequest};
