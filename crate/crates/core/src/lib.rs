//! Sparse SPD solver laboratory: classic, pipelined and shifted pipelined
//! conjugate gradients, instrumented to measure the gaps between recursively
//! updated and explicitly computed vectors, together with the propagation
//! model that predicts how those gaps grow.

pub mod error;
pub mod generators;
pub mod history;
pub mod matrix_market;
pub mod precond;
pub mod solvers;
pub mod sparse;
pub mod stability;

pub use error::{KplError, Result};
pub use history::{emit_history, read_history, HistoryFormat};
pub use matrix_market::{read_matrix_market, read_matrix_market_file, write_matrix_market};
pub use precond::{Preconditioner, PreconditionerKind};
pub use solvers::{
    solve, solve_observed, IterationRecord, IterationView, Method, Observer, SolveResult,
    SolverConfig,
};
pub use sparse::SparseMatrix;
pub use stability::{CoefficientHistory, PropagationMatrix4, ShiftSweep};
