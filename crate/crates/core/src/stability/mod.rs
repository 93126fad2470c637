//! Rounding-error propagation in the pipelined recurrences: the 4x4 gap
//! propagation matrices, their products, the amplification indicator
//! `psi_i(sigma)`, local error bounds and a-posteriori shift selection.

mod bounds;
mod gap_model;
mod propagation;
mod shift;

pub use bounds::{
    initial_residual_gap_bound, local_error_bounds, local_error_bounds_var, remainder_bounds,
    LocalErrorBounds, LocalNorms, OperatorNorms,
};
pub use gap_model::{modeled_gap_evolution, modeled_gap_unrolled, GapModelMode, GapVector4};
pub use propagation::{
    factor, matrix_2norm, propagation_matrix, propagation_matrix_var, propagation_product,
    propagation_product_with, psi, psi_trajectory, psi_with, CoefficientHistory,
    PropagationMatrix4, ShiftModel,
};
pub use shift::{default_shift_grid, parse_grid, select_shift, ShiftSweep, DEFAULT_GRID_POINTS};
