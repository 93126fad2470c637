//! Shared fixtures for the criterion benches.

use kpl_core::generators::{laplacian_2d, ones_rhs};
use kpl_core::stability::CoefficientHistory;
use kpl_core::{solve, Method, Preconditioner, SolverConfig, SparseMatrix};

pub struct Problem {
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub m: Preconditioner,
}

/// `nx` by `nx` Laplacian with constant right-hand side and no preconditioner.
pub fn laplacian_problem(nx: usize) -> Problem {
    let a = laplacian_2d(nx, nx).expect("nonzero grid");
    let b = ones_rhs(a.n());
    let m = Preconditioner::identity(a.n());
    Problem { a, b, m }
}

/// Fixed-length solver configuration with the residual test switched off.
pub fn fixed_iterations(method: Method, iters: usize) -> SolverConfig {
    let cfg = SolverConfig::new(method)
        .with_max_iters(iters)
        .with_rtol(0.0);
    match method {
        Method::PcgSh => cfg.with_shift(4.0),
        Method::PcgVarSh => cfg.with_schedule(vec![4.0; iters + 1]),
        _ => cfg,
    }
}

/// Coefficient history of an unpreconditioned p-CG run.
pub fn pcg_history(nx: usize, iters: usize) -> CoefficientHistory {
    let p = laplacian_problem(nx);
    let res = solve(
        &p.a,
        &p.m,
        &p.b,
        &vec![0.0; p.a.n()],
        &fixed_iterations(Method::Pcg, iters),
    )
    .expect("Laplacian runs do not break down");
    CoefficientHistory::from_records(&res.history).expect("history is consecutive")
}
