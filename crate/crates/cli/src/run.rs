//! Solve and shift-analysis runs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use rand::rngs::StdRng;
use rand::SeedableRng;

use kpl_core::generators::{laplacian_2d, ones_rhs, ones_solution_rhs, random_spd};
use kpl_core::history::write_sweep_csv;
use kpl_core::stability::{parse_grid, select_shift};
use kpl_core::{
    emit_history, read_history, read_matrix_market_file, solve, CoefficientHistory, HistoryFormat,
    Preconditioner, ShiftSweep, SolveResult, SparseMatrix,
};

use crate::config::{MatrixSource, PrecondSpec, RhsMode, RunConfig};
use crate::error::{file_err, Result};
use crate::fetch::{default_base_url, default_cache_dir, fetch_matrix};

pub fn load_matrix(cfg: &RunConfig) -> Result<SparseMatrix> {
    Ok(match &cfg.matrix {
        MatrixSource::File(path) => read_matrix_market_file(path).map_err(|e| match e {
            kpl_core::KplError::Io(io) => file_err(path)(io),
            other => other.into(),
        })?,
        MatrixSource::Laplacian { nx, ny } => laplacian_2d(*nx, *ny)?,
        MatrixSource::RandomSpd { n, cond } => {
            random_spd(*n, *cond, &mut StdRng::seed_from_u64(cfg.seed))?
        }
        MatrixSource::Named(name) => {
            let cache = cfg.cache_dir.clone().unwrap_or_else(default_cache_dir);
            let base = cfg.base_url.clone().unwrap_or_else(default_base_url);
            read_matrix_market_file(fetch_matrix(name, &cache, &base)?)?
        }
    })
}

pub fn build_rhs(a: &SparseMatrix, mode: RhsMode) -> Vec<f64> {
    match mode {
        RhsMode::OnesSolution => ones_solution_rhs(a).0,
        RhsMode::OnesRhs => ones_rhs(a.n()),
    }
}

pub fn build_preconditioner(a: &SparseMatrix, spec: PrecondSpec) -> Result<Preconditioner> {
    Ok(match spec {
        PrecondSpec::None => Preconditioner::identity(a.n()),
        PrecondSpec::Jacobi => Preconditioner::jacobi(a)?,
        PrecondSpec::Ic0 { eta } => Preconditioner::ic0(a, eta)?,
    })
}

/// Builds the problem described by `cfg` and solves it from `x0 = 0`.
/// The history goes to `cfg.output` when one is set.
pub fn run_solve(cfg: &RunConfig) -> Result<SolveResult> {
    let res = solve_config(cfg)?;
    if let Some(path) = &cfg.output {
        write_history_file(&res, cfg.format, path)?;
    }
    Ok(res)
}

/// Like [`run_solve`] but writes the history to `sink`.
pub fn run_solve_to<W: Write>(cfg: &RunConfig, sink: W) -> Result<SolveResult> {
    let res = solve_config(cfg)?;
    emit_history(&res.history, cfg.format, sink)?;
    Ok(res)
}

fn solve_config(cfg: &RunConfig) -> Result<SolveResult> {
    let a = load_matrix(cfg)?;
    let b = build_rhs(&a, cfg.rhs);
    let m = build_preconditioner(&a, cfg.precond)?;
    info!(
        "{} on {} (n = {}, nnz = {}), preconditioner {}",
        cfg.solver.method,
        cfg.matrix,
        a.n(),
        a.nnz(),
        cfg.precond
    );
    Ok(solve(&a, &m, &b, &vec![0.0; a.n()], &cfg.solver)?)
}

fn write_history_file(res: &SolveResult, format: HistoryFormat, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(file_err(path))?;
    let mut sink = BufWriter::new(file);
    emit_history(&res.history, format, &mut sink)?;
    sink.flush().map_err(file_err(path))
}

/// A shift sweep over a recorded coefficient history.
#[derive(Debug, Clone)]
pub struct AnalyzeRequest {
    pub history: PathBuf,
    /// Iteration to evaluate `psi_i` at; the whole history when unset.
    pub iter: Option<usize>,
    pub grid: String,
    /// Sweep CSV destination.
    pub output: Option<PathBuf>,
}

pub const DEFAULT_GRID: &str = "0:0.25:10";

impl AnalyzeRequest {
    pub fn new(history: impl Into<PathBuf>) -> Self {
        Self {
            history: history.into(),
            iter: None,
            grid: DEFAULT_GRID.to_string(),
            output: None,
        }
    }
}

/// Reads the `alpha, beta` columns of a CSV or JSON history (by extension)
/// and evaluates `psi_i` over the grid.
pub fn run_analyze_shift(req: &AnalyzeRequest) -> Result<ShiftSweep> {
    let format = if req.history.extension().is_some_and(|e| e == "json") {
        HistoryFormat::Json
    } else {
        HistoryFormat::Csv
    };
    let file = File::open(&req.history).map_err(file_err(&req.history))?;
    let records = read_history(std::io::BufReader::new(file), format)?;
    let hist = CoefficientHistory::from_records(&records)?;
    let grid = parse_grid(&req.grid)?;
    let sweep = select_shift(&hist, req.iter.unwrap_or(hist.len()), &grid)?;
    if let Some(path) = &req.output {
        let file = File::create(path).map_err(file_err(path))?;
        let mut sink = BufWriter::new(file);
        write_sweep_csv(&sweep, &mut sink)?;
        sink.flush().map_err(file_err(path))?;
    }
    Ok(sweep)
}
