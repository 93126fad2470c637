//! Benchmark table: CG, p-CG and shifted p-CG on fixed problems, with the
//! final true residuals checked against reference values.

use std::fmt::{self, Write as _};
use std::path::Path;

use kpl_core::generators::laplacian_2d;
use kpl_core::{read_matrix_market_file, solve, Method, SolverConfig, SparseMatrix};

use crate::config::{PrecondSpec, RhsMode};
use crate::error::Result;
use crate::fetch::{fetch_matrix_with, Transport};
use crate::run::{build_preconditioner, build_rhs};

/// Reference finals may be off by this factor either way.
pub const TOLERANCE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchSource {
    Laplacian {
        nx: usize,
        ny: usize,
    },
    /// Matrix Market collection entry, fetched by name.
    Fetched,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkDescriptor {
    pub name: String,
    pub source: BenchSource,
    pub n: usize,
    pub precond: PrecondSpec,
    pub rhs: RhsMode,
    pub iters: usize,
    pub sigma: f64,
    pub condition: f64,
    pub initial_residual: f64,
    /// Final `||b - A x||` for CG, p-CG and shifted p-CG.
    pub expected: [f64; 3],
}

fn row(
    name: &str,
    source: BenchSource,
    n: usize,
    precond: PrecondSpec,
    rhs: RhsMode,
    (condition, iters, sigma, initial_residual): (f64, usize, f64, f64),
    expected: [f64; 3],
) -> BenchmarkDescriptor {
    BenchmarkDescriptor {
        name: name.to_string(),
        source,
        n,
        precond,
        rhs,
        iters,
        sigma,
        condition,
        initial_residual,
        expected,
    }
}

/// The four reference problems.
pub fn reference_table() -> Vec<BenchmarkDescriptor> {
    use BenchSource::*;
    use RhsMode::*;
    vec![
        row(
            "lapl200",
            Laplacian { nx: 200, ny: 200 },
            40_000,
            PrecondSpec::None,
            OnesRhs,
            (2.4e4, 500, 4.00, 1.0e0),
            [6.8e-12, 3.1e-7, 6.8e-12],
        ),
        row(
            "bcsstk15",
            Fetched,
            3_948,
            PrecondSpec::Jacobi,
            OnesSolution,
            (8.0e9, 800, 2.00, 4.3e8),
            [1.7e-6, 1.2e-2, 1.9e-6],
        ),
        row(
            "nos1",
            Fetched,
            237,
            PrecondSpec::Ic0 { eta: 0.5 },
            OnesSolution,
            (2.5e7, 400, 0.82, 5.7e7),
            [9.8e-7, 1.5e-2, 3.2e-6],
        ),
        row(
            "s1rmt3m1",
            Fetched,
            5_489,
            PrecondSpec::Ic0 { eta: 0.0 },
            OnesSolution,
            (2.5e6, 300, 1.00, 1.5e4),
            [1.4e-10, 4.4e-7, 1.4e-10],
        ),
    ]
}

pub fn reference_row(name: &str) -> Option<BenchmarkDescriptor> {
    reference_table().into_iter().find(|d| d.name == name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowResult {
    pub n: usize,
    pub initial_residual: f64,
    /// Final true residuals for CG, p-CG and shifted p-CG.
    pub finals: [f64; 3],
    pub within_tolerance: [bool; 3],
}

impl RowResult {
    pub fn passed(&self) -> bool {
        self.within_tolerance.iter().all(|&ok| ok)
    }

    /// How many times smaller the shifted p-CG residual is than p-CG's.
    pub fn shift_improvement(&self) -> f64 {
        self.finals[1] / self.finals[2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowOutcome {
    Ran(RowResult),
    /// The matrix was unavailable.
    Skipped(String),
    /// The matrix loaded but a solve failed or the size is wrong.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub descriptor: BenchmarkDescriptor,
    pub outcome: RowOutcome,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkReport {
    /// No row ran and missed its references. Skipped rows do not count.
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| match &r.outcome {
            RowOutcome::Ran(res) => res.passed(),
            RowOutcome::Skipped(_) => true,
            RowOutcome::Failed(_) => false,
        })
    }
}

impl fmt::Display for BenchmarkReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            let d = &r.descriptor;
            let mut line = format!("{:<10} ", d.name);
            match &r.outcome {
                RowOutcome::Ran(res) => {
                    let status = if res.passed() { "pass" } else { "FAIL" };
                    write!(
                        line,
                        "{status}  n={} i={} sigma={:.2}",
                        res.n, d.iters, d.sigma
                    )?;
                    for (k, label) in ["cg", "pcg", "pcg-sh"].iter().enumerate() {
                        let mark = if res.within_tolerance[k] { "" } else { "!" };
                        write!(
                            line,
                            "  {label}={:.1e}{mark} (ref {:.1e})",
                            res.finals[k], d.expected[k]
                        )?;
                    }
                }
                RowOutcome::Skipped(why) => write!(line, "skip  {why}")?,
                RowOutcome::Failed(why) => write!(line, "FAIL  {why}")?,
            }
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

fn within(value: f64, reference: f64) -> bool {
    value.is_finite()
        && value <= reference * TOLERANCE_FACTOR
        && value >= reference / TOLERANCE_FACTOR
}

fn run_row(d: &BenchmarkDescriptor, a: &SparseMatrix) -> Result<RowOutcome> {
    if a.n() != d.n {
        return Ok(RowOutcome::Failed(format!(
            "expected n = {}, loaded n = {}",
            d.n,
            a.n()
        )));
    }
    let b = build_rhs(a, d.rhs);
    let m = build_preconditioner(a, d.precond)?;
    let x0 = vec![0.0; a.n()];
    let mut finals = [0.0; 3];
    let mut initial = 0.0;
    for (k, (method, shift)) in [
        (Method::Cg, 0.0),
        (Method::Pcg, 0.0),
        (Method::PcgSh, d.sigma),
    ]
    .into_iter()
    .enumerate()
    {
        let cfg = SolverConfig::new(method)
            .with_max_iters(d.iters)
            .with_rtol(0.0)
            .with_shift(shift);
        let res = match solve(a, &m, &b, &x0, &cfg) {
            Ok(res) => res,
            Err(e) => return Ok(RowOutcome::Failed(format!("{method}: {e}"))),
        };
        initial = res.history[0]
            .rnorm_true
            .unwrap_or(res.history[0].rnorm_recursive);
        finals[k] = res.final_true_residual();
    }
    let within_tolerance = std::array::from_fn(|k| within(finals[k], d.expected[k]));
    Ok(RowOutcome::Ran(RowResult {
        n: a.n(),
        initial_residual: initial,
        finals,
        within_tolerance,
    }))
}

/// Supplies the matrix of a benchmark row.
pub type MatrixProvider<'a> = dyn Fn(&BenchmarkDescriptor) -> Result<SparseMatrix> + Sync + 'a;

/// Generates Laplacian rows and fetches the others through `transport`.
pub fn default_provider<'a>(
    transport: &'a (dyn Transport + Sync),
    cache_dir: &'a Path,
    base_url: &'a str,
) -> impl Fn(&BenchmarkDescriptor) -> Result<SparseMatrix> + Sync + 'a {
    move |d| match d.source {
        BenchSource::Laplacian { nx, ny } => Ok(laplacian_2d(nx, ny)?),
        BenchSource::Fetched => {
            let path = fetch_matrix_with(transport, &d.name, cache_dir, base_url)?;
            Ok(read_matrix_market_file(path)?)
        }
    }
}

/// Runs every row, in parallel, one thread per row. Rows whose matrix the
/// provider cannot supply are skipped. The report keeps descriptor order.
pub fn run_benchmark_suite(
    descriptors: &[BenchmarkDescriptor],
    provider: &MatrixProvider<'_>,
) -> BenchmarkReport {
    let outcomes: Vec<RowOutcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = descriptors
            .iter()
            .map(|d| {
                scope.spawn(move || match provider(d) {
                    Err(e) => RowOutcome::Skipped(e.to_string()),
                    Ok(a) => run_row(d, &a).unwrap_or_else(|e| RowOutcome::Failed(e.to_string())),
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| RowOutcome::Failed("worker panicked".into()))
            })
            .collect()
    });
    BenchmarkReport {
        rows: descriptors
            .iter()
            .cloned()
            .zip(outcomes)
            .map(|(descriptor, outcome)| BenchmarkRow {
                descriptor,
                outcome,
            })
            .collect(),
    }
}
