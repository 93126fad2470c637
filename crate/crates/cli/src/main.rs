use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;

use kpl_cli::bench::{default_provider, reference_table, run_benchmark_suite};
use kpl_cli::config::{MatrixSource, RunConfig, RunOptions};
use kpl_cli::fetch::{default_base_url, default_cache_dir, fetch_matrix, UreqTransport};
use kpl_cli::run::{load_matrix, run_analyze_shift, run_solve, run_solve_to, AnalyzeRequest};
use kpl_core::matrix_market::write_matrix_market_file;

#[derive(Parser)]
#[command(
    name = "kpl",
    version,
    about = "Classic, pipelined and shifted pipelined CG"
)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one system and write its iteration history.
    Solve(SolveArgs),
    /// Evaluate the gap amplification psi_i(sigma) of a recorded history over a shift grid.
    AnalyzeShift(AnalyzeArgs),
    /// Download a Matrix Market collection entry into the cache.
    Fetch(FetchArgs),
    /// Write a generated matrix in Matrix Market format.
    Gen(GenArgs),
    /// Run CG, p-CG and shifted p-CG on the benchmark problems.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// TOML file with defaults for any of the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Matrix Market file, lapl:NXxNY, spd:N:COND or mm:NAME.
    #[arg(long)]
    matrix: Option<String>,
    /// ones-solution (b = A x with x_j = 1/sqrt(n)) or ones-rhs (b_j = 1/sqrt(n)).
    #[arg(long)]
    rhs: Option<String>,
    /// none, jacobi or ic0.
    #[arg(long)]
    precond: Option<String>,
    /// Diagonal shift eta of the incomplete Cholesky factorization.
    #[arg(long)]
    ic_shift: Option<f64>,
    /// cg, pcg, pcg-sh, pcg-var-sh or pcg-rr.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    shift: Option<f64>,
    /// File of shifts sigma_-1 sigma_0 sigma_1 ... for pcg-var-sh.
    #[arg(long)]
    shift_schedule: Option<PathBuf>,
    #[arg(long)]
    maxit: Option<usize>,
    /// Relative residual tolerance; 0 runs the full iteration budget.
    #[arg(long)]
    rtol: Option<f64>,
    /// Residual replacement threshold for pcg-rr.
    #[arg(long)]
    rr_threshold: Option<f64>,
    /// Measure the true residual and the residual gaps every iteration.
    #[arg(long)]
    track_gaps: bool,
    /// History output path; stdout when omitted.
    #[arg(long)]
    history: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Seed for spd:N:COND matrices.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "KPL_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    #[arg(long, env = "KPL_BASE_URL")]
    base_url: Option<String>,
}

impl SolveArgs {
    fn options(self) -> anyhow::Result<RunOptions> {
        let flags = RunOptions {
            matrix: self.matrix,
            rhs: self.rhs,
            precond: self.precond,
            ic_shift: self.ic_shift,
            method: self.method,
            shift: self.shift,
            shift_schedule: self.shift_schedule,
            maxit: self.maxit,
            rtol: self.rtol,
            rr_threshold: self.rr_threshold,
            track_gaps: self.track_gaps.then_some(true),
            history: self.history,
            format: self.format,
            seed: self.seed,
            cache_dir: self.cache_dir,
            base_url: self.base_url,
        };
        Ok(match &self.config {
            Some(path) => flags.over(RunOptions::from_file(path)?),
            None => flags,
        })
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// History written by `kpl solve` (CSV, or JSON by extension).
    #[arg(long)]
    history: PathBuf,
    /// Iteration i of psi_i; defaults to the full history.
    #[arg(long)]
    iter: Option<usize>,
    /// lo:step:hi (inclusive) or a single shift.
    #[arg(long, default_value = kpl_cli::run::DEFAULT_GRID)]
    sigma_grid: String,
    /// Sweep CSV output path; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FetchArgs {
    /// Matrix names, e.g. bcsstk15 nos1 s1rmt3m1.
    #[arg(required = true)]
    names: Vec<String>,
    #[arg(long, env = "KPL_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    #[arg(long, env = "KPL_BASE_URL")]
    base_url: Option<String>,
}

#[derive(Args)]
struct GenArgs {
    /// lapl:NXxNY or spd:N:COND.
    #[arg(long)]
    matrix: String,
    #[arg(long, default_value_t = kpl_cli::config::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Only these rows (default: all).
    rows: Vec<String>,
    #[arg(long, env = "KPL_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    #[arg(long, env = "KPL_BASE_URL")]
    base_url: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<ExitCode> {
    match cmd {
        Command::Solve(args) => {
            let cfg = RunConfig::from_options(args.options()?)?;
            let res = match &cfg.output {
                Some(_) => run_solve(&cfg)?,
                None => run_solve_to(&cfg, io::stdout().lock())?,
            };
            eprintln!(
                "{}: {} after {} iterations, ||b - Ax|| = {:.3e}{}",
                cfg.solver.method,
                if res.converged {
                    "converged"
                } else {
                    "stopped"
                },
                res.iterations,
                res.final_true_residual(),
                if res.replacements.is_empty() {
                    String::new()
                } else {
                    format!(", {} residual replacements", res.replacements.len())
                }
            );
        }
        Command::AnalyzeShift(args) => {
            let req = AnalyzeRequest {
                history: args.history,
                iter: args.iter,
                grid: args.sigma_grid,
                output: args.output,
            };
            let sweep = run_analyze_shift(&req)?;
            if req.output.is_none() {
                let mut out = io::stdout().lock();
                kpl_core::history::write_sweep_csv(&sweep, &mut out)?;
                out.flush()?;
            }
            eprintln!(
                "psi_{}: argmin sigma = {} (psi = {:.3e}){}",
                sweep.iter,
                sweep.argmin,
                sweep.min_psi(),
                if sweep.truncated {
                    ", history shorter than requested"
                } else {
                    ""
                }
            );
        }
        Command::Fetch(args) => {
            let cache = args.cache_dir.unwrap_or_else(default_cache_dir);
            let base = args.base_url.unwrap_or_else(default_base_url);
            for name in &args.names {
                let path = fetch_matrix(name, &cache, &base)
                    .with_context(|| format!("fetching {name}"))?;
                println!("{}", path.display());
            }
        }
        Command::Gen(args) => {
            let source: MatrixSource = args.matrix.parse()?;
            if matches!(source, MatrixSource::File(_) | MatrixSource::Named(_)) {
                bail!("gen takes lapl:NXxNY or spd:N:COND, got {}", args.matrix);
            }
            let cfg = RunConfig::from_options(RunOptions {
                matrix: Some(args.matrix),
                seed: Some(args.seed),
                ..RunOptions::default()
            })?;
            let a = load_matrix(&cfg)?;
            write_matrix_market_file(&a, &args.output)
                .with_context(|| format!("writing {}", args.output.display()))?;
            info!(
                "wrote n = {}, nnz = {} to {}",
                a.n(),
                a.nnz(),
                args.output.display()
            );
        }
        Command::Bench(args) => {
            let mut rows = reference_table();
            if !args.rows.is_empty() {
                if let Some(bad) = args
                    .rows
                    .iter()
                    .find(|r| !rows.iter().any(|d| &d.name == *r))
                {
                    bail!("unknown benchmark row {bad}");
                }
                rows.retain(|d| args.rows.contains(&d.name));
            }
            let cache = args.cache_dir.unwrap_or_else(default_cache_dir);
            let base = args.base_url.unwrap_or_else(default_base_url);
            let transport = UreqTransport::default();
            let provider = default_provider(&transport, &cache, &base);
            let report = run_benchmark_suite(&rows, &provider);
            print!("{report}");
            if !report.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
