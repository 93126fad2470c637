use std::cell::Cell;
use std::io::Write;
use std::path::Path;
use std::process::Command;

use flate2::write::GzEncoder;
use flate2::Compression;

use kpl_cli::bench::{reference_row, run_benchmark_suite, BenchmarkDescriptor, RowOutcome};
use kpl_cli::fetch::{cached_path, fetch_matrix_with, matrix_url, Transport};
use kpl_cli::{
    run_analyze_shift, run_solve, run_solve_to, AnalyzeRequest, HarnessError, RunConfig, RunOptions,
};
use kpl_core::generators::laplacian_2d;
use kpl_core::history::read_sweep_csv;
use kpl_core::solvers::IterationRecord;
use kpl_core::stability::{matrix_2norm, propagation_matrix};
use kpl_core::{emit_history, read_history, write_matrix_market, HistoryFormat, SparseMatrix};

fn config(matrix: &str, method: &str) -> RunOptions {
    RunOptions {
        matrix: Some(matrix.into()),
        method: Some(method.into()),
        ..RunOptions::default()
    }
}

#[test]
fn tiny_laplacian_converges_with_one_row_per_iteration() {
    let cfg = RunConfig::from_options(RunOptions {
        rtol: Some(1e-12),
        ..config("lapl:2x2", "cg")
    })
    .unwrap();
    let mut buf = Vec::new();
    let res = run_solve_to(&cfg, &mut buf).unwrap();
    assert!(res.converged);
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + res.iterations + 1);
    assert_eq!(res.history.len(), res.iterations + 1);
}

#[test]
fn identical_configs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    for (fmt, method) in [("csv", "pcg"), ("json", "pcg-rr"), ("csv", "cg")] {
        let outputs: Vec<Vec<u8>> = (0..2)
            .map(|k| {
                let path = dir.path().join(format!("h{k}.{fmt}"));
                let cfg = RunConfig::from_options(RunOptions {
                    maxit: Some(80),
                    rtol: Some(0.0),
                    track_gaps: Some(true),
                    precond: Some("ic0".into()),
                    ic_shift: Some(0.1),
                    history: Some(path.clone()),
                    ..config("lapl:25x20", method)
                })
                .unwrap();
                run_solve(&cfg).unwrap();
                std::fs::read(path).unwrap()
            })
            .collect();
        assert!(!outputs[0].is_empty());
        assert_eq!(outputs[0], outputs[1], "{method} {fmt}");
    }
    // random problems are reproducible from the seed
    let solve_spd = |seed| {
        let cfg = RunConfig::from_options(RunOptions {
            seed: Some(seed),
            ..config("spd:10:50", "pcg")
        })
        .unwrap();
        let mut buf = Vec::new();
        run_solve_to(&cfg, &mut buf).unwrap();
        buf
    };
    assert_eq!(solve_spd(3), solve_spd(3));
    assert_ne!(solve_spd(3), solve_spd(4));
}

#[test]
fn shifted_pipelined_run_reaches_cg_accuracy_on_lapl200() {
    let cfg = RunConfig::from_options(RunOptions {
        rhs: Some("ones-rhs".into()),
        shift: Some(4.0),
        maxit: Some(500),
        rtol: Some(0.0),
        ..config("lapl:200x200", "pcg-sh")
    })
    .unwrap();
    let mut buf = Vec::new();
    let res = run_solve_to(&cfg, &mut buf).unwrap();
    let back = read_history(buf.as_slice(), HistoryFormat::Csv).unwrap();
    assert_eq!(back.len(), 501);
    let last = back.last().unwrap().rnorm_true.unwrap();
    assert_eq!(last, res.final_true_residual());
    assert!((6.8e-13..=6.8e-11).contains(&last), "{last:e}");
}

#[test]
fn missing_matrix_file_is_an_error() {
    let cfg = RunConfig::from_options(config("/nonexistent/a.mtx", "cg")).unwrap();
    assert!(matches!(run_solve(&cfg), Err(HarnessError::File { .. })));
}

fn record(iter: usize, alpha: Option<f64>, beta: Option<f64>) -> IterationRecord {
    IterationRecord {
        iter,
        alpha,
        beta,
        gamma: None,
        delta: None,
        rnorm_recursive: 1.0,
        rnorm_true: None,
        gap_f: None,
        gap_g: None,
        gap_h: None,
        gap_j: None,
    }
}

fn write_records(path: &Path, recs: &[IterationRecord], fmt: HistoryFormat) {
    let mut f = std::fs::File::create(path).unwrap();
    emit_history(recs, fmt, &mut f).unwrap();
}

#[test]
fn single_factor_sweep_is_the_factor_norm() {
    let dir = tempfile::tempdir().unwrap();
    let recs = [
        record(0, Some(0.9), Some(0.0)),
        record(1, Some(0.6), Some(0.35)),
    ];
    for fmt in [HistoryFormat::Csv, HistoryFormat::Json] {
        let path = dir.path().join(format!("h.{fmt}"));
        write_records(&path, &recs, fmt);
        let out = dir.path().join("sweep.csv");
        let sweep = run_analyze_shift(&AnalyzeRequest {
            grid: "0".into(),
            output: Some(out.clone()),
            ..AnalyzeRequest::new(&path)
        })
        .unwrap();
        let want = matrix_2norm(&propagation_matrix(0.6, 0.35, 0.0));
        assert_eq!(sweep.psi_values, vec![want]);
        assert_eq!(sweep.argmin, 0.0);
        assert_eq!(sweep.iter, 1);
        let rows = read_sweep_csv(std::fs::File::open(&out).unwrap()).unwrap();
        assert_eq!(rows, vec![(0.0, want)]);
    }
}

#[test]
fn sweep_over_requested_iteration_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    let cfg = RunConfig::from_options(RunOptions {
        maxit: Some(40),
        rtol: Some(0.0),
        history: Some(path.clone()),
        ..config("lapl:20x20", "pcg")
    })
    .unwrap();
    run_solve(&cfg).unwrap();

    let sweep = run_analyze_shift(&AnalyzeRequest {
        iter: Some(30),
        grid: "0:0.5:4".into(),
        ..AnalyzeRequest::new(&path)
    })
    .unwrap();
    assert_eq!(sweep.grid.len(), 9);
    assert_eq!(sweep.iter, 30);
    assert!(!sweep.truncated);
    assert!(sweep.psi_values.iter().all(|p| *p >= 1.0));

    let long = run_analyze_shift(&AnalyzeRequest {
        iter: Some(1000),
        ..AnalyzeRequest::new(&path)
    })
    .unwrap();
    assert!(long.truncated);
    assert_eq!(long.iter, 40);
}

#[test]
fn malformed_histories_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "iter,gamma\n0,1.0\n").unwrap();
    assert!(run_analyze_shift(&AnalyzeRequest::new(&path)).is_err());
    // a history that never got past iteration 0 has no coefficients
    write_records(&path, &[record(0, None, None)], HistoryFormat::Csv);
    assert!(run_analyze_shift(&AnalyzeRequest::new(&path)).is_err());
    assert!(run_analyze_shift(&AnalyzeRequest::new(dir.path().join("missing.csv"))).is_err());
}

struct Stub {
    body: Option<Vec<u8>>,
    calls: Cell<usize>,
}

impl Stub {
    fn serving(body: Option<Vec<u8>>) -> Self {
        Self {
            body,
            calls: Cell::new(0),
        }
    }
}

impl Transport for Stub {
    fn get(&self, url: &str) -> kpl_cli::Result<Vec<u8>> {
        self.calls.set(self.calls.get() + 1);
        self.body.clone().ok_or_else(|| HarnessError::Fetch {
            url: url.into(),
            msg: "404".into(),
        })
    }
}

fn gzipped_matrix(a: &SparseMatrix) -> Vec<u8> {
    let mut plain = Vec::new();
    write_matrix_market(a, &mut plain).unwrap();
    let mut enc = GzEncoder::new(Vec::new(), Compression::default());
    enc.write_all(&plain).unwrap();
    enc.finish().unwrap()
}

#[test]
fn fetch_downloads_once_then_hits_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let a = laplacian_2d(4, 3).unwrap();
    let stub = Stub::serving(Some(gzipped_matrix(&a)));
    let first = fetch_matrix_with(&stub, "nos1", dir.path(), "https://mirror.test/mm").unwrap();
    assert_eq!(stub.calls.get(), 1);
    assert_eq!(first, cached_path(dir.path(), "nos1"));
    assert_eq!(kpl_core::read_matrix_market_file(&first).unwrap(), a);

    let second = fetch_matrix_with(&stub, "nos1", dir.path(), "https://mirror.test/mm").unwrap();
    assert_eq!(second, first);
    assert_eq!(stub.calls.get(), 1, "cache hit must not touch the network");

    // a pre-populated cache never calls out either
    let offline = Stub::serving(None);
    fetch_matrix_with(&offline, "nos1", dir.path(), "unused").unwrap();
    assert_eq!(offline.calls.get(), 0);
    assert_eq!(
        matrix_url("https://mirror.test/mm", "nos1"),
        "https://mirror.test/mm/Harwell-Boeing/lanpro/nos1.mtx.gz"
    );
}

#[test]
fn corrupt_downloads_are_not_cached() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        b"<html>not found</html>".to_vec(),
        vec![0x1f, 0x8b, 0, 1, 2],
    ] {
        let stub = Stub::serving(Some(body));
        let err = fetch_matrix_with(&stub, "junk", dir.path(), "https://m").unwrap_err();
        assert!(matches!(err, HarnessError::Corrupt { .. }), "{err}");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }
    let down = Stub::serving(None);
    assert!(matches!(
        fetch_matrix_with(&down, "junk", dir.path(), "https://m"),
        Err(HarnessError::Fetch { .. })
    ));
    assert!(fetch_matrix_with(&down, "../etc", dir.path(), "https://m").is_err());
}

#[test]
fn empty_benchmark_list_gives_empty_report() {
    let report = run_benchmark_suite(&[], &|_| unreachable!());
    assert!(report.rows.is_empty());
    assert!(report.passed());
    assert_eq!(report.to_string(), "");
}

#[test]
fn unavailable_matrices_skip_their_rows() {
    let rows: Vec<BenchmarkDescriptor> = ["nos1", "bcsstk15"]
        .iter()
        .map(|n| reference_row(n).unwrap())
        .collect();
    let report = run_benchmark_suite(&rows, &|d| {
        Err(HarnessError::Fetch {
            url: d.name.clone(),
            msg: "offline".into(),
        })
    });
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.rows[0].descriptor.name, "nos1");
    assert_eq!(report.rows[1].descriptor.name, "bcsstk15");
    assert!(report
        .rows
        .iter()
        .all(|r| matches!(r.outcome, RowOutcome::Skipped(_))));
    assert!(report.passed());
}

#[test]
fn wrong_size_matrix_fails_its_row() {
    let rows = [reference_row("nos1").unwrap()];
    let report = run_benchmark_suite(&rows, &|_| Ok(laplacian_2d(5, 5)?));
    assert!(matches!(report.rows[0].outcome, RowOutcome::Failed(_)));
    assert!(!report.passed());
}

fn kpl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_kpl"))
        .args(args)
        .env_remove("KPL_CACHE_DIR")
        .env_remove("KPL_BASE_URL")
        .output()
        .unwrap()
}

#[test]
fn command_line_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    let out = kpl(&["gen", "--matrix", "lapl:12x10", "-o", &p("a.mtx")]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    std::fs::write(
        p("run.toml"),
        "method = \"pcg-sh\"\nshift = 1.0\nmaxit = 25\nrtol = 0.0\n",
    )
    .unwrap();
    let out = kpl(&[
        "solve",
        "--config",
        &p("run.toml"),
        "--matrix",
        &p("a.mtx"),
        "--shift",
        "4",
        "--track-gaps",
        "--history",
        &p("h.json"),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let recs = read_history(
        std::fs::File::open(p("h.json")).unwrap(),
        HistoryFormat::Json,
    )
    .unwrap();
    assert_eq!(recs.len(), 26);
    assert!(recs.iter().all(|r| r.gap_f.is_some()));

    let out = kpl(&[
        "analyze-shift",
        "--history",
        &p("h.json"),
        "--iter",
        "20",
        "--sigma-grid",
        "0:1:3",
    ]);
    assert!(out.status.success());
    let rows = read_sweep_csv(out.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 4);

    let sched: String = (0..=25)
        .map(|k| format!("{}\n", (k as f64 / 10.0).min(2.0)))
        .collect();
    std::fs::write(p("sched.txt"), sched).unwrap();
    let out = kpl(&[
        "solve",
        "--matrix",
        "lapl:8x8",
        "--method",
        "pcg-var-sh",
        "--shift-schedule",
        &p("sched.txt"),
        "--maxit",
        "25",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("iter,alpha,beta"));
}

#[test]
fn command_line_failures_exit_nonzero() {
    assert!(!kpl(&["solve", "--matrix", "/nonexistent.mtx"])
        .status
        .success());
    assert!(!kpl(&["solve", "--matrix", "lapl:4x4", "--method", "bicg"])
        .status
        .success());
    assert!(!kpl(&["gen", "--matrix", "mm:nos1", "-o", "/tmp/x.mtx"])
        .status
        .success());
    assert!(!kpl(&["bench", "nosuchrow"]).status.success());
    let out = kpl(&["bench", "--help"]);
    assert!(out.status.success());
}
