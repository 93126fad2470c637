//! Conjugate gradient variants sharing one instrumentation layer.
//!
//! Every solver records an [`IterationRecord`] per iteration `i`, taken at the
//! point where the iteration-`i` coefficients are known and the iterate is
//! still `x_i`. A run of `k` iterations therefore yields `k + 1` records; the
//! last one carries the coefficients the next iteration would have used when
//! the run stopped on its iteration budget.

mod cg;
mod gaps;
mod pipelined;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, KplError, Result};
use crate::precond::Preconditioner;
use crate::sparse::{norm2, spmv_into, SparseMatrix};

pub use cg::{solve_cg, solve_cg_observed};
pub use gaps::{track_gaps, GapInputs, GapNorms, GapVectors};
pub use pipelined::{
    solve_pcg, solve_pcg_observed, solve_pcg_rr, solve_pcg_rr_observed, solve_pcg_shifted,
    solve_pcg_shifted_observed, solve_pcg_var_shifted, solve_pcg_var_shifted_observed,
};

/// Unit roundoff of `f64`.
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

/// Solver variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Classic preconditioned CG.
    Cg,
    /// Pipelined CG.
    Pcg,
    /// Pipelined CG with a constant shift.
    PcgSh,
    /// Pipelined CG with an iteration-dependent shift.
    PcgVarSh,
    /// Pipelined CG with automated residual replacement.
    PcgRr,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Cg,
        Method::Pcg,
        Method::PcgSh,
        Method::PcgVarSh,
        Method::PcgRr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cg => "cg",
            Method::Pcg => "pcg",
            Method::PcgSh => "pcg-sh",
            Method::PcgVarSh => "pcg-var-sh",
            Method::PcgRr => "pcg-rr",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = KplError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| KplError::InvalidConfig(format!("unknown method {s:?}")))
    }
}

/// Default residual replacement threshold, `sqrt(unit roundoff)`.
pub fn default_rr_threshold() -> f64 {
    UNIT_ROUNDOFF.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// Constant shift for [`Method::PcgSh`].
    pub shift: f64,
    /// `sigma_{-1}, sigma_0, sigma_1, ...` for [`Method::PcgVarSh`].
    pub shift_schedule: Vec<f64>,
    pub max_iters: usize,
    /// Relative tolerance on `||r_i|| / ||b||`; zero disables the test.
    pub rtol: f64,
    /// Measure the four residual gaps and the true residual every iteration.
    pub track_gaps: bool,
    /// Residual replacement threshold for [`Method::PcgRr`].
    pub rr_threshold: f64,
    /// Keep a copy of every iterate in [`SolveResult::iterates`].
    pub keep_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Cg,
            shift: 0.0,
            shift_schedule: Vec::new(),
            max_iters: 1000,
            rtol: 1e-8,
            track_gaps: false,
            rr_threshold: default_rr_threshold(),
            keep_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn with_schedule(mut self, schedule: Vec<f64>) -> Self {
        self.shift_schedule = schedule;
        self
    }

    pub fn with_gaps(mut self, track: bool) -> Self {
        self.track_gaps = track;
        self
    }

    pub fn with_rr_threshold(mut self, tau: f64) -> Self {
        self.rr_threshold = tau;
        self
    }

    pub fn with_iterates(mut self, keep: bool) -> Self {
        self.keep_iterates = keep;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(KplError::InvalidConfig(msg));
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.rtol >= 0.0) || !self.rtol.is_finite() {
            return bad(format!("rtol must be finite and >= 0, got {}", self.rtol));
        }
        if !self.shift.is_finite() {
            return bad(format!("shift must be finite, got {}", self.shift));
        }
        if !(self.rr_threshold >= 0.0) || !self.rr_threshold.is_finite() {
            return bad(format!(
                "residual replacement threshold must be finite and >= 0, got {}",
                self.rr_threshold
            ));
        }
        if self.method == Method::PcgVarSh {
            if self.shift_schedule.len() < self.max_iters + 1 {
                return bad(format!(
                    "shift schedule has {} entries, need at least max_iters + 1 = {}",
                    self.shift_schedule.len(),
                    self.max_iters + 1
                ));
            }
            if let Some(s) = self.shift_schedule.iter().find(|s| !s.is_finite()) {
                return bad(format!("non-finite shift {s} in schedule"));
            }
        }
        Ok(())
    }
}

/// Schedule `sigma_{-1}, sigma_0, ..., sigma_{len-2}` with `sigma_i = f(i)`.
pub fn shift_schedule_from<F: Fn(i64) -> f64>(len: usize, f: F) -> Vec<f64> {
    (0..len).map(|k| f(k as i64 - 1)).collect()
}

/// Per-iteration scalars and norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub rnorm_recursive: f64,
    pub rnorm_true: Option<f64>,
    pub gap_f: Option<f64>,
    pub gap_g: Option<f64>,
    pub gap_h: Option<f64>,
    pub gap_j: Option<f64>,
}

impl IterationRecord {
    /// Bitwise comparison of every field.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        fn same(a: Option<f64>, b: Option<f64>) -> bool {
            match (a, b) {
                (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
                (None, None) => true,
                _ => false,
            }
        }
        self.iter == other.iter
            && same(self.alpha, other.alpha)
            && same(self.beta, other.beta)
            && same(self.gamma, other.gamma)
            && same(self.delta, other.delta)
            && self.rnorm_recursive.to_bits() == other.rnorm_recursive.to_bits()
            && same(self.rnorm_true, other.rnorm_true)
            && same(self.gap_f, other.gap_f)
            && same(self.gap_g, other.gap_g)
            && same(self.gap_h, other.gap_h)
            && same(self.gap_j, other.gap_j)
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    /// Iterations at which residual replacement took place.
    pub replacements: Vec<usize>,
    /// `x_0, x_1, ...` when requested.
    pub iterates: Vec<Vec<f64>>,
}

impl SolveResult {
    pub fn final_record(&self) -> &IterationRecord {
        self.history.last().expect("history is never empty")
    }

    /// `||b - A x||` of the final iterate.
    pub fn final_true_residual(&self) -> f64 {
        self.final_record()
            .rnorm_true
            .expect("the final record always carries the true residual")
    }
}

/// Snapshot of a solver in iteration `i`, after the search directions
/// `p_i, s_i, ...` have been formed and before `x_{i+1}` is computed.
pub struct IterationView<'a> {
    pub iter: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Shift used for `w_i` (`sigma_{i-1}`; equal to `sigma` for constant shifts).
    pub sigma_prev: f64,
    /// Shift used for `s_i` and the residual update.
    pub sigma: f64,
    pub x: &'a [f64],
    pub r: &'a [f64],
    pub u: &'a [f64],
    pub p: &'a [f64],
    pub s: &'a [f64],
    pub w: Option<&'a [f64]>,
    pub t: Option<&'a [f64]>,
    pub q: Option<&'a [f64]>,
    pub z: Option<&'a [f64]>,
    pub gaps: Option<&'a GapVectors>,
}

/// Receives a view of the solver state once per iteration.
pub trait Observer {
    fn observe(&mut self, view: &IterationView<'_>);
}

impl<F: FnMut(&IterationView<'_>)> Observer for F {
    fn observe(&mut self, view: &IterationView<'_>) {
        self(view)
    }
}

pub(crate) struct NoObserver;

impl Observer for NoObserver {
    fn observe(&mut self, _: &IterationView<'_>) {}
}

/// Solves with the variant selected by `cfg.method`.
pub fn solve(
    a: &SparseMatrix,
    m: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    solve_observed(a, m, b, x0, cfg, &mut NoObserver)
}

pub fn solve_observed(
    a: &SparseMatrix,
    m: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
    obs: &mut dyn Observer,
) -> Result<SolveResult> {
    match cfg.method {
        Method::Cg => solve_cg_observed(a, m, b, x0, cfg, obs),
        Method::Pcg => solve_pcg_observed(a, m, b, x0, cfg, obs),
        Method::PcgSh => solve_pcg_shifted_observed(a, m, b, x0, cfg, obs),
        Method::PcgVarSh => solve_pcg_var_shifted_observed(a, m, b, x0, cfg, obs),
        Method::PcgRr => solve_pcg_rr_observed(a, m, b, x0, cfg, obs),
    }
}

pub(crate) fn check_inputs(
    a: &SparseMatrix,
    m: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<()> {
    cfg.validate()?;
    check_len(a.n(), m.n())?;
    check_len(a.n(), b.len())?;
    check_len(a.n(), x0.len())?;
    if let Some(v) = b.iter().chain(x0).find(|v| !v.is_finite()) {
        return Err(KplError::InvalidConfig(format!(
            "non-finite input entry {v}"
        )));
    }
    Ok(())
}

/// `r = b - A x`.
pub(crate) fn explicit_residual(a: &SparseMatrix, b: &[f64], x: &[f64], r: &mut [f64]) {
    spmv_into(a, x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

pub(crate) fn breakdown(iter: usize, reason: impl Into<String>) -> KplError {
    KplError::Breakdown {
        iter,
        reason: reason.into(),
    }
}

/// Where in the run a record is taken.
#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stage {
    /// Regular iteration; search directions available.
    Step,
    /// Final record of the run.
    Exit,
}

/// Bookkeeping shared by all variants: history, true residuals, gaps, iterates.
pub(crate) struct Recorder<'a> {
    a: &'a SparseMatrix,
    b: &'a [f64],
    cfg: &'a SolverConfig,
    bnorm: f64,
    scratch: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub iterates: Vec<Vec<f64>>,
}

pub(crate) struct Scalars {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub rnorm: f64,
}

impl<'a> Recorder<'a> {
    pub fn new(a: &'a SparseMatrix, b: &'a [f64], cfg: &'a SolverConfig) -> Self {
        Self {
            a,
            b,
            cfg,
            bnorm: norm2(b),
            scratch: vec![0.0; a.n()],
            history: Vec::with_capacity(cfg.max_iters.min(100_000) + 1),
            iterates: Vec::new(),
        }
    }

    /// Recursive residual small enough to stop.
    pub fn converged(&self, rnorm: f64) -> bool {
        rnorm == 0.0 || (self.cfg.rtol > 0.0 && rnorm <= self.cfg.rtol * self.bnorm)
    }

    /// Appends the record for iteration `i`. `inputs` carries the vectors the
    /// gaps are measured on; returns the measured gap vectors when tracked.
    pub fn record(
        &mut self,
        iter: usize,
        stage: Stage,
        sc: Scalars,
        inputs: &GapInputs<'_>,
    ) -> Option<GapVectors> {
        let instrumented = self.cfg.track_gaps;
        let rnorm_true = if instrumented || stage == Stage::Exit || iter % 10 == 0 {
            explicit_residual(self.a, self.b, inputs.x, &mut self.scratch);
            Some(norm2(&self.scratch))
        } else {
            None
        };
        let gaps = instrumented.then(|| track_gaps(self.a, self.b, inputs));
        let norms = gaps.as_ref().map(GapVectors::norms).unwrap_or_default();
        self.history.push(IterationRecord {
            iter,
            alpha: sc.alpha,
            beta: sc.beta,
            gamma: sc.gamma,
            delta: sc.delta,
            rnorm_recursive: sc.rnorm,
            rnorm_true,
            gap_f: norms.f,
            gap_g: norms.g,
            gap_h: norms.h,
            gap_j: norms.j,
        });
        if self.cfg.keep_iterates {
            self.iterates.push(inputs.x.to_vec());
        }
        gaps
    }

    pub fn finish(self, x: Vec<f64>, converged: bool, replacements: Vec<usize>) -> SolveResult {
        let iterations = self.history.len() - 1;
        SolveResult {
            x,
            converged,
            iterations,
            history: self.history,
            replacements,
            iterates: self.iterates,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert_eq!("pcg_var_sh".parse::<Method>().unwrap(), Method::PcgVarSh);
        assert!("gmres".parse::<Method>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(Method::Cg)
            .with_max_iters(0)
            .validate()
            .is_err());
        assert!(SolverConfig::new(Method::Cg)
            .with_rtol(-1.0)
            .validate()
            .is_err());
        assert!(SolverConfig::new(Method::PcgSh)
            .with_shift(f64::NAN)
            .validate()
            .is_err());
        let short = SolverConfig::new(Method::PcgVarSh)
            .with_max_iters(5)
            .with_schedule(vec![0.0; 5]);
        assert!(short.validate().is_err());
        assert!(short.with_schedule(vec![0.0; 6]).validate().is_ok());
    }

    #[test]
    fn schedule_indexing() {
        let s = shift_schedule_from(4, |i| i as f64);
        assert_eq!(s, vec![-1.0, 0.0, 1.0, 2.0]);
    }
}
