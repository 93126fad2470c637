//! Run configuration. Values come from command-line flags, an optional TOML
//! file and built-in defaults, in that order of precedence.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use kpl_core::solvers::default_rr_threshold;
use kpl_core::{HistoryFormat, Method, SolverConfig};

use crate::error::{file_err, HarnessError, Result};

/// Where the system matrix comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixSource {
    /// Matrix Market file, optionally gzipped.
    File(PathBuf),
    /// `lapl:NXxNY`, the 5-point Laplacian.
    Laplacian { nx: usize, ny: usize },
    /// `spd:N:COND`, a dense random SPD matrix drawn from the run seed.
    RandomSpd { n: usize, cond: f64 },
    /// `mm:NAME`, a Matrix Market collection entry fetched into the cache.
    Named(String),
}

impl FromStr for MatrixSource {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || HarnessError::Config(format!("malformed matrix source {s:?}"));
        if let Some(dims) = s.strip_prefix("lapl:") {
            let (nx, ny) = dims.split_once(['x', 'X']).ok_or_else(bad)?;
            let nx = nx.trim().parse().map_err(|_| bad())?;
            let ny = ny.trim().parse().map_err(|_| bad())?;
            return Ok(Self::Laplacian { nx, ny });
        }
        if let Some(rest) = s.strip_prefix("spd:") {
            let (n, cond) = rest.split_once(':').ok_or_else(bad)?;
            let n = n.trim().parse().map_err(|_| bad())?;
            let cond = cond.trim().parse().map_err(|_| bad())?;
            return Ok(Self::RandomSpd { n, cond });
        }
        if let Some(name) = s.strip_prefix("mm:") {
            if name.is_empty() || name.contains(['/', '\\']) {
                return Err(bad());
            }
            return Ok(Self::Named(name.to_string()));
        }
        if s.is_empty() {
            return Err(bad());
        }
        Ok(Self::File(PathBuf::from(s)))
    }
}

impl fmt::Display for MatrixSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::File(p) => write!(f, "{}", p.display()),
            Self::Laplacian { nx, ny } => write!(f, "lapl:{nx}x{ny}"),
            Self::RandomSpd { n, cond } => write!(f, "spd:{n}:{cond}"),
            Self::Named(name) => write!(f, "mm:{name}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RhsMode {
    /// `b = A xhat` with `xhat_j = 1/sqrt(n)`.
    #[default]
    OnesSolution,
    /// `b_j = 1/sqrt(n)`.
    OnesRhs,
}

impl FromStr for RhsMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ones-solution" => Ok(Self::OnesSolution),
            "ones-rhs" => Ok(Self::OnesRhs),
            _ => Err(HarnessError::Config(format!("unknown rhs mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PrecondSpec {
    #[default]
    None,
    Jacobi,
    Ic0 {
        eta: f64,
    },
}

impl PrecondSpec {
    /// Parses the `--precond` name; `eta` only applies to `ic0`.
    pub fn parse(name: &str, eta: f64) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "jacobi" | "jac" => Ok(Self::Jacobi),
            "ic0" | "icc" => Ok(Self::Ic0 { eta }),
            _ => Err(HarnessError::Config(format!(
                "unknown preconditioner {name:?}"
            ))),
        }
    }
}

impl fmt::Display for PrecondSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => f.write_str("none"),
            Self::Jacobi => f.write_str("jacobi"),
            Self::Ic0 { eta } if *eta == 0.0 => f.write_str("ic0"),
            Self::Ic0 { eta } => write!(f, "ic0(eta={eta})"),
        }
    }
}

/// Every setting as an optional value, so that flag values can be layered
/// over a config file. Field names match the long flags.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunOptions {
    pub matrix: Option<String>,
    pub rhs: Option<String>,
    pub precond: Option<String>,
    pub ic_shift: Option<f64>,
    pub method: Option<String>,
    pub shift: Option<f64>,
    pub shift_schedule: Option<PathBuf>,
    pub maxit: Option<usize>,
    pub rtol: Option<f64>,
    pub rr_threshold: Option<f64>,
    pub track_gaps: Option<bool>,
    pub history: Option<PathBuf>,
    pub format: Option<String>,
    pub seed: Option<u64>,
    pub cache_dir: Option<PathBuf>,
    pub base_url: Option<String>,
}

macro_rules! layer {
    ($hi:expr, $lo:expr, $($field:ident),*) => {
        RunOptions { $($field: $hi.$field.or($lo.$field)),* }
    };
}

impl RunOptions {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(file_err(path))?;
        Self::from_toml(&text)
    }

    /// Values set in `self` win over those in `lower`.
    pub fn over(self, lower: RunOptions) -> RunOptions {
        layer!(
            self,
            lower,
            matrix,
            rhs,
            precond,
            ic_shift,
            method,
            shift,
            shift_schedule,
            maxit,
            rtol,
            rr_threshold,
            track_gaps,
            history,
            format,
            seed,
            cache_dir,
            base_url
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub matrix: MatrixSource,
    pub rhs: RhsMode,
    pub precond: PrecondSpec,
    pub solver: SolverConfig,
    pub format: HistoryFormat,
    /// History destination; `None` leaves emission to the caller.
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub cache_dir: Option<PathBuf>,
    pub base_url: Option<String>,
}

pub const DEFAULT_SEED: u64 = 42;

impl RunConfig {
    /// Applies defaults to whatever `opts` leaves unset and validates.
    pub fn from_options(opts: RunOptions) -> Result<Self> {
        let matrix: MatrixSource = opts
            .matrix
            .as_deref()
            .ok_or_else(|| HarnessError::Config("no matrix given".into()))?
            .parse()?;
        let rhs = match &opts.rhs {
            Some(s) => s.parse()?,
            None => RhsMode::default(),
        };
        let eta = opts.ic_shift.unwrap_or(0.0);
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(HarnessError::Config(format!(
                "ic shift must be >= 0, got {eta}"
            )));
        }
        let precond = PrecondSpec::parse(opts.precond.as_deref().unwrap_or("none"), eta)?;
        let method: Method = opts.method.as_deref().unwrap_or("cg").parse()?;

        let mut solver = SolverConfig::new(method);
        if let Some(v) = opts.maxit {
            solver.max_iters = v;
        }
        if let Some(v) = opts.rtol {
            solver.rtol = v;
        }
        if let Some(v) = opts.shift {
            solver.shift = v;
        }
        solver.rr_threshold = opts.rr_threshold.unwrap_or_else(default_rr_threshold);
        solver.track_gaps = opts.track_gaps.unwrap_or(false);
        if let Some(path) = &opts.shift_schedule {
            solver.shift_schedule = read_schedule(path)?;
        }
        solver.validate()?;

        let format = match &opts.format {
            Some(s) => s.parse()?,
            None => match &opts.history {
                Some(p) if p.extension().is_some_and(|e| e == "json") => HistoryFormat::Json,
                _ => HistoryFormat::Csv,
            },
        };
        Ok(Self {
            matrix,
            rhs,
            precond,
            solver,
            format,
            output: opts.history,
            seed: opts.seed.unwrap_or(DEFAULT_SEED),
            cache_dir: opts.cache_dir,
            base_url: opts.base_url,
        })
    }
}

/// Reads whitespace-separated shifts `sigma_{-1} sigma_0 sigma_1 ...`;
/// `#` starts a comment.
pub fn read_schedule(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(file_err(path))?;
    parse_schedule(&text)
}

pub fn parse_schedule(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace)
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| HarnessError::Config(format!("bad shift {tok:?} in schedule")))
        })
        .collect()
}
