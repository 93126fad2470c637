use serde::{Deserialize, Serialize};

use super::propagation::{psi, CoefficientHistory};
use crate::error::{KplError, Result};

/// `psi_i` evaluated over a grid of shifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSweep {
    pub grid: Vec<f64>,
    pub psi_values: Vec<f64>,
    pub argmin: f64,
    /// Iteration the sweep was evaluated at.
    pub iter: usize,
    /// Set when the history was shorter than the requested iteration and the
    /// sweep fell back to its last entry.
    pub truncated: bool,
}

impl ShiftSweep {
    pub fn min_psi(&self) -> f64 {
        self.psi_values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `psi` at the grid point closest to `sigma`.
    pub fn psi_near(&self, sigma: f64) -> Option<f64> {
        self.grid
            .iter()
            .zip(&self.psi_values)
            .min_by(|a, b| (a.0 - sigma).abs().total_cmp(&(b.0 - sigma).abs()))
            .map(|(_, p)| *p)
    }
}

/// Evaluates `psi_i(sigma)` on every grid point. Asking for `i` beyond the
/// history uses the full history and flags the sweep as truncated.
pub fn select_shift(hist: &CoefficientHistory, i: usize, grid: &[f64]) -> Result<ShiftSweep> {
    if grid.is_empty() {
        return Err(KplError::EmptyGrid);
    }
    if let Some(s) = grid.iter().find(|s| !s.is_finite()) {
        return Err(KplError::InvalidConfig(format!(
            "non-finite shift {s} in grid"
        )));
    }
    if hist.is_empty() {
        return Err(KplError::History(
            "no iteration coefficients to evaluate".into(),
        ));
    }
    if i == 0 {
        return Err(KplError::IndexOutOfRange {
            index: 0,
            len: hist.len(),
        });
    }
    let truncated = i > hist.len();
    let iter = i.min(hist.len());
    let psi_values = grid
        .iter()
        .map(|&s| psi(hist, iter, s))
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for k in 1..grid.len() {
        let (pk, pb) = (psi_values[k], psi_values[best]);
        if pk < pb || (pk == pb && grid[k] < grid[best]) {
            best = k;
        }
    }
    Ok(ShiftSweep {
        grid: grid.to_vec(),
        argmin: grid[best],
        psi_values,
        iter,
        truncated,
    })
}

pub const DEFAULT_GRID_POINTS: usize = 81;

/// Grid from 0 to `2 * upper`: logarithmic between `1e-3` and 1, linear
/// above 1. Falls back to a purely logarithmic grid when `2 * upper <= 1`.
pub fn default_shift_grid(upper: f64) -> Vec<f64> {
    let hi = 2.0 * upper.abs().max(f64::MIN_POSITIVE);
    let n = DEFAULT_GRID_POINTS;
    let lo_exp = -3.0_f64;
    let mut grid = Vec::with_capacity(n);
    grid.push(0.0);
    if hi <= 1.0 {
        let top = hi.log10();
        for k in 0..n - 1 {
            grid.push(10f64.powf(lo_exp + (top - lo_exp) * k as f64 / (n - 2) as f64));
        }
        return grid;
    }
    let n_log = (n - 1) / 4;
    for k in 0..n_log {
        grid.push(10f64.powf(lo_exp * (1.0 - k as f64 / n_log as f64)));
    }
    let n_lin = n - 1 - n_log;
    for k in 0..n_lin {
        grid.push(1.0 + (hi - 1.0) * k as f64 / (n_lin - 1) as f64);
    }
    grid
}

/// Parses `lo:step:hi` into `lo, lo + step, ...` up to `hi` inclusive, or a
/// single number into a one-point grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || KplError::InvalidConfig(format!("malformed shift grid {spec:?}"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        [v] if v.is_finite() => Ok(vec![*v]),
        [lo, step, hi] if lo.is_finite() && hi.is_finite() && *step > 0.0 && hi >= lo => {
            // Half a step of slack absorbs rounding in (hi - lo) / step.
            let count = ((hi - lo) / step + 0.5).floor() as usize;
            let count = if lo + count as f64 * step > hi * (1.0 + 1e-12) + 1e-300 {
                count - 1
            } else {
                count
            };
            Ok((0..=count).map(|k| lo + k as f64 * step).collect())
        }
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_inclusive_grid() {
        let g = parse_grid("0:0.25:10").unwrap();
        assert_eq!(g.len(), 41);
        assert_eq!(g[16], 4.0);
        assert_eq!(*g.last().unwrap(), 10.0);
        assert_eq!(parse_grid("2").unwrap(), vec![2.0]);
        assert_eq!(parse_grid("0:0.3:1").unwrap().len(), 4);
        assert!(parse_grid("0:0:1").is_err());
        assert!(parse_grid("1:0.1:0").is_err());
        assert!(parse_grid("a:b").is_err());
    }

    #[test]
    fn default_grid_shape() {
        let g = default_shift_grid(4.0);
        assert_eq!(g.len(), DEFAULT_GRID_POINTS);
        assert_eq!(g[0], 0.0);
        assert!((g.last().unwrap() - 8.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let small = default_shift_grid(0.25);
        assert_eq!(small.len(), DEFAULT_GRID_POINTS);
        assert!((small.last().unwrap() - 0.5).abs() < 1e-12);
        assert!(small.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn singleton_and_ties() {
        let h = CoefficientHistory::new(vec![0.5], vec![0.0]).unwrap();
        let s = select_shift(&h, 1, &[3.0]).unwrap();
        assert_eq!(s.argmin, 3.0);
        assert!(!s.truncated);
        // alpha = 0 removes every shift dependence
        let flat = CoefficientHistory::new(vec![0.0], vec![0.5]).unwrap();
        let s = select_shift(&flat, 1, &[1.0, 0.5, 0.0]).unwrap();
        assert_eq!(s.argmin, 0.0);
        assert!(select_shift(&h, 1, &[]).is_err());
        let s = select_shift(&h, 5, &[0.0]).unwrap();
        assert!(s.truncated);
        assert_eq!(s.iter, 1);
    }
}
