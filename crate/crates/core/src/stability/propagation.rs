use std::ops::Mul;

use crate::error::{KplError, Result};
use crate::solvers::IterationRecord;

/// Dense 4x4 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationMatrix4(pub [[f64; 4]; 4]);

impl PropagationMatrix4 {
    pub const IDENTITY: Self = Self([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]);

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row][col]
    }

    pub fn rows(&self) -> &[[f64; 4]; 4] {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        let mut t = [[0.0; 4]; 4];
        for (r, row) in self.0.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                t[c][r] = *v;
            }
        }
        Self(t)
    }

    /// Entrywise absolute value.
    pub fn abs(&self) -> Self {
        Self(self.0.map(|row| row.map(f64::abs)))
    }

    pub fn apply(&self, v: &[f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (o, row) in out.iter_mut().zip(&self.0) {
            *o = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Spectral norm; `+inf` when any entry is not finite.
    pub fn norm2(&self) -> f64 {
        matrix_2norm(self)
    }
}

impl Mul for PropagationMatrix4 {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        let mut out = [[0.0; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.0[r][0] * rhs.0[0][c]
                    + self.0[r][1] * rhs.0[1][c]
                    + self.0[r][2] * rhs.0[2][c]
                    + self.0[r][3] * rhs.0[3][c];
            }
        }
        Self(out)
    }
}

/// Gap propagation matrix of one pipelined iteration with constant shift.
pub fn propagation_matrix(alpha: f64, beta: f64, sigma: f64) -> PropagationMatrix4 {
    propagation_matrix_var(alpha, beta, sigma, sigma)
}

/// Gap propagation matrix of one iteration whose shift moves from
/// `sigma_prev` to `sigma_cur`.
pub fn propagation_matrix_var(
    alpha: f64,
    beta: f64,
    sigma_prev: f64,
    sigma_cur: f64,
) -> PropagationMatrix4 {
    let ab = alpha * beta;
    let ds = sigma_cur - sigma_prev;
    PropagationMatrix4([
        [1.0, -ab, -alpha, 0.0],
        [0.0, beta, 1.0, 0.0],
        [0.0, -ab * sigma_prev, 1.0 - alpha * sigma_prev, -ab],
        [0.0, -beta * ds, -ds, beta],
    ])
}

const JACOBI_TOL: f64 = 1e-14;
const JACOBI_SWEEPS: usize = 64;

/// Largest singular value, as the square root of the largest eigenvalue of
/// `P^T P` found by cyclic Jacobi rotations.
pub fn matrix_2norm(p: &PropagationMatrix4) -> f64 {
    if !p.is_finite() {
        return f64::INFINITY;
    }
    let scale = p.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    // Scaling keeps P^T P representable when entries reach 1e154 and beyond.
    let ps = PropagationMatrix4(p.0.map(|row| row.map(|v| v / scale)));
    let mut g = (ps.transpose() * ps).0;

    for _ in 0..JACOBI_SWEEPS {
        let off: f64 = (0..4)
            .flat_map(|r| (0..4).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| g[r][c] * g[r][c])
            .sum();
        let diag: f64 = (0..4).map(|k| g[k][k] * g[k][k]).sum();
        if off <= JACOBI_TOL * JACOBI_TOL * diag {
            break;
        }
        for pi in 0..3 {
            for qi in pi + 1..4 {
                let apq = g[pi][qi];
                if apq == 0.0 {
                    continue;
                }
                let theta = (g[qi][qi] - g[pi][pi]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..4 {
                    let gkp = g[k][pi];
                    let gkq = g[k][qi];
                    g[k][pi] = c * gkp - s * gkq;
                    g[k][qi] = s * gkp + c * gkq;
                }
                for k in 0..4 {
                    let gpk = g[pi][k];
                    let gqk = g[qi][k];
                    g[pi][k] = c * gpk - s * gqk;
                    g[qi][k] = s * gpk + c * gqk;
                }
            }
        }
    }
    let lmax = (0..4).map(|k| g[k][k]).fold(0.0, f64::max);
    scale * lmax.sqrt()
}

/// Coefficients `alpha_k, beta_k` for `k = 1..=len`, stored zero-based.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoefficientHistory {
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl CoefficientHistory {
    pub fn new(alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if alphas.len() != betas.len() {
            return Err(KplError::History(format!(
                "{} alphas but {} betas",
                alphas.len(),
                betas.len()
            )));
        }
        if let Some(v) = alphas.iter().chain(&betas).find(|v| !v.is_finite()) {
            return Err(KplError::History(format!("non-finite coefficient {v}")));
        }
        Ok(Self { alphas, betas })
    }

    /// Coefficients of iterations `1, 2, ...` from solver records. The records
    /// must be ordered by iteration; the first one missing a coefficient ends
    /// the history.
    pub fn from_records(records: &[IterationRecord]) -> Result<Self> {
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        for (pos, rec) in records.iter().enumerate() {
            if rec.iter != pos {
                return Err(KplError::History(format!(
                    "record {pos} has iteration index {}",
                    rec.iter
                )));
            }
            if pos == 0 {
                continue;
            }
            match (rec.alpha, rec.beta) {
                (Some(a), Some(b)) => {
                    alphas.push(a);
                    betas.push(b);
                }
                _ => break,
            }
        }
        Self::new(alphas, betas)
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// `alpha_k`, one-based.
    pub fn alpha(&self, k: usize) -> f64 {
        self.alphas[k - 1]
    }

    /// `beta_k`, one-based.
    pub fn beta(&self, k: usize) -> f64 {
        self.betas[k - 1]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// History restricted to iterations `1..=i`.
    pub fn truncated(&self, i: usize) -> Self {
        let i = i.min(self.len());
        Self {
            alphas: self.alphas[..i].to_vec(),
            betas: self.betas[..i].to_vec(),
        }
    }
}

/// Shifts entering the propagation matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShiftModel<'a> {
    Constant(f64),
    /// `sigma_{-1}, sigma_0, sigma_1, ...`, as consumed by the solver.
    Schedule(&'a [f64]),
}

impl ShiftModel<'_> {
    /// `(sigma_{k-1}, sigma_k)`.
    fn pair(&self, k: usize) -> Result<(f64, f64)> {
        match self {
            ShiftModel::Constant(s) => Ok((*s, *s)),
            ShiftModel::Schedule(sched) => {
                if k + 1 >= sched.len() {
                    return Err(KplError::IndexOutOfRange {
                        index: k,
                        len: sched.len().saturating_sub(1),
                    });
                }
                Ok((sched[k], sched[k + 1]))
            }
        }
    }
}

/// `P_k` for one-based `k`.
pub fn factor(
    hist: &CoefficientHistory,
    k: usize,
    shift: ShiftModel<'_>,
) -> Result<PropagationMatrix4> {
    if k == 0 || k > hist.len() {
        return Err(KplError::IndexOutOfRange {
            index: k,
            len: hist.len(),
        });
    }
    let (sp, sc) = shift.pair(k)?;
    Ok(propagation_matrix_var(hist.alpha(k), hist.beta(k), sp, sc))
}

/// `P_i P_{i-1} ... P_j`, or the identity when `j > i`.
pub fn propagation_product(
    hist: &CoefficientHistory,
    j: usize,
    i: usize,
    sigma: f64,
) -> Result<PropagationMatrix4> {
    propagation_product_with(hist, j, i, ShiftModel::Constant(sigma))
}

pub fn propagation_product_with(
    hist: &CoefficientHistory,
    j: usize,
    i: usize,
    shift: ShiftModel<'_>,
) -> Result<PropagationMatrix4> {
    if j == 0 {
        return Err(KplError::IndexOutOfRange {
            index: j,
            len: hist.len(),
        });
    }
    check_index(hist, i)?;
    let mut acc = PropagationMatrix4::IDENTITY;
    for k in j..=i {
        acc = factor(hist, k, shift)? * acc;
    }
    Ok(acc)
}

fn check_index(hist: &CoefficientHistory, k: usize) -> Result<()> {
    if k == 0 || k > hist.len() {
        Err(KplError::IndexOutOfRange {
            index: k,
            len: hist.len(),
        })
    } else {
        Ok(())
    }
}

/// `max_{1<=j<=i} ||P_{j,i}||_2`, or `+inf` once a product overflows.
pub fn psi(hist: &CoefficientHistory, i: usize, sigma: f64) -> Result<f64> {
    psi_with(hist, i, ShiftModel::Constant(sigma))
}

pub fn psi_with(hist: &CoefficientHistory, i: usize, shift: ShiftModel<'_>) -> Result<f64> {
    check_index(hist, i)?;
    let mut acc = PropagationMatrix4::IDENTITY;
    let mut best = 0.0_f64;
    // P_{j,i} = P_{j+1,i} P_j: extend the running product on the right.
    for j in (1..=i).rev() {
        acc = acc * factor(hist, j, shift)?;
        let nrm = matrix_2norm(&acc);
        if !nrm.is_finite() {
            return Ok(f64::INFINITY);
        }
        best = best.max(nrm);
    }
    Ok(best)
}

/// `psi_1(sigma), ..., psi_len(sigma)`.
pub fn psi_trajectory(hist: &CoefficientHistory, sigma: f64) -> Vec<f64> {
    (1..=hist.len())
        .map(|i| psi(hist, i, sigma).expect("index within history"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution_examples() {
        let p = propagation_matrix(1.0, 0.0, 0.0);
        assert_eq!(
            p.0,
            [
                [1.0, 0.0, -1.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 0.0]
            ]
        );
        let v = propagation_matrix_var(1.0, 1.0, 0.0, 1.0);
        assert_eq!(v.0[3], [0.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn norm_of_simple_matrices() {
        assert!((matrix_2norm(&PropagationMatrix4::IDENTITY) - 1.0).abs() < 1e-15);
        let mut d = PropagationMatrix4::IDENTITY;
        d.0[0][0] = 3.0;
        assert!((matrix_2norm(&d) - 3.0).abs() < 1e-14);
        let mut inf = PropagationMatrix4::IDENTITY;
        inf.0[1][2] = f64::INFINITY;
        assert_eq!(matrix_2norm(&inf), f64::INFINITY);
    }

    #[test]
    fn huge_entries_do_not_overflow() {
        let mut m = PropagationMatrix4::IDENTITY;
        m.0[0][3] = 1e200;
        let n = matrix_2norm(&m);
        assert!((n / 1e200 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn history_from_records_skips_iteration_zero() {
        let rec = |iter, alpha: Option<f64>, beta| IterationRecord {
            iter,
            alpha,
            beta: Some(beta),
            gamma: None,
            delta: None,
            rnorm_recursive: 1.0,
            rnorm_true: None,
            gap_f: None,
            gap_g: None,
            gap_h: None,
            gap_j: None,
        };
        let recs = [
            rec(0, Some(9.0), 0.0),
            rec(1, Some(2.0), 0.5),
            rec(2, None, 0.1),
        ];
        let h = CoefficientHistory::from_records(&recs).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!((h.alpha(1), h.beta(1)), (2.0, 0.5));
    }

    #[test]
    fn product_index_errors() {
        let h = CoefficientHistory::new(vec![1.0; 3], vec![0.5; 3]).unwrap();
        assert!(propagation_product(&h, 1, 4, 0.0).is_err());
        assert!(propagation_product(&h, 0, 2, 0.0).is_err());
        assert!(psi(&h, 4, 0.0).is_err());
        assert_eq!(
            propagation_product(&h, 3, 2, 0.0).unwrap(),
            PropagationMatrix4::IDENTITY
        );
    }

    #[test]
    fn schedule_model_uses_adjacent_shifts() {
        let h = CoefficientHistory::new(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        // sigma_{-1}, sigma_0, sigma_1, sigma_2
        let sched = [0.0, 0.0, 0.0, 1.0];
        let p2 = factor(&h, 2, ShiftModel::Schedule(&sched)).unwrap();
        assert_eq!(p2, propagation_matrix_var(1.0, 1.0, 0.0, 1.0));
        assert!(factor(&h, 2, ShiftModel::Schedule(&sched[..3])).is_err());
    }
}
