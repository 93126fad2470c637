//! Preconditioners: identity, Jacobi and diagonally compensated IC(0).

use crate::error::{check_len, KplError, Result};
use crate::sparse::{norm2, SparseMatrix};

/// Lower-triangular CSR factor; the diagonal is the last entry of every row.
#[derive(Debug, Clone)]
pub struct LowerFactor {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl LowerFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.values[self.row_ptr[i + 1] - 1]
    }

    /// Dense copy of `L`, for tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }

    /// Solves `L L^T x = v` in place.
    fn solve_in_place(&self, x: &mut [f64]) {
        // forward: L y = v
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let last = cols.len() - 1;
            let mut acc = x[i];
            for k in 0..last {
                acc -= vals[k] * x[cols[k]];
            }
            x[i] = acc / vals[last];
        }
        // backward: L^T x = y, column sweep over the rows of L
        for i in (0..self.n).rev() {
            let (cols, vals) = self.row(i);
            let last = cols.len() - 1;
            x[i] /= vals[last];
            let xi = x[i];
            for k in 0..last {
                x[cols[k]] -= vals[k] * xi;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum PreconditionerKind {
    Identity,
    /// Stores the diagonal of `A`.
    Jacobi(Vec<f64>),
    /// Incomplete Cholesky factor of `A + eta * diag(A)`.
    Ic0 {
        factor: LowerFactor,
        eta: f64,
    },
}

/// Symmetric positive definite approximation of `A^{-1}`.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    n: usize,
    kind: PreconditionerKind,
    mu_tilde: usize,
}

impl Preconditioner {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            kind: PreconditionerKind::Identity,
            mu_tilde: 1,
        }
    }

    /// Jacobi preconditioner; every diagonal entry of `a` must be positive.
    pub fn jacobi(a: &SparseMatrix) -> Result<Self> {
        let diag = a.diagonal();
        if let Some((row, &value)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
            return Err(KplError::NonPositiveDiagonal { row, value });
        }
        Ok(Self {
            n: a.n(),
            kind: PreconditionerKind::Jacobi(diag),
            mu_tilde: 1,
        })
    }

    /// Zero-fill incomplete Cholesky of `A + eta * diag(diag(A))`.
    ///
    /// The factor keeps exactly the sparsity of the lower triangle of `a`.
    /// A nonpositive pivot aborts with the offending row.
    pub fn ic0(a: &SparseMatrix, eta: f64) -> Result<Self> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(KplError::InvalidConfig(format!(
                "IC(0) diagonal compensation must be finite and >= 0, got {eta}"
            )));
        }
        let n = a.n();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            let mut has_diag = false;
            for (&j, &v) in cols.iter().zip(vals) {
                if j > i {
                    break;
                }
                col_idx.push(j);
                if j == i {
                    values.push(v * (1.0 + eta));
                    has_diag = true;
                } else {
                    values.push(v);
                }
            }
            if !has_diag {
                return Err(KplError::FactorizationBreakdown { row: i, pivot: 0.0 });
            }
            row_ptr.push(col_idx.len());
        }

        // Up-looking row factorization restricted to the pattern.
        for i in 0..n {
            let (s, e) = (row_ptr[i], row_ptr[i + 1]);
            for p in s..e {
                let j = col_idx[p];
                // sum over k < j of L[i,k] * L[j,k], k in both patterns
                let (sj, ej) = (row_ptr[j], row_ptr[j + 1]);
                let mut acc = 0.0;
                let (mut a_ptr, mut b_ptr) = (s, sj);
                while a_ptr < p && b_ptr < ej - 1 {
                    let (ca, cb) = (col_idx[a_ptr], col_idx[b_ptr]);
                    if ca == cb {
                        acc += values[a_ptr] * values[b_ptr];
                        a_ptr += 1;
                        b_ptr += 1;
                    } else if ca < cb {
                        a_ptr += 1;
                    } else {
                        b_ptr += 1;
                    }
                }
                if j < i {
                    values[p] = (values[p] - acc) / values[ej - 1];
                } else {
                    let pivot = values[p] - acc;
                    if !(pivot > 0.0) || !pivot.is_finite() {
                        return Err(KplError::FactorizationBreakdown { row: i, pivot });
                    }
                    values[p] = pivot.sqrt();
                }
            }
        }

        let factor = LowerFactor {
            n,
            row_ptr,
            col_idx,
            values,
        };
        // substitution sweeps touch row i of L and row i of L^T
        let mut col_counts = vec![0usize; n];
        for &c in &factor.col_idx {
            col_counts[c] += 1;
        }
        let mu_tilde = (0..n)
            .map(|i| factor.row_ptr[i + 1] - factor.row_ptr[i] + col_counts[i])
            .max()
            .unwrap_or(1);
        Ok(Self {
            n,
            kind: PreconditionerKind::Ic0 { factor, eta },
            mu_tilde,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &PreconditionerKind {
        &self.kind
    }

    /// Row-wise nonzero count of the operator representation used by `apply`.
    pub fn mu_tilde(&self) -> usize {
        self.mu_tilde
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, PreconditionerKind::Identity)
    }

    /// `M^{-1} v`, dimensions checked.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, v.len())?;
        let mut out = vec![0.0; self.n];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// `out = M^{-1} v`. Panics on dimension mismatch.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.n);
        assert_eq!(out.len(), self.n);
        match &self.kind {
            PreconditionerKind::Identity => out.copy_from_slice(v),
            PreconditionerKind::Jacobi(diag) => {
                for ((o, vi), d) in out.iter_mut().zip(v).zip(diag) {
                    *o = vi / d;
                }
            }
            PreconditionerKind::Ic0 { factor, .. } => {
                out.copy_from_slice(v);
                factor.solve_in_place(out);
            }
        }
    }

    /// Estimate of `||M^{-1}||_2`: exact for identity and Jacobi, 20 power
    /// iteration steps for IC(0).
    pub fn norm_estimate(&self) -> f64 {
        match &self.kind {
            PreconditionerKind::Identity => 1.0,
            PreconditionerKind::Jacobi(diag) => diag.iter().map(|d| 1.0 / d).fold(0.0, f64::max),
            PreconditionerKind::Ic0 { .. } => {
                let mut v: Vec<f64> = (0..self.n).map(|k| 1.0 + (k % 5) as f64 * 0.1).collect();
                let nv = norm2(&v);
                v.iter_mut().for_each(|x| *x /= nv);
                let mut w = vec![0.0; self.n];
                let mut est = 0.0;
                for _ in 0..20 {
                    self.apply_into(&v, &mut w);
                    est = norm2(&w);
                    if est == 0.0 {
                        return 0.0;
                    }
                    for (vi, wi) in v.iter_mut().zip(&w) {
                        *vi = wi / est;
                    }
                }
                est
            }
        }
    }

    /// Gershgorin-type upper bound on the spectrum of the preconditioned
    /// operator: `max_k sum_j |A[k,j]| / A[k,k]` for Jacobi, `||A||` otherwise.
    pub fn spectrum_upper_bound(&self, a: &SparseMatrix) -> f64 {
        match &self.kind {
            PreconditionerKind::Jacobi(diag) => (0..a.n())
                .map(|k| a.row(k).1.iter().map(|v| v.abs()).sum::<f64>() / diag[k])
                .fold(0.0, f64::max),
            _ => a.norm2_estimate(50),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::laplacian_2d;
    use crate::sparse::spmv;

    fn scaled_identity(n: usize, d: f64) -> SparseMatrix {
        let t: Vec<_> = (0..n).map(|i| (i, i, d)).collect();
        SparseMatrix::from_triplets(n, &t).unwrap()
    }

    #[test]
    fn jacobi_examples() {
        let m = Preconditioner::jacobi(&scaled_identity(2, 2.0)).unwrap();
        assert_eq!(m.apply(&[2.0, 4.0]).unwrap(), vec![1.0, 2.0]);
        let m = Preconditioner::jacobi(&scaled_identity(3, 1.0)).unwrap();
        assert_eq!(m.apply(&[1.0, -2.0, 3.5]).unwrap(), vec![1.0, -2.0, 3.5]);
        let m = Preconditioner::jacobi(&laplacian_2d(3, 3).unwrap()).unwrap();
        let v: Vec<f64> = (0..9).map(|k| k as f64 - 3.0).collect();
        let w = m.apply(&v).unwrap();
        assert!(v.iter().zip(&w).all(|(a, b)| *b == a / 4.0));
    }

    #[test]
    fn jacobi_rejects_nonpositive_diagonal() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert!(matches!(
            Preconditioner::jacobi(&a),
            Err(KplError::NonPositiveDiagonal { row: 1, .. })
        ));
    }

    #[test]
    fn identity_is_bitwise() {
        let m = Preconditioner::identity(3);
        let v = [1.0 / 3.0, -0.0, 1e-300];
        let w = m.apply(&v).unwrap();
        assert!(v.iter().zip(&w).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(m.apply(&[1.0]).is_err());
    }

    #[test]
    fn ic0_diagonal_matrix() {
        let d = [4.0, 9.0, 2.0];
        let a =
            SparseMatrix::from_triplets(3, &[(0, 0, d[0]), (1, 1, d[1]), (2, 2, d[2])]).unwrap();
        let m = Preconditioner::ic0(&a, 0.0).unwrap();
        if let PreconditionerKind::Ic0 { factor, .. } = m.kind() {
            for i in 0..3 {
                assert_eq!(factor.diag(i), d[i].sqrt());
            }
        }
        let w = m.apply(&[1.0, 1.0, 1.0]).unwrap();
        for i in 0..3 {
            assert!((w[i] - 1.0 / d[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn ic0_compensation_shifts_diagonal() {
        let m = Preconditioner::ic0(&scaled_identity(4, 1.0), 0.5).unwrap();
        let w = m.apply(&[3.0, 1.5, -1.5, 0.0]).unwrap();
        let expect = [2.0, 1.0, -1.0, 0.0];
        for i in 0..4 {
            assert!((w[i] - expect[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn ic0_matches_lower_pattern() {
        // L L^T agrees with A on the lower pattern of A
        let a = laplacian_2d(4, 4).unwrap();
        let m = Preconditioner::ic0(&a, 0.0).unwrap();
        let PreconditionerKind::Ic0 { factor, .. } = m.kind() else {
            unreachable!()
        };
        let l = factor.to_dense();
        for (i, j, v) in a.lower_triangle() {
            let llt: f64 = (0..16).map(|k| l[i][k] * l[j][k]).sum();
            assert!((llt - v).abs() < 1e-12, "({i},{j}): {llt} vs {v}");
        }
    }

    #[test]
    fn ic0_breakdown_reports_row() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            Preconditioner::ic0(&a, 0.0),
            Err(KplError::FactorizationBreakdown { row: 1, .. })
        ));
        assert!(Preconditioner::ic0(&a, 2.0).is_ok());
    }

    #[test]
    fn ic0_full_pattern_is_exact_cholesky() {
        let a = SparseMatrix::from_dense(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.25],
            vec![0.5, 0.25, 2.0],
        ])
        .unwrap();
        let m = Preconditioner::ic0(&a, 0.0).unwrap();
        let x = [1.0, -2.0, 0.5];
        let b = spmv(&a, &x).unwrap();
        let y = m.apply(&b).unwrap();
        for i in 0..3 {
            assert!((y[i] - x[i]).abs() < 1e-12);
        }
    }
}
