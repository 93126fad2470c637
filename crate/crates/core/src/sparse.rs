//! Symmetric sparse matrices in CSR form and the dense level-1/2 kernels the
//! solvers are built from.
//!
//! All reductions sum strictly left to right so that two runs over the same
//! data produce bitwise-identical results.

use crate::error::{check_len, KplError, Result};

/// Relative tolerance used when validating numerical symmetry.
pub const SYMMETRY_TOL: f64 = 1e-14;

/// Square, numerically symmetric matrix in compressed sparse row format.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    mu: usize,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, validating structure and symmetry.
    pub fn from_csr(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(KplError::ZeroDimension);
        }
        if row_ptr.len() != n + 1 {
            return Err(KplError::InvalidMatrix(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                n + 1
            )));
        }
        if row_ptr[0] != 0 || row_ptr[n] != values.len() || col_idx.len() != values.len() {
            return Err(KplError::InvalidMatrix(
                "row_ptr bounds do not match the stored entries".into(),
            ));
        }
        let mut mu = 0;
        for i in 0..n {
            let (start, end) = (row_ptr[i], row_ptr[i + 1]);
            if end < start {
                return Err(KplError::InvalidMatrix(format!(
                    "row_ptr decreases at row {i}"
                )));
            }
            mu = mu.max(end - start);
            let cols = &col_idx[start..end];
            for (k, &c) in cols.iter().enumerate() {
                if c >= n {
                    return Err(KplError::InvalidMatrix(format!(
                        "column index {c} out of range in row {i}"
                    )));
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(KplError::InvalidMatrix(format!(
                        "column indices not strictly increasing in row {i}"
                    )));
                }
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(KplError::InvalidMatrix(format!("non-finite entry {v}")));
        }
        let m = Self {
            n,
            row_ptr,
            col_idx,
            values,
            mu,
        };
        m.check_symmetric()?;
        Ok(m)
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(KplError::ZeroDimension);
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(i, j, _) in &sorted {
            if i >= n || j >= n {
                return Err(KplError::InvalidMatrix(format!(
                    "entry ({i},{j}) out of range for dimension {n}"
                )));
            }
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().expect("previous entry") += v;
                continue;
            }
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
            last = Some((i, j));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self::from_csr(n, row_ptr, col_idx, values)
    }

    /// Builds a matrix from a dense row-major square array, dropping exact zeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            check_len(n, row.len())?;
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, &triplets)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let triplets: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, &triplets)
    }

    fn check_symmetric(&self) -> Result<()> {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j == i {
                    continue;
                }
                let mirror = self.get(j, i);
                let tol = SYMMETRY_TOL * v.abs().max(1.0);
                match mirror {
                    Some(w) if (v - w).abs() <= tol => {}
                    Some(w) => {
                        return Err(KplError::InvalidMatrix(format!(
                            "not symmetric: A[{i},{j}]={v} but A[{j},{i}]={w}"
                        )))
                    }
                    None if v.abs() <= tol => {}
                    None => {
                        return Err(KplError::InvalidMatrix(format!(
                            "not symmetric: A[{i},{j}]={v} has no mirror entry"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Maximum number of stored entries in any row.
    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    /// Stored value at `(i, j)`, if any.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    /// Diagonal entries; absent entries read as zero.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i).unwrap_or(0.0)).collect()
    }

    /// Dense row-major copy, for small matrices and oracles.
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

    /// Iterator over the stored entries with `col <= row`.
    pub fn lower_triangle(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .take_while(move |(&j, _)| j <= i)
                .map(move |(&j, &v)| (i, j, v))
        })
    }

    /// Largest absolute row sum, an upper bound on every eigenvalue modulus.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Estimate of the spectral norm by power iteration from a fixed start vector.
    pub fn norm2_estimate(&self, iters: usize) -> f64 {
        let n = self.n;
        let mut v: Vec<f64> = (0..n).map(|k| 1.0 + (k % 7) as f64 * 0.1).collect();
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let mut w = vec![0.0; n];
        let mut est = 0.0;
        for _ in 0..iters.max(1) {
            spmv_into(self, &v, &mut w);
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

/// `w = A v`, dimensions checked.
pub fn spmv(a: &SparseMatrix, v: &[f64]) -> Result<Vec<f64>> {
    check_len(a.n, v.len())?;
    let mut w = vec![0.0; a.n];
    spmv_into(a, v, &mut w);
    Ok(w)
}

/// `out = A v` without allocation. Panics on dimension mismatch.
#[inline]
pub fn spmv_into(a: &SparseMatrix, v: &[f64], out: &mut [f64]) {
    assert_eq!(v.len(), a.n);
    assert_eq!(out.len(), a.n);
    for (i, o) in out.iter_mut().enumerate() {
        let (cols, vals) = a.row(i);
        let mut acc = 0.0;
        for (&j, &aij) in cols.iter().zip(vals) {
            acc += aij * v[j];
        }
        *o = acc;
    }
}

/// Inner product with sequential summation.
pub fn dot(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len(u.len(), v.len())?;
    Ok(dot_unchecked(u, v))
}

#[inline]
pub(crate) fn dot_unchecked(u: &[f64], v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in u.iter().zip(v) {
        acc += a * b;
    }
    acc
}

#[inline]
pub fn norm2(v: &[f64]) -> f64 {
    dot_unchecked(v, v).sqrt()
}

/// `alpha * x + y` as a new vector.
pub fn axpy(alpha: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_len(x.len(), y.len())?;
    if alpha == 0.0 {
        return Ok(y.to_vec());
    }
    Ok(x.iter().zip(y).map(|(xi, yi)| alpha * xi + yi).collect())
}

/// Error-free transformation of a product: `a * b = p + e` exactly.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Error-free transformation of a sum: `a + b = s + e` exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Twice-working-precision accumulator (Ogita, Rump and Oishi's Dot2).
#[derive(Default, Clone, Copy)]
struct Dot2 {
    hi: f64,
    lo: f64,
}

impl Dot2 {
    #[inline]
    fn add_prod(&mut self, a: f64, b: f64) {
        let (p, ep) = two_prod(a, b);
        let (s, es) = two_sum(self.hi, p);
        self.hi = s;
        self.lo += ep + es;
    }

    #[inline]
    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Evaluates `scale * (A v) + sum_m coef_m * y_m` row by row in doubled
/// precision. Used to measure gaps between recursive and explicit vectors
/// without polluting them with the rounding of the measurement itself.
pub fn compensated_combination(
    a: &SparseMatrix,
    scale: f64,
    v: &[f64],
    terms: &[(f64, &[f64])],
) -> Result<Vec<f64>> {
    check_len(a.n, v.len())?;
    for (_, y) in terms {
        check_len(a.n, y.len())?;
    }
    let out = (0..a.n)
        .map(|i| {
            let mut acc = Dot2::default();
            let (cols, vals) = a.row(i);
            for (&j, &aij) in cols.iter().zip(vals) {
                let (p, e) = two_prod(scale, aij);
                acc.add_prod(p, v[j]);
                acc.add_prod(e, v[j]);
            }
            for (c, y) in terms {
                acc.add_prod(*c, y[i]);
            }
            acc.value()
        })
        .collect();
    Ok(out)
}

/// Inner product in doubled precision.
pub fn dot_compensated(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len(u.len(), v.len())?;
    let mut acc = Dot2::default();
    for (a, b) in u.iter().zip(v) {
        acc.add_prod(*a, *b);
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_spmv() {
        let a = SparseMatrix::identity(3).unwrap();
        assert_eq!(spmv(&a, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(dot(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 25.0);
        assert!(matches!(
            dot(&[1.0], &[1.0, 2.0]),
            Err(KplError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn axpy_examples() {
        let y = [0.1, -0.0, 3.0];
        let r = axpy(0.0, &[f64::MAX, 1.0, 2.0], &y).unwrap();
        assert!(r.iter().zip(&y).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(axpy(1.0, &[1.0, 1.0], &[1.0, 1.0]).unwrap(), vec![2.0, 2.0]);
        assert_eq!(
            axpy(-2.0, &[1.0, 2.0], &[2.0, 4.0]).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn spmv_dimension_mismatch() {
        let a = SparseMatrix::identity(3).unwrap();
        assert!(spmv(&a, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rejects_bad_structure() {
        assert!(matches!(
            SparseMatrix::from_csr(0, vec![0], vec![], vec![]),
            Err(KplError::ZeroDimension)
        ));
        // unsorted columns
        assert!(
            SparseMatrix::from_csr(2, vec![0, 2, 3], vec![1, 0, 1], vec![1.0, 2.0, 1.0]).is_err()
        );
        // column out of range
        assert!(SparseMatrix::from_csr(1, vec![0, 1], vec![1], vec![1.0]).is_err());
        // asymmetric
        assert!(SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 1.0]]).is_err());
        assert!(SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.5, 1.0]]).is_err());
    }

    #[test]
    fn mu_is_max_row_count() {
        let a = SparseMatrix::from_dense(&[
            vec![2.0, 1.0, 0.0],
            vec![1.0, 2.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ])
        .unwrap();
        assert_eq!(a.mu(), 3);
        assert_eq!(a.nnz(), 7);
        assert_eq!(a.lower_triangle().count(), 5);
    }

    #[test]
    fn compensated_combination_cancels_exactly() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 1e-17], vec![1e-17, 1.0]]).unwrap();
        let v = [1.0, 1.0];
        let av = spmv(&a, &v).unwrap();
        // plain arithmetic loses the 1e-17 contribution; the compensated one keeps it
        let r = compensated_combination(&a, 1.0, &v, &[(-1.0, &av)]).unwrap();
        assert!((r[0] - 1e-17).abs() < 1e-30);
    }
}
