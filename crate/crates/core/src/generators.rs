//! Test problem generators.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{KplError, Result};
use crate::sparse::{norm2, spmv, SparseMatrix};

/// Unscaled 5-point finite-difference Laplacian on an `nx` by `ny` grid with
/// homogeneous Dirichlet truncation: 4 on the diagonal, -1 for each neighbour.
pub fn laplacian_2d(nx: usize, ny: usize) -> Result<SparseMatrix> {
    if nx == 0 || ny == 0 {
        return Err(KplError::ZeroDimension);
    }
    let n = nx * ny;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(5 * n);
    let mut values = Vec::with_capacity(5 * n);
    row_ptr.push(0);
    // natural (row-major) node ordering, column indices emitted in increasing order
    for iy in 0..ny {
        for ix in 0..nx {
            let k = iy * nx + ix;
            if iy > 0 {
                col_idx.push(k - nx);
                values.push(-1.0);
            }
            if ix > 0 {
                col_idx.push(k - 1);
                values.push(-1.0);
            }
            col_idx.push(k);
            values.push(4.0);
            if ix + 1 < nx {
                col_idx.push(k + 1);
                values.push(-1.0);
            }
            if iy + 1 < ny {
                col_idx.push(k + nx);
                values.push(-1.0);
            }
            row_ptr.push(col_idx.len());
        }
    }
    SparseMatrix::from_csr(n, row_ptr, col_idx, values)
}

/// Right-hand side with constant entries `1/sqrt(n)`.
pub fn ones_rhs(n: usize) -> Vec<f64> {
    vec![1.0 / (n as f64).sqrt(); n]
}

/// Right-hand side `b = A x` with `x_j = 1/sqrt(n)`; returns `(b, x)`.
pub fn ones_solution_rhs(a: &SparseMatrix) -> (Vec<f64>, Vec<f64>) {
    let x = ones_rhs(a.n());
    let b = spmv(a, &x).expect("dimensions agree by construction");
    (b, x)
}

/// Dense random SPD matrix `Q diag(lambda) Q^T` with eigenvalues geometrically
/// spaced in `[1, cond]` and a Haar-like random orthogonal `Q`.
pub fn random_spd<R: Rng + ?Sized>(n: usize, cond: f64, rng: &mut R) -> Result<SparseMatrix> {
    if n == 0 {
        return Err(KplError::ZeroDimension);
    }
    if !(cond >= 1.0) || !cond.is_finite() {
        return Err(KplError::InvalidConfig(format!(
            "condition number must be finite and >= 1, got {cond}"
        )));
    }
    let q = random_orthogonal(n, rng);
    let lambda: Vec<f64> = (0..n)
        .map(|k| {
            if n == 1 {
                1.0
            } else {
                cond.powf(k as f64 / (n - 1) as f64)
            }
        })
        .collect();
    let mut dense = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut acc = 0.0;
            for k in 0..n {
                acc += q[k][i] * lambda[k] * q[k][j];
            }
            dense[i][j] = acc;
            dense[j][i] = acc;
        }
    }
    SparseMatrix::from_dense(&dense)
}

/// Rows of the returned array form an orthonormal basis.
fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        // Gram-Schmidt twice is enough for orthogonality to working precision
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nv = norm2(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v);
        }
    }
    basis
}

/// Random vector with standard normal entries.
pub fn random_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}
