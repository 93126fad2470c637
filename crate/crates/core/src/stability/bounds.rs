//! A-priori bounds on the rounding error committed by one pipelined iteration.

use crate::solvers::UNIT_ROUNDOFF;

/// 2-norms of the iteration-`i` vectors (and the `i-1` ones the
/// recurrences read).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LocalNorms {
    pub x: f64,
    pub r: f64,
    pub u: f64,
    pub w: f64,
    pub p: f64,
    pub s: f64,
    pub t: f64,
    pub q: f64,
    pub z: f64,
    pub p_prev: f64,
    pub s_prev: f64,
    pub t_prev: f64,
    pub q_prev: f64,
    pub z_prev: f64,
}

/// Operator quantities entering the matrix-product rounding terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorNorms {
    pub a_norm: f64,
    pub minv_norm: f64,
    /// Maximum nonzeros per row of `A`.
    pub mu: usize,
    /// Maximum nonzeros per row of the preconditioner representation.
    pub mu_tilde: usize,
    pub n: usize,
}

/// Upper bounds on `||delta_i^v||` for each recursively updated vector.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LocalErrorBounds {
    pub x: f64,
    pub t: f64,
    pub r: f64,
    pub p: f64,
    pub u: f64,
    pub s: f64,
    pub w: f64,
    pub q: f64,
    pub z: f64,
}

impl LocalErrorBounds {
    pub fn as_array(&self) -> [f64; 9] {
        [
            self.x, self.t, self.r, self.p, self.u, self.s, self.w, self.q, self.z,
        ]
    }
}

fn product_factors(op: &OperatorNorms) -> (f64, f64) {
    let sqrt_n = (op.n as f64).sqrt();
    let mt = op.mu_tilde as f64 * sqrt_n;
    let m = op.mu as f64 * sqrt_n;
    (
        (mt + 1.0) * op.minv_norm,
        (m + mt + 1.0) * op.a_norm * op.minv_norm,
    )
}

/// Bounds for an iteration with constant shift `sigma`.
pub fn local_error_bounds(
    alpha: f64,
    beta: f64,
    sigma: f64,
    v: &LocalNorms,
    op: &OperatorNorms,
) -> LocalErrorBounds {
    let eps = UNIT_ROUNDOFF;
    let (a, b, sg) = (alpha.abs(), beta.abs(), sigma.abs());
    let (fq, fz) = product_factors(op);
    LocalErrorBounds {
        x: (v.x + 2.0 * a * v.p) * eps,
        t: (v.r + 2.0 * b * v.t_prev) * eps,
        r: (v.r + 3.0 * a * v.s + 4.0 * a * sg * v.t) * eps,
        p: (v.u + 2.0 * b * v.p_prev) * eps,
        u: (v.u + 3.0 * a * v.q + 4.0 * a * sg * v.p) * eps,
        s: (v.w + 2.0 * b * v.s_prev) * eps,
        w: (v.w + 2.0 * a * v.z) * eps,
        q: (fq * v.w + 2.0 * b * v.q_prev) * eps,
        z: (fz * v.w + 2.0 * b * v.z_prev) * eps,
    }
}

/// Bounds for an iteration whose shift moves from `sigma_prev` to `sigma`.
/// The corrected recurrences for `s, w, q, z` carry one more term each.
pub fn local_error_bounds_var(
    alpha: f64,
    beta: f64,
    sigma_prev: f64,
    sigma: f64,
    v: &LocalNorms,
    op: &OperatorNorms,
) -> LocalErrorBounds {
    let eps = UNIT_ROUNDOFF;
    let (a, b, sg) = (alpha.abs(), beta.abs(), sigma.abs());
    let ds = (sigma - sigma_prev).abs();
    let (fq, fz) = product_factors(op);
    LocalErrorBounds {
        x: (v.x + 2.0 * a * v.p) * eps,
        t: (v.r + 2.0 * b * v.t_prev) * eps,
        r: (v.r + 3.0 * a * v.s + 4.0 * a * sg * v.t) * eps,
        p: (v.u + 2.0 * b * v.p_prev) * eps,
        u: (v.u + 3.0 * a * v.q + 4.0 * a * sg * v.p) * eps,
        s: (v.w + 3.0 * b * v.s_prev + 4.0 * ds * v.t) * eps,
        w: (v.w + 3.0 * a * v.z + 4.0 * ds * v.r) * eps,
        q: (fq * v.w + 3.0 * b * v.q_prev + 4.0 * ds * v.p) * eps,
        z: (fz * v.w + 3.0 * b * v.z_prev + 5.0 * ds * v.s + 6.0 * ds * sg * v.t) * eps,
    }
}

/// Bounds on the four components of the inhomogeneous term `eps_i` in
/// `pi_{i+1} = P_i pi_i + eps_i`, where `pi_i = (f_i, g_{i-1}, h_i, j_{i-1})`.
///
/// Substituting the gap recurrences into one another gives
///
/// ```text
/// eg = A dp - sig_i dt - ds
/// ej = A dq - dz
/// eps_1 = -A dx - dr - alpha eg
/// eps_2 = eg
/// eps_3 = A du - sig_i dr - dw - alpha ej - alpha sig_{i-1} eg
/// eps_4 = ej - (sig_i - sig_{i-1}) eg
/// ```
pub fn remainder_bounds(
    d: &LocalErrorBounds,
    alpha: f64,
    sigma_prev: f64,
    sigma: f64,
    a_norm: f64,
) -> [f64; 4] {
    let (a, sp, sc) = (alpha.abs(), sigma_prev.abs(), sigma.abs());
    let eg = a_norm * d.p + sc * d.t + d.s;
    let ej = a_norm * d.q + d.z;
    [
        a_norm * d.x + d.r + a * eg,
        eg,
        a_norm * d.u + sc * d.r + d.w + a * ej + a * sp * eg,
        ej + (sigma - sigma_prev).abs() * eg,
    ]
}

/// Bound on `||f_0||` from computing `b - A x_0` explicitly.
pub fn initial_residual_gap_bound(op: &OperatorNorms, x0_norm: f64, b_norm: f64) -> f64 {
    let m = op.mu as f64 * (op.n as f64).sqrt();
    ((m + 1.0) * op.a_norm * x0_norm + b_norm) * UNIT_ROUNDOFF
}
