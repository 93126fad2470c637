//! Residual gaps between recursively updated vectors and their explicit
//! definitions:
//!
//! ```text
//! f_i = (b - A x_i) - r_i
//! g_i = (A p_i - sigma_i t_i) - s_i
//! h_i = (A u_i - sigma_{i-1} r_i) - w_i
//! j_i = A q_i - z_i
//! ```
//!
//! The differences are evaluated in doubled precision so that the measurement
//! does not add rounding of its own on top of the quantity being measured.

use crate::sparse::{compensated_combination, norm2, SparseMatrix};

/// Vectors a gap measurement needs; missing ones disable the matching gap.
pub struct GapInputs<'a> {
    pub x: &'a [f64],
    pub r: &'a [f64],
    pub u: Option<&'a [f64]>,
    pub w: Option<&'a [f64]>,
    pub p: Option<&'a [f64]>,
    pub s: Option<&'a [f64]>,
    pub t: Option<&'a [f64]>,
    pub q: Option<&'a [f64]>,
    pub z: Option<&'a [f64]>,
    pub sigma_prev: f64,
    pub sigma: f64,
}

impl<'a> GapInputs<'a> {
    /// Only `x` and `r` available: the residual gap alone.
    pub fn residual_only(x: &'a [f64], r: &'a [f64]) -> Self {
        Self {
            x,
            r,
            u: None,
            w: None,
            p: None,
            s: None,
            t: None,
            q: None,
            z: None,
            sigma_prev: 0.0,
            sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapVectors {
    pub f: Vec<f64>,
    pub g: Option<Vec<f64>>,
    pub h: Option<Vec<f64>>,
    pub j: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GapNorms {
    pub f: Option<f64>,
    pub g: Option<f64>,
    pub h: Option<f64>,
    pub j: Option<f64>,
}

impl GapVectors {
    pub fn norms(&self) -> GapNorms {
        GapNorms {
            f: Some(norm2(&self.f)),
            g: self.g.as_deref().map(norm2),
            h: self.h.as_deref().map(norm2),
            j: self.j.as_deref().map(norm2),
        }
    }
}

/// Measures every gap whose inputs are present.
pub fn track_gaps(a: &SparseMatrix, b: &[f64], v: &GapInputs<'_>) -> GapVectors {
    let comb = |scale, vec, terms: &[(f64, &[f64])]| {
        compensated_combination(a, scale, vec, terms).expect("solver vectors match A")
    };
    let f = comb(-1.0, v.x, &[(1.0, b), (-1.0, v.r)]);
    let g = match (v.p, v.t, v.s) {
        (Some(p), Some(t), Some(s)) => Some(comb(1.0, p, &[(-v.sigma, t), (-1.0, s)])),
        (Some(p), None, Some(s)) => Some(comb(1.0, p, &[(-1.0, s)])),
        _ => None,
    };
    let h = match (v.u, v.w) {
        (Some(u), Some(w)) => Some(comb(1.0, u, &[(-v.sigma_prev, v.r), (-1.0, w)])),
        _ => None,
    };
    let j = match (v.q, v.z) {
        (Some(q), Some(z)) => Some(comb(1.0, q, &[(-1.0, z)])),
        _ => None,
    };
    GapVectors { f, g, h, j }
}
