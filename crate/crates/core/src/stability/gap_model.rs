//! Linear model of how the four gaps propagate:
//! `pi_{k+1} = P_k pi_k + eps_k` with `pi_k = (f_k, g_{k-1}, h_k, j_{k-1})`.

use super::propagation::{factor, CoefficientHistory, PropagationMatrix4, ShiftModel};
use crate::error::{KplError, Result};

pub type GapVector4 = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapModelMode {
    /// Signed components, as when `pi` and `eps` are projections of measured
    /// gap vectors.
    Signed,
    /// Norms pushed through `|P_k|`: every output bounds the norm of the
    /// corresponding gap.
    UpperBound,
}

fn add(a: GapVector4, b: GapVector4) -> GapVector4 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

fn abs4(v: &GapVector4) -> GapVector4 {
    v.map(f64::abs)
}

/// `pi_2, ..., pi_{len+1}` by forward recurrence; `eps_sequence[k-1]` is
/// `eps_k`.
pub fn modeled_gap_evolution(
    hist: &CoefficientHistory,
    eps_sequence: &[GapVector4],
    pi1: GapVector4,
    shift: ShiftModel<'_>,
    mode: GapModelMode,
) -> Result<Vec<GapVector4>> {
    if eps_sequence.len() != hist.len() {
        return Err(KplError::DimensionMismatch {
            expected: hist.len(),
            found: eps_sequence.len(),
        });
    }
    let mut pi = match mode {
        GapModelMode::Signed => pi1,
        GapModelMode::UpperBound => abs4(&pi1),
    };
    let mut out = Vec::with_capacity(hist.len());
    for (k, eps) in (1..=hist.len()).zip(eps_sequence) {
        let p = factor(hist, k, shift)?;
        pi = match mode {
            GapModelMode::Signed => add(p.apply(&pi), *eps),
            GapModelMode::UpperBound => add(p.abs().apply(&pi), abs4(eps)),
        };
        out.push(pi);
    }
    Ok(out)
}

/// `pi_{i+1} = P_{1,i} pi_1 + sum_{j=1}^{i} P_{j+1,i} eps_j`, evaluated
/// directly from the products rather than by recurrence.
pub fn modeled_gap_unrolled(
    hist: &CoefficientHistory,
    eps_sequence: &[GapVector4],
    pi1: GapVector4,
    shift: ShiftModel<'_>,
    i: usize,
) -> Result<GapVector4> {
    if i == 0 || i > hist.len() {
        return Err(KplError::IndexOutOfRange {
            index: i,
            len: hist.len(),
        });
    }
    if eps_sequence.len() < i {
        return Err(KplError::DimensionMismatch {
            expected: i,
            found: eps_sequence.len(),
        });
    }
    // Accumulate P_{j+1,i} for j = i, i-1, ..., 1 by right-multiplication.
    let mut tail = PropagationMatrix4::IDENTITY;
    let mut sum = [0.0; 4];
    for j in (1..=i).rev() {
        sum = add(sum, tail.apply(&eps_sequence[j - 1]));
        tail = tail * factor(hist, j, shift)?;
    }
    Ok(add(tail.apply(&pi1), sum))
}
