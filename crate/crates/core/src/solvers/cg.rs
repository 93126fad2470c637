use super::{
    breakdown, check_inputs, explicit_residual, GapInputs, IterationView, NoObserver, Observer,
    Recorder, Scalars, SolveResult, SolverConfig, Stage,
};
use crate::error::Result;
use crate::precond::Preconditioner;
use crate::sparse::{dot_unchecked, norm2, spmv_into, SparseMatrix};

/// Classic preconditioned conjugate gradients: one matrix product and one
/// preconditioner application per iteration.
pub fn solve_cg(
    a: &SparseMatrix,
    m: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    solve_cg_observed(a, m, b, x0, cfg, &mut NoObserver)
}

pub fn solve_cg_observed(
    a: &SparseMatrix,
    m: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
    obs: &mut dyn Observer,
) -> Result<SolveResult> {
    check_inputs(a, m, b, x0, cfg)?;
    let n = a.n();
    let mut rec = Recorder::new(a, b, cfg);

    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    explicit_residual(a, b, &x, &mut r);
    let mut u = vec![0.0; n];
    m.apply_into(&r, &mut u);
    let mut p = u.clone();
    let mut s = vec![0.0; n];
    let mut gamma = dot_unchecked(&r, &u);
    let mut beta = 0.0;

    let mut i = 0;
    let converged = loop {
        let rnorm = norm2(&r);
        if rec.converged(rnorm) {
            let sc = Scalars {
                alpha: None,
                beta: None,
                gamma: Some(gamma),
                delta: None,
                rnorm,
            };
            rec.record(i, Stage::Exit, sc, &GapInputs::residual_only(&x, &r));
            break true;
        }
        if !(gamma > 0.0) {
            return Err(breakdown(i, format!("(r, u) = {gamma} is not positive")));
        }
        if i == cfg.max_iters {
            let sc = Scalars {
                alpha: None,
                beta: Some(beta),
                gamma: Some(gamma),
                delta: None,
                rnorm,
            };
            rec.record(i, Stage::Exit, sc, &GapInputs::residual_only(&x, &r));
            break false;
        }

        spmv_into(a, &p, &mut s);
        let curvature = dot_unchecked(&s, &p);
        if !(curvature > 0.0) || !curvature.is_finite() {
            return Err(breakdown(
                i,
                format!("(s, p) = {curvature} is not positive"),
            ));
        }
        let alpha = gamma / curvature;

        let sc = Scalars {
            alpha: Some(alpha),
            beta: Some(beta),
            gamma: Some(gamma),
            delta: Some(curvature),
            rnorm,
        };
        let gaps = rec.record(i, Stage::Step, sc, &GapInputs::residual_only(&x, &r));
        obs.observe(&IterationView {
            iter: i,
            alpha,
            beta,
            sigma_prev: 0.0,
            sigma: 0.0,
            x: &x,
            r: &r,
            u: &u,
            p: &p,
            s: &s,
            w: None,
            t: None,
            q: None,
            z: None,
            gaps: gaps.as_ref(),
        });

        for (xk, pk) in x.iter_mut().zip(&p) {
            *xk += alpha * pk;
        }
        for (rk, sk) in r.iter_mut().zip(&s) {
            *rk -= alpha * sk;
        }
        m.apply_into(&r, &mut u);
        let gamma_next = dot_unchecked(&r, &u);
        beta = gamma_next / gamma;
        for (pk, uk) in p.iter_mut().zip(&u) {
            *pk = uk + beta * *pk;
        }
        gamma = gamma_next;
        i += 1;
    };
    Ok(rec.finish(x, converged, Vec::new()))
}
