//! Pipelined CG and its stabilized relatives.
//!
//! All four variants share the same skeleton: two reductions `gamma_i` and
//! `delta` at the top of the iteration, the explicit products
//! `m_i = M^{-1} w_i` and `n_i = A m_i`, and recursively updated auxiliary
//! vectors. They differ only in how the auxiliary recurrences are written,
//! which is what each [`Recurrences`] implementation spells out.

use super::{
    breakdown, check_inputs, explicit_residual, GapInputs, IterationView, NoObserver, Observer,
    Recorder, Scalars, SolveResult, SolverConfig, Stage, UNIT_ROUNDOFF,
};
use crate::error::Result;
use crate::precond::Preconditioner;
use crate::sparse::{dot_unchecked, norm2, spmv_into, SparseMatrix};

/// Working vectors of a pipelined iteration.
struct State {
    x: Vec<f64>,
    r: Vec<f64>,
    u: Vec<f64>,
    w: Vec<f64>,
    m: Vec<f64>,
    n: Vec<f64>,
    z: Vec<f64>,
    q: Vec<f64>,
    s: Vec<f64>,
    t: Vec<f64>,
    p: Vec<f64>,
}

impl State {
    fn new(x0: &[f64]) -> Self {
        let n = x0.len();
        let zeros = || vec![0.0; n];
        Self {
            x: x0.to_vec(),
            r: zeros(),
            u: zeros(),
            w: zeros(),
            m: zeros(),
            n: zeros(),
            z: zeros(),
            q: zeros(),
            s: zeros(),
            t: zeros(),
            p: zeros(),
        }
    }
}

/// Variant-specific lines of the pipelined iteration.
trait Recurrences {
    /// Shift entering `w_i` (and `delta`) in iteration `i`.
    fn sigma_prev(&self, i: usize) -> f64;
    /// Shift entering `s_i` and the residual update in iteration `i`.
    fn sigma(&self, i: usize) -> f64;

    /// `w_0` from `A u_0` (passed in `w`) and `r_0`.
    fn init_w(&self, w: &mut [f64], r: &[f64]);

    /// The scalar `delta` of iteration `i`.
    fn delta(&self, i: usize, st: &State) -> f64;

    /// `z_i, q_i, s_i, t_i, p_i`.
    fn directions(&self, i: usize, beta: f64, st: &mut State);

    /// `x_{i+1}, r_{i+1}, u_{i+1}, w_{i+1}`.
    fn advance(&self, i: usize, alpha: f64, st: &mut State);

    /// Hook run at the top of iteration `i`; returns true when the recursive
    /// vectors were replaced by explicitly computed ones.
    fn replace(&mut self, _i: usize, _st: &mut State, _ctx: &Context<'_>) -> bool {
        false
    }
}

struct Context<'a> {
    a: &'a SparseMatrix,
    m: &'a Preconditioner,
    b: &'a [f64],
}

fn run<R: Recurrences>(
    rec_kind: &mut R,
    a: &SparseMatrix,
    m: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
    obs: &mut dyn Observer,
) -> Result<SolveResult> {
    check_inputs(a, m, b, x0, cfg)?;
    let ctx = Context { a, m, b };
    let mut rec = Recorder::new(a, b, cfg);
    let mut st = State::new(x0);

    // r_0 := b - A x_0; u_0 := M^{-1} r_0; w_0 := A u_0 (- shift term)
    explicit_residual(a, b, &st.x, &mut st.r);
    m.apply_into(&st.r, &mut st.u);
    spmv_into(a, &st.u, &mut st.w);
    rec_kind.init_w(&mut st.w, &st.r);

    let mut gamma_prev = 0.0;
    let mut alpha_prev = 0.0;
    let mut replacements = Vec::new();
    let mut i = 0;
    let converged = loop {
        if rec_kind.replace(i, &mut st, &ctx) {
            replacements.push(i);
        }
        let gamma = dot_unchecked(&st.r, &st.u);
        let delta = rec_kind.delta(i, &st);
        let rnorm = norm2(&st.r);
        let sigma_exit = rec_kind.sigma_prev(i);

        if rec.converged(rnorm) {
            let sc = Scalars {
                alpha: None,
                beta: None,
                gamma: Some(gamma),
                delta: Some(delta),
                rnorm,
            };
            rec.record(i, Stage::Exit, sc, &exit_inputs(&st, sigma_exit));
            break true;
        }
        if !(gamma > 0.0) {
            return Err(breakdown(
                i,
                format!("gamma = (r, u) = {gamma} is not positive"),
            ));
        }
        let (alpha, beta) = if i > 0 {
            let beta = gamma / gamma_prev;
            let denom = delta / gamma - beta / alpha_prev;
            // Once the recursive residual has decoupled from the true one the
            // denominator may turn negative; only a vanishing one is fatal.
            if denom == 0.0 || !denom.is_finite() {
                return Err(breakdown(
                    i,
                    format!("step length denominator delta/gamma - beta/alpha = {denom}"),
                ));
            }
            (1.0 / denom, beta)
        } else {
            if !(delta > 0.0) || !delta.is_finite() {
                return Err(breakdown(i, format!("delta = {delta} is not positive")));
            }
            (gamma / delta, 0.0)
        };
        let sc = Scalars {
            alpha: Some(alpha),
            beta: Some(beta),
            gamma: Some(gamma),
            delta: Some(delta),
            rnorm,
        };
        if i == cfg.max_iters {
            rec.record(i, Stage::Exit, sc, &exit_inputs(&st, sigma_exit));
            break false;
        }

        // m_i := M^{-1} w_i; n_i := A m_i
        m.apply_into(&st.w, &mut st.m);
        spmv_into(a, &st.m, &mut st.n);
        rec_kind.directions(i, beta, &mut st);

        let (sigma_prev, sigma) = (rec_kind.sigma_prev(i), rec_kind.sigma(i));
        let inputs = GapInputs {
            x: &st.x,
            r: &st.r,
            u: Some(&st.u),
            w: Some(&st.w),
            p: Some(&st.p),
            s: Some(&st.s),
            t: Some(&st.t),
            q: Some(&st.q),
            z: Some(&st.z),
            sigma_prev,
            sigma,
        };
        let gaps = rec.record(i, Stage::Step, sc, &inputs);
        obs.observe(&IterationView {
            iter: i,
            alpha,
            beta,
            sigma_prev,
            sigma,
            x: &st.x,
            r: &st.r,
            u: &st.u,
            p: &st.p,
            s: &st.s,
            w: Some(&st.w),
            t: Some(&st.t),
            q: Some(&st.q),
            z: Some(&st.z),
            gaps: gaps.as_ref(),
        });

        rec_kind.advance(i, alpha, &mut st);
        gamma_prev = gamma;
        alpha_prev = alpha;
        i += 1;
    };
    Ok(rec.finish(st.x, converged, replacements))
}

/// At exit only `x, r, u, w` are current; the direction vectors belong to the
/// previous iteration.
fn exit_inputs(st: &State, sigma_prev: f64) -> GapInputs<'_> {
    GapInputs {
        u: Some(&st.u),
        w: Some(&st.w),
        sigma_prev,
        ..GapInputs::residual_only(&st.x, &st.r)
    }
}

/// `v := a + beta * v`
#[inline]
fn recur(v: &mut [f64], a: &[f64], beta: f64) {
    for (vk, ak) in v.iter_mut().zip(a) {
        *vk = ak + beta * *vk;
    }
}

/// Pipelined CG without shift.
struct Plain;

impl Recurrences for Plain {
    fn sigma_prev(&self, _: usize) -> f64 {
        0.0
    }

    fn sigma(&self, _: usize) -> f64 {
        0.0
    }

    fn init_w(&self, _w: &mut [f64], _r: &[f64]) {}

    fn delta(&self, _: usize, st: &State) -> f64 {
        dot_unchecked(&st.w, &st.u)
    }

    fn directions(&self, _: usize, beta: f64, st: &mut State) {
        recur(&mut st.z, &st.n, beta);
        recur(&mut st.q, &st.m, beta);
        recur(&mut st.s, &st.w, beta);
        recur(&mut st.t, &st.r, beta);
        recur(&mut st.p, &st.u, beta);
    }

    fn advance(&self, _: usize, alpha: f64, st: &mut State) {
        for (xk, pk) in st.x.iter_mut().zip(&st.p) {
            *xk += alpha * pk;
        }
        for (rk, sk) in st.r.iter_mut().zip(&st.s) {
            *rk -= alpha * sk;
        }
        for (uk, qk) in st.u.iter_mut().zip(&st.q) {
            *uk -= alpha * qk;
        }
        for (wk, zk) in st.w.iter_mut().zip(&st.z) {
            *wk -= alpha * zk;
        }
    }
}

/// Pipelined CG with constant shift `sigma`.
struct Shifted {
    sigma: f64,
}

impl Recurrences for Shifted {
    fn sigma_prev(&self, _: usize) -> f64 {
        self.sigma
    }

    fn sigma(&self, _: usize) -> f64 {
        self.sigma
    }

    fn init_w(&self, w: &mut [f64], r: &[f64]) {
        for (wk, rk) in w.iter_mut().zip(r) {
            *wk -= self.sigma * rk;
        }
    }

    fn delta(&self, _: usize, st: &State) -> f64 {
        shifted_delta(&st.w, &st.r, &st.u, self.sigma)
    }

    fn directions(&self, i: usize, beta: f64, st: &mut State) {
        Plain.directions(i, beta, st);
    }

    fn advance(&self, _: usize, alpha: f64, st: &mut State) {
        let alpha_sigma = alpha * self.sigma;
        for (xk, pk) in st.x.iter_mut().zip(&st.p) {
            *xk += alpha * pk;
        }
        three_term(&mut st.r, alpha, &st.s, alpha_sigma, &st.t);
        three_term(&mut st.u, alpha, &st.q, alpha_sigma, &st.p);
        for (wk, zk) in st.w.iter_mut().zip(&st.z) {
            *wk -= alpha * zk;
        }
    }
}

/// `(w + sigma r, u)`
#[inline]
fn shifted_delta(w: &[f64], r: &[f64], u: &[f64], sigma: f64) -> f64 {
    let mut acc = 0.0;
    for ((wk, rk), uk) in w.iter().zip(r).zip(u) {
        acc += (wk + sigma * rk) * uk;
    }
    acc
}

/// `v := v - (alpha a + alpha_sigma b)`, the two scaled terms summed first.
#[inline]
fn three_term(v: &mut [f64], alpha: f64, a: &[f64], alpha_sigma: f64, b: &[f64]) {
    for ((vk, ak), bk) in v.iter_mut().zip(a).zip(b) {
        *vk -= alpha * ak + alpha_sigma * bk;
    }
}

/// Pipelined CG with shifts `sigma_{-1}, sigma_0, ...`.
struct VariableShift<'a> {
    schedule: &'a [f64],
}

impl VariableShift<'_> {
    fn change(&self, i: usize) -> f64 {
        self.sigma(i) - self.sigma_prev(i)
    }
}

impl Recurrences for VariableShift<'_> {
    fn sigma_prev(&self, i: usize) -> f64 {
        self.schedule[i]
    }

    fn sigma(&self, i: usize) -> f64 {
        self.schedule[i + 1]
    }

    fn init_w(&self, w: &mut [f64], r: &[f64]) {
        let sigma = self.schedule[0];
        for (wk, rk) in w.iter_mut().zip(r) {
            *wk -= sigma * rk;
        }
    }

    fn delta(&self, i: usize, st: &State) -> f64 {
        shifted_delta(&st.w, &st.r, &st.u, self.sigma_prev(i))
    }

    fn directions(&self, i: usize, beta: f64, st: &mut State) {
        let dsig = self.change(i);
        let sigma = self.sigma(i);
        recur(&mut st.t, &st.r, beta);
        recur(&mut st.p, &st.u, beta);
        // s_i := w_i + beta s_{i-1} - (sigma_i - sigma_{i-1}) t_i
        for ((sk, wk), tk) in st.s.iter_mut().zip(&st.w).zip(&st.t) {
            *sk = (wk + beta * *sk) - dsig * tk;
        }
        for ((qk, mk), pk) in st.q.iter_mut().zip(&st.m).zip(&st.p) {
            *qk = (mk + beta * *qk) - dsig * pk;
        }
        for (((zk, nk), sk), tk) in st.z.iter_mut().zip(&st.n).zip(&st.s).zip(&st.t) {
            *zk = (nk + beta * *zk) - dsig * (sk + sigma * tk);
        }
    }

    fn advance(&self, i: usize, alpha: f64, st: &mut State) {
        let dsig = self.change(i);
        let alpha_sigma = alpha * self.sigma(i);
        for (xk, pk) in st.x.iter_mut().zip(&st.p) {
            *xk += alpha * pk;
        }
        // w_{i+1} needs r_i, so it is updated before the residual
        for ((wk, zk), rk) in st.w.iter_mut().zip(&st.z).zip(&st.r) {
            *wk = (*wk - alpha * zk) - dsig * rk;
        }
        three_term(&mut st.r, alpha, &st.s, alpha_sigma, &st.t);
        three_term(&mut st.u, alpha, &st.q, alpha_sigma, &st.p);
    }
}

/// Pipelined CG with residual replacement.
///
/// A running estimate of the residual gap grows by
/// `eps ((mu sqrt(n) + 1) ||A|| ||x_i|| + ||r_i||)` per iteration. The
/// recursive vectors are replaced by explicit ones when the test
/// `estimate <= tau ||r_i||` fails after having held in the previous iteration.
struct Replacing {
    tau: f64,
    /// `eps (mu sqrt(n) + 1) ||A||`
    growth: f64,
    estimate: f64,
    held: bool,
}

impl Replacing {
    fn new(a: &SparseMatrix, b: &[f64], x0: &[f64], tau: f64) -> Self {
        let growth =
            UNIT_ROUNDOFF * (a.mu() as f64 * (a.n() as f64).sqrt() + 1.0) * a.norm2_estimate(50);
        Self {
            tau,
            growth,
            estimate: growth * norm2(x0) + UNIT_ROUNDOFF * norm2(b),
            held: false,
        }
    }
}

impl Recurrences for Replacing {
    fn sigma_prev(&self, _: usize) -> f64 {
        0.0
    }

    fn sigma(&self, _: usize) -> f64 {
        0.0
    }

    fn init_w(&self, _w: &mut [f64], _r: &[f64]) {}

    fn delta(&self, i: usize, st: &State) -> f64 {
        Plain.delta(i, st)
    }

    fn directions(&self, i: usize, beta: f64, st: &mut State) {
        Plain.directions(i, beta, st);
    }

    fn advance(&self, i: usize, alpha: f64, st: &mut State) {
        Plain.advance(i, alpha, st);
    }

    fn replace(&mut self, i: usize, st: &mut State, ctx: &Context<'_>) -> bool {
        let rnorm = norm2(&st.r);
        let holds = self.estimate <= self.tau * rnorm;
        let trigger = i > 0 && self.held && !holds;
        if trigger {
            // r_i, u_i, w_i from x_i; s, q, z from the previous direction p_{i-1}
            explicit_residual(ctx.a, ctx.b, &st.x, &mut st.r);
            ctx.m.apply_into(&st.r, &mut st.u);
            spmv_into(ctx.a, &st.u, &mut st.w);
            spmv_into(ctx.a, &st.p, &mut st.s);
            ctx.m.apply_into(&st.s, &mut st.q);
            spmv_into(ctx.a, &st.q, &mut st.z);
            self.estimate = self.growth * norm2(&st.x) + UNIT_ROUNDOFF * norm2(&st.r);
            self.held = false;
        } else {
            self.held = holds;
            self.estimate += self.growth * norm2(&st.x) + UNIT_ROUNDOFF * rnorm;
        }
        trigger
    }
}

/// Pipelined preconditioned CG.
pub fn solve_pcg(
    a: &SparseMatrix,
    m: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    solve_pcg_observed(a, m, b, x0, cfg, &mut NoObserver)
}

pub fn solve_pcg_observed(
    a: &SparseMatrix,
    m: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
    obs: &mut dyn Observer,
) -> Result<SolveResult> {
    run(&mut Plain, a, m, b, x0, cfg, obs)
}

/// Shifted pipelined CG with constant shift `cfg.shift`. With a zero shift it
/// produces exactly the iterates of [`solve_pcg`].
pub fn solve_pcg_shifted(
    a: &SparseMatrix,
    m: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    solve_pcg_shifted_observed(a, m, b, x0, cfg, &mut NoObserver)
}

pub fn solve_pcg_shifted_observed(
    a: &SparseMatrix,
    m: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
    obs: &mut dyn Observer,
) -> Result<SolveResult> {
    run(&mut Shifted { sigma: cfg.shift }, a, m, b, x0, cfg, obs)
}

/// Pipelined CG with the iteration-dependent shifts in `cfg.shift_schedule`
/// (`sigma_{-1}` first).
pub fn solve_pcg_var_shifted(
    a: &SparseMatrix,
    m: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    solve_pcg_var_shifted_observed(a, m, b, x0, cfg, &mut NoObserver)
}

pub fn solve_pcg_var_shifted_observed(
    a: &SparseMatrix,
    m: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
    obs: &mut dyn Observer,
) -> Result<SolveResult> {
    let mut schedule_cfg = cfg.clone();
    schedule_cfg.method = super::Method::PcgVarSh;
    schedule_cfg.validate()?;
    let mut rec = VariableShift {
        schedule: &cfg.shift_schedule,
    };
    run(&mut rec, a, m, b, x0, cfg, obs)
}

/// Pipelined CG with automated residual replacement (threshold `cfg.rr_threshold`).
pub fn solve_pcg_rr(
    a: &SparseMatrix,
    m: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    solve_pcg_rr_observed(a, m, b, x0, cfg, &mut NoObserver)
}

pub fn solve_pcg_rr_observed(
    a: &SparseMatrix,
    m: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &SolverConfig,
    obs: &mut dyn Observer,
) -> Result<SolveResult> {
    check_inputs(a, m, b, x0, cfg)?;
    let mut rec = Replacing::new(a, b, x0, cfg.rr_threshold);
    run(&mut rec, a, m, b, x0, cfg, obs)
}
