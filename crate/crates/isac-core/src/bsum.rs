//! Block successive upper-bound minimization for the penalized subproblem:
//! cyclic closed-form updates of the auxiliary sidelobe matrices C_k, the
//! receive filter F, and the unimodular waveform X, with a computable
//! stationarity bound per sweep.

use num_complex::Complex;

use crate::config::ProblemConfig;
use crate::error::{invalid, Error, Result};
use crate::feasibility::FeasiblePoint;
use crate::linalg::{induced_one_norm, stack_rows, unit_phase, unstack_rows};
use crate::model::{ProblemData, ShiftMatrixSet};
use crate::CMat;

/// One point of the lifted design space (C, F, X).
#[derive(Debug, Clone)]
pub struct DesignState {
    /// Auxiliary matrices C_k in the listed offset order, each inside the
    /// Frobenius ball of radius xi.
    pub c: Vec<CMat>,
    /// Receive filter, ||F||_F^2 = P_F.
    pub f: CMat,
    /// Transmit waveform, entrywise modulus P_x.
    pub x: CMat,
}

impl DesignState {
    pub fn from_feasible(feas: &FeasiblePoint) -> Self {
        Self { c: feas.c.clone(), f: feas.f.clone(), x: feas.x.clone() }
    }

    /// Largest violation of the three constraint sets (ball overshoot, power
    /// mismatch, modulus mismatch); diagnostics for tests and reports.
    pub fn set_violation(&self, xi: f64, p_f: f64, p_x: f64) -> f64 {
        let c_over = self
            .c
            .iter()
            .map(|ck| (ck.norm() - xi).max(0.0))
            .fold(0.0, f64::max);
        let f_off = (self.f.norm_squared() - p_f).abs();
        let x_off = self
            .x
            .iter()
            .map(|e| (e.norm() - p_x).abs())
            .fold(0.0, f64::max);
        c_over.max(f_off).max(x_off)
    }
}

/// Trace of one inner solve.
#[derive(Debug, Clone)]
pub struct InnerReport {
    /// Completed sweeps.
    pub iters: usize,
    /// ALF after the initial point and after every block update
    /// (|Omega_K| + 2 entries per sweep).
    pub alf_trace: Vec<f64>,
    /// Stationarity bound after each sweep.
    pub e_bound_trace: Vec<f64>,
    pub hit_max_inner: bool,
}

impl InnerReport {
    pub fn final_alf(&self) -> f64 {
        *self.alf_trace.last().expect("nonempty trace")
    }

    pub fn final_e_bound(&self) -> f64 {
        self.e_bound_trace.last().copied().unwrap_or(0.0)
    }
}

fn re_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn check_shapes(z: &DesignState, u: &[CMat], data: &ProblemData) -> Result<()> {
    let (n_tx, n_rx, t) = (data.n_tx(), data.n_rx(), data.block_len());
    if z.x.shape() != (n_tx, t) || z.f.shape() != (n_rx, t) {
        return Err(invalid("waveform or filter shape mismatch"));
    }
    if z.c.len() != data.shifts.n_bins() || u.len() != z.c.len() {
        return Err(invalid("auxiliary/multiplier count mismatch"));
    }
    for m in z.c.iter().chain(u.iter()) {
        if m.shape() != (n_tx, n_rx) {
            return Err(invalid("auxiliary matrix shape mismatch"));
        }
    }
    Ok(())
}

/// Penalty-plus-multiplier term of one offset: (rho/2)||S_k - C_k||_F^2
/// + Re tr(U_k^H (S_k - C_k)), with S_k = X J_k F^H.
fn penalty_term(s_k: &CMat, c_k: &CMat, u_k: &CMat, rho: f64) -> f64 {
    let r = s_k - c_k;
    0.5 * rho * r.norm_squared() + re_inner(u_k, &r)
}

/// Augmented Lagrangian value at z for multipliers U and penalty rho.
pub fn alf_value(z: &DesignState, u: &[CMat], rho: f64, alpha: f64, data: &ProblemData) -> Result<f64> {
    check_shapes(z, u, data)?;
    let mut total = crate::eval::design_objective(&z.f, &z.x, alpha, data);
    for (i, k) in data.shifts.k_indices().enumerate() {
        let s_k = data.shifts.sidelobe_matrix(&z.x, &z.f, k);
        total += penalty_term(&s_k, &z.c[i], &u[i], rho);
    }
    Ok(total)
}

/// Projection of `m` onto the Frobenius ball of radius `xi`.
fn project_ball(m: CMat, xi: f64) -> CMat {
    let n = m.norm();
    if n <= xi {
        m
    } else {
        m * Complex::new(xi / n, 0.0)
    }
}

/// Closed-form proximal update of one auxiliary block:
/// C~ = (rho X J_k F^H + U_k + beta C_k) / (rho + beta), projected onto the
/// xi-ball.
pub fn update_c(
    z: &DesignState,
    u_k: &CMat,
    rho: f64,
    beta: f64,
    xi: f64,
    k: i64,
    shifts: &ShiftMatrixSet,
) -> CMat {
    let s_k = shifts.sidelobe_matrix(&z.x, &z.f, k);
    update_c_cached(&s_k, c_of(z, k, shifts), u_k, rho, beta, xi)
}

fn c_of<'a>(z: &'a DesignState, k: i64, shifts: &ShiftMatrixSet) -> &'a CMat {
    let idx = shifts
        .k_indices()
        .position(|kk| kk == k)
        .expect("offset in range");
    &z.c[idx]
}

fn update_c_cached(s_k: &CMat, c_k: &CMat, u_k: &CMat, rho: f64, beta: f64, xi: f64) -> CMat {
    let tilde = (s_k * Complex::new(rho, 0.0) + u_k + c_k * Complex::new(beta, 0.0))
        / Complex::new(rho + beta, 0.0);
    project_ball(tilde, xi)
}

/// Q = alpha X^H X + sum_k (rho/2) J_k^H X^H X J_k.
fn build_q(x: &CMat, rho: f64, alpha: f64, shifts: &ShiftMatrixSet) -> CMat {
    let mut q = (x.adjoint() * x) * Complex::new(alpha, 0.0);
    for k in shifts.k_indices() {
        let xj = shifts.shift_cols(x, k);
        q += (xj.adjoint() * xj) * Complex::new(0.5 * rho, 0.0);
    }
    q
}

/// P = alpha F^H F + sum_k (rho/2) J_k F^H F J_k^H.
fn build_p(f: &CMat, rho: f64, alpha: f64, shifts: &ShiftMatrixSet) -> CMat {
    let mut p = (f.adjoint() * f) * Complex::new(alpha, 0.0);
    for k in shifts.k_indices() {
        // J_k F^H F J_k^H = (F J_{-k})^H (F J_{-k}).
        let fj = shifts.shift_cols(f, -k);
        p += (fj.adjoint() * fj) * Complex::new(0.5 * rho, 0.0);
    }
    p
}

/// Strict majorizer constant for the F block: ||Q||_1 with a relative
/// margin.
pub fn lambda_q(x: &CMat, rho: f64, alpha: f64, shifts: &ShiftMatrixSet) -> f64 {
    induced_one_norm(&build_q(x, rho, alpha, shifts)) * (1.0 + 1e-6)
}

/// Strict majorizer constant for the X block.
pub fn lambda_p(f: &CMat, rho: f64, alpha: f64, shifts: &ShiftMatrixSet) -> f64 {
    induced_one_norm(&build_p(f, rho, alpha, shifts)) * (1.0 + 1e-6)
}

/// B_F = alpha R_d^H X + sum_k (1/2)(rho C_k - U_k)^H X J_k, the linear part
/// of the F block.
fn linear_f(z: &DesignState, u: &[CMat], rho: f64, alpha: f64, data: &ProblemData) -> CMat {
    let mut b = (data.r_d.adjoint() * &z.x) * Complex::new(alpha, 0.0);
    for (i, k) in data.shifts.k_indices().enumerate() {
        let w = (&z.c[i] * Complex::new(rho, 0.0) - &u[i]).adjoint();
        b += (w * data.shifts.shift_cols(&z.x, k)) * Complex::new(0.5, 0.0);
    }
    b
}

/// Wirtinger conjugate gradient of the ALF with respect to F.
pub fn grad_f(z: &DesignState, u: &[CMat], rho: f64, alpha: f64, data: &ProblemData) -> CMat {
    let q = build_q(&z.x, rho, alpha, &data.shifts);
    &z.f * q - linear_f(z, u, rho, alpha, data)
}

/// Closed-form majorized update of the filter onto the power sphere.
pub fn update_f(z: &DesignState, u: &[CMat], rho: f64, alpha: f64, p_f: f64, data: &ProblemData) -> Result<CMat> {
    let q = build_q(&z.x, rho, alpha, &data.shifts);
    let lam = induced_one_norm(&q) * (1.0 + 1e-6);
    let t = q.nrows();
    let xi_mat = linear_f(z, u, rho, alpha, data)
        - &z.f * (q - CMat::identity(t, t) * Complex::new(lam, 0.0));
    let norm = xi_mat.norm();
    if norm == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    Ok(xi_mat * Complex::new(p_f.sqrt() / norm, 0.0))
}

/// B_X = alpha R_d F + sum_k (1/2)(rho C_k - U_k) F J_k^H, the linear part of
/// the X block.
fn linear_x(z: &DesignState, u: &[CMat], rho: f64, alpha: f64, data: &ProblemData) -> CMat {
    let mut b = (&data.r_d * &z.f) * Complex::new(alpha, 0.0);
    for (i, k) in data.shifts.k_indices().enumerate() {
        let w = &z.c[i] * Complex::new(rho, 0.0) - &u[i];
        // (W F) J_k^H = shift by -k.
        b += data.shifts.shift_cols(&(w * &z.f), -k) * Complex::new(0.5, 0.0);
    }
    b
}

/// Wirtinger conjugate gradient of the ALF with respect to X.
pub fn grad_x(z: &DesignState, u: &[CMat], rho: f64, alpha: f64, data: &ProblemData) -> CMat {
    let p = build_p(&z.f, rho, alpha, &data.shifts);
    let xv = stack_rows(&z.x);
    let comm = unstack_rows(&(&data.hh * &xv - &data.hs), z.x.nrows(), z.x.ncols());
    &z.x * p - linear_x(z, u, rho, alpha, data) + comm * Complex::new(1.0 - alpha, 0.0)
}

/// Closed-form majorized update of the unimodular waveform.
pub fn update_x(z: &DesignState, u: &[CMat], rho: f64, alpha: f64, p_x: f64, data: &ProblemData) -> CMat {
    let shifts = &data.shifts;
    let p = build_p(&z.f, rho, alpha, shifts);
    let lam_p = induced_one_norm(&p) * (1.0 + 1e-6);
    let (n_tx, t) = z.x.shape();
    let xv = stack_rows(&z.x);
    // Phi^(t) holds (H^H H - lambda_h I) x - H^H s in matrix layout.
    let phi = unstack_rows(
        &(&data.hh * &xv - &xv * Complex::new(data.lambda_h, 0.0) - &data.hs),
        n_tx,
        t,
    );
    let psi = linear_x(z, u, rho, alpha, data)
        - phi * Complex::new(1.0 - alpha, 0.0)
        - &z.x * (p - CMat::identity(t, t) * Complex::new(lam_p, 0.0));
    unit_phase(&psi, p_x)
}

/// Lemma-style stationarity bound between consecutive iterates:
/// L_F||dF|| + L_X||dX|| + [ (rho/2) sqrt(T) |Omega_K| (sqrt(P_F)||dX|| +
/// sqrt(P_X)||dF||) + beta sum_k ||dC_k|| ].
pub fn epsilon_bound(
    z_prev: &DesignState,
    z_new: &DesignState,
    rho: f64,
    cfg: &ProblemConfig,
    data: &ProblemData,
) -> f64 {
    epsilon_bound_cached(z_prev, z_new, rho, cfg, data.hh.norm())
}

fn epsilon_bound_cached(
    z_prev: &DesignState,
    z_new: &DesignState,
    rho: f64,
    cfg: &ProblemConfig,
    hh_norm: f64,
) -> f64 {
    let df = (&z_new.f - &z_prev.f).norm();
    let dx = (&z_new.x - &z_prev.x).norm();
    let dc: f64 = z_new
        .c
        .iter()
        .zip(z_prev.c.iter())
        .map(|(a, b)| (a - b).norm())
        .sum();
    let sqrt_px = cfg.total_tx_power().sqrt();
    let sqrt_pf = cfg.p_f.sqrt();
    let sqrt_t = (cfg.block_len as f64).sqrt();
    let omega = cfg.n_bins() as f64;
    let l_f = 2.0 * sqrt_px * (cfg.alpha + 0.5 * rho * sqrt_t * omega);
    let l_x = 2.0 * (sqrt_pf * (cfg.alpha + 0.5 * rho * sqrt_t * omega) + (1.0 - cfg.alpha) * hh_norm);
    let j_c = 0.5 * rho * sqrt_t * omega * (sqrt_pf * dx + sqrt_px * df) + cfg.beta * dc;
    l_f * df + l_x * dx + j_c
}

/// Norm of the explicitly constructed ALF-plus-indicator subgradient at
/// `z_new` for consecutive BSUM iterates (z_prev, z_new): sum of the F, X,
/// and C block contributions. Diagnostic companion of [`epsilon_bound`].
pub fn constructed_subgradient_norm(
    z_prev: &DesignState,
    z_new: &DesignState,
    u: &[CMat],
    rho: f64,
    alpha: f64,
    beta: f64,
    data: &ProblemData,
) -> f64 {
    let _ = u;
    let shifts = &data.shifts;
    // F block: gradients taken in the C^{new}, X^{prev} context; the linear
    // parts cancel, leaving dF (Q - lambda_q I).
    let q = build_q(&z_prev.x, rho, alpha, shifts);
    let lam_q = induced_one_norm(&q) * (1.0 + 1e-6);
    let df = &z_new.f - &z_prev.f;
    let t = q.nrows();
    let j_f = (&df * (&q - CMat::identity(t, t) * Complex::new(lam_q, 0.0))).norm();
    // X block: context C^{new}, F^{new}.
    let p = build_p(&z_new.f, rho, alpha, shifts);
    let lam_p = induced_one_norm(&p) * (1.0 + 1e-6);
    let dx = &z_new.x - &z_prev.x;
    let dxv = stack_rows(&dx);
    let comm = unstack_rows(
        &(&data.hh * &dxv - &dxv * Complex::new(data.lambda_h, 0.0)),
        dx.nrows(),
        dx.ncols(),
    );
    let j_x = (&dx * (&p - CMat::identity(t, t) * Complex::new(lam_p, 0.0))
        + comm * Complex::new(1.0 - alpha, 0.0))
    .norm();
    // C blocks: stale sidelobe matrices from the update context plus the
    // proximal residual.
    let mut j_c = 0.0;
    for (i, k) in shifts.k_indices().enumerate() {
        let s_old = shifts.sidelobe_matrix(&z_prev.x, &z_prev.f, k);
        let s_new = shifts.sidelobe_matrix(&z_new.x, &z_new.f, k);
        let dck = &z_new.c[i] - &z_prev.c[i];
        j_c += ((s_old - s_new) * Complex::new(0.5 * rho, 0.0) - dck * Complex::new(beta, 0.0)).norm();
    }
    j_f + j_x + j_c
}

/// Options for the inner solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct InnerOptions {
    /// Extrapolation acceleration of the F and per-row X fixed-point maps;
    /// falls back to the plain step whenever the extrapolated ALF is worse.
    pub squarem: bool,
}

/// Solves the penalized subproblem inexactly from `z0`, sweeping
/// C -> F -> X until the stationarity bound drops below `eps_target` or the
/// sweep cap is reached.
pub fn solve_subproblem(
    z0: &DesignState,
    u: &[CMat],
    rho: f64,
    eps_target: f64,
    cfg: &ProblemConfig,
    data: &ProblemData,
) -> Result<(DesignState, InnerReport)> {
    solve_subproblem_opts(z0, u, rho, eps_target, cfg, data, InnerOptions::default())
}

pub fn solve_subproblem_opts(
    z0: &DesignState,
    u: &[CMat],
    rho: f64,
    eps_target: f64,
    cfg: &ProblemConfig,
    data: &ProblemData,
    opts: InnerOptions,
) -> Result<(DesignState, InnerReport)> {
    check_shapes(z0, u, data)?;
    let shifts = &data.shifts;
    let xi = cfg.psl_threshold();
    let hh_norm = data.hh.norm();
    let mut z = z0.clone();

    // Running ALF decomposition: objective part plus per-offset penalty
    // terms, so each block update only refreshes what it touched.
    let mut sls: Vec<CMat> = shifts
        .k_indices()
        .map(|k| shifts.sidelobe_matrix(&z.x, &z.f, k))
        .collect();
    let mut obj = crate::eval::design_objective(&z.f, &z.x, cfg.alpha, data);
    let mut pens: Vec<f64> = sls
        .iter()
        .zip(z.c.iter().zip(u.iter()))
        .map(|(s, (c, uk))| penalty_term(s, c, uk, rho))
        .collect();
    let alf_of = |obj: f64, pens: &[f64]| obj + pens.iter().sum::<f64>();

    let mut alf_trace = vec![alf_of(obj, &pens)];
    let mut e_bound_trace = Vec::new();
    let mut iters = 0;
    let mut hit_max_inner = true;

    for _sweep in 0..cfg.max_inner.max(1) {
        let z_prev = z.clone();
        // C blocks.
        for i in 0..z.c.len() {
            z.c[i] = update_c_cached(&sls[i], &z.c[i], &u[i], rho, cfg.beta, xi);
            pens[i] = penalty_term(&sls[i], &z.c[i], &u[i], rho);
            alf_trace.push(alf_of(obj, &pens));
        }
        // F block.
        let f_new = next_f(&z, u, rho, cfg, data, opts)?;
        if let Some(f_new) = f_new {
            z.f = f_new;
            for (i, k) in shifts.k_indices().enumerate() {
                sls[i] = shifts.sidelobe_matrix(&z.x, &z.f, k);
                pens[i] = penalty_term(&sls[i], &z.c[i], &u[i], rho);
            }
            obj = crate::eval::design_objective(&z.f, &z.x, cfg.alpha, data);
        }
        alf_trace.push(alf_of(obj, &pens));
        // X block.
        z.x = next_x(&z, u, rho, cfg, data, opts);
        for (i, k) in shifts.k_indices().enumerate() {
            sls[i] = shifts.sidelobe_matrix(&z.x, &z.f, k);
            pens[i] = penalty_term(&sls[i], &z.c[i], &u[i], rho);
        }
        obj = crate::eval::design_objective(&z.f, &z.x, cfg.alpha, data);
        alf_trace.push(alf_of(obj, &pens));

        iters += 1;
        let e = epsilon_bound_cached(&z_prev, &z, rho, cfg, hh_norm);
        e_bound_trace.push(e);
        if e <= eps_target {
            hit_max_inner = false;
            break;
        }
    }
    Ok((z, InnerReport { iters, alf_trace, e_bound_trace, hit_max_inner }))
}

/// One F step, optionally extrapolated. Returns None when the direction is
/// degenerate (filter kept as is).
fn next_f(
    z: &DesignState,
    u: &[CMat],
    rho: f64,
    cfg: &ProblemConfig,
    data: &ProblemData,
    opts: InnerOptions,
) -> Result<Option<CMat>> {
    let f1 = match update_f(z, u, rho, cfg.alpha, cfg.p_f, data) {
        Ok(f) => f,
        Err(Error::DegenerateDirection) => return Ok(None),
        Err(e) => return Err(e),
    };
    if !opts.squarem {
        return Ok(Some(f1));
    }
    let mut z1 = z.clone();
    z1.f = f1.clone();
    let f2 = match update_f(&z1, u, rho, cfg.alpha, cfg.p_f, data) {
        Ok(f) => f,
        Err(Error::DegenerateDirection) => return Ok(Some(f1)),
        Err(e) => return Err(e),
    };
    let r = &f1 - &z.f;
    let v = &f2 - &f1 - &r;
    let vv = v.norm_squared();
    if vv < 1e-30 {
        return Ok(Some(f2));
    }
    // Minimal-residual step length.
    let a = -re_inner(&r, &v) / vv;
    let extrap = &z.f - &r * Complex::new(2.0 * a, 0.0) + &v * Complex::new(a * a, 0.0);
    let norm = extrap.norm();
    if norm == 0.0 {
        return Ok(Some(f2));
    }
    let cand = extrap * Complex::new(cfg.p_f.sqrt() / norm, 0.0);
    let mut zc = z.clone();
    zc.f = cand.clone();
    let mut z2 = z.clone();
    z2.f = f2.clone();
    let alf_cand = alf_value(&zc, u, rho, cfg.alpha, data)?;
    let alf_plain = alf_value(&z2, u, rho, cfg.alpha, data)?;
    Ok(Some(if alf_cand <= alf_plain { cand } else { f2 }))
}

/// One X step, optionally extrapolated row by row.
fn next_x(
    z: &DesignState,
    u: &[CMat],
    rho: f64,
    cfg: &ProblemConfig,
    data: &ProblemData,
    opts: InnerOptions,
) -> CMat {
    let x1 = update_x(z, u, rho, cfg.alpha, cfg.p_x, data);
    if !opts.squarem {
        return x1;
    }
    let mut z1 = z.clone();
    z1.x = x1.clone();
    let x2 = update_x(&z1, u, rho, cfg.alpha, cfg.p_x, data);
    let mut cand = x2.clone();
    for i in 0..z.x.nrows() {
        let r = x1.row(i) - z.x.row(i);
        let v = x2.row(i) - x1.row(i) - r.clone();
        let vv = v.norm_squared();
        if vv < 1e-30 {
            continue;
        }
        let rv: f64 = r.iter().zip(v.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        let a = -rv / vv;
        let row = z.x.row(i) - r * Complex::new(2.0 * a, 0.0) + v * Complex::new(a * a, 0.0);
        for j in 0..row.ncols() {
            let e = row[j];
            let m = e.norm();
            cand[(i, j)] = if m == 0.0 { Complex::new(cfg.p_x, 0.0) } else { e * (cfg.p_x / m) };
        }
    }
    let mut zc = z.clone();
    zc.x = cand.clone();
    let mut z2 = z.clone();
    z2.x = x2.clone();
    let alf_cand = alf_value(&zc, u, rho, cfg.alpha, data).unwrap_or(f64::INFINITY);
    let alf_plain = alf_value(&z2, u, rho, cfg.alpha, data).unwrap_or(f64::INFINITY);
    if alf_cand <= alf_plain {
        cand
    } else {
        x2
    }
}
