//! Outer augmented Lagrangian loop: bounded initialization, inexact inner
//! solves with a shrinking stationarity target, clipped multiplier updates,
//! and adaptive penalty growth.

use num_complex::Complex;
use rand::Rng;

use crate::bsum::{alf_value, epsilon_bound, solve_subproblem_opts, DesignState, InnerOptions};
use crate::config::ProblemConfig;
use crate::error::Result;
use crate::feasibility::{find_feasible, max_sidelobe, FeasiblePoint};
use crate::model::{ProblemData, ShiftMatrixSet};
use crate::CMat;

/// Multipliers and the scalars tracked across outer iterations.
#[derive(Debug, Clone)]
pub struct DualState {
    /// U_k in the listed offset order, entrywise magnitude at most u_max.
    pub u: Vec<CMat>,
    pub rho: f64,
    /// Constraint violation sqrt(sum_k ||X J_k F^H - C_k||_F^2).
    pub v: f64,
    /// Stationarity bound of the last inner solve.
    pub e: f64,
    /// Uniform ALF upper bound used by the inner-start policy.
    pub zeta: f64,
}

/// Per-iteration traces of one run.
#[derive(Debug, Clone)]
pub struct OuterReport {
    pub outer_iters: usize,
    pub v_trace: Vec<f64>,
    pub e_trace: Vec<f64>,
    pub rho_trace: Vec<f64>,
    pub alf_trace: Vec<f64>,
    pub rate_trace: Vec<f64>,
    pub bpmse_trace: Vec<f64>,
    pub maxsl_trace: Vec<f64>,
    /// Sweeps used by each inner solve.
    pub inner_iters: Vec<usize>,
    /// Per-block ALF trace of each inner solve.
    pub inner_alf_traces: Vec<Vec<f64>>,
    pub converged: bool,
    pub final_state: DesignState,
}

impl OuterReport {
    /// Fraction of inner solves that finished within `sweeps` sweeps.
    pub fn inner_within(&self, sweeps: usize) -> f64 {
        if self.inner_iters.is_empty() {
            return 1.0;
        }
        self.inner_iters.iter().filter(|&&n| n <= sweeps).count() as f64
            / self.inner_iters.len() as f64
    }
}

/// Uniform ALF bound: max of the feasible objective and the ALF at the
/// initial point.
pub fn compute_zeta(
    feas: &FeasiblePoint,
    z0: &DesignState,
    u0: &[CMat],
    rho0: f64,
    alpha: f64,
    data: &ProblemData,
) -> Result<f64> {
    let alf0 = alf_value(z0, u0, rho0, alpha, data)?;
    Ok(feas.objective.max(alf0))
}

/// Inner-start policy: restart from the feasible point whenever its plain
/// objective beats the ALF of the previous iterate; ties keep the previous
/// iterate.
pub fn pick_inner_start(
    feas: &FeasiblePoint,
    z_prev: &DesignState,
    u: &[CMat],
    rho: f64,
    alpha: f64,
    data: &ProblemData,
) -> Result<DesignState> {
    let alf_prev = alf_value(z_prev, u, rho, alpha, data)?;
    if feas.objective < alf_prev {
        Ok(DesignState::from_feasible(feas))
    } else {
        Ok(z_prev.clone())
    }
}

/// Multiplier step with entrywise magnitude clipping at u_max.
pub fn update_multipliers(
    u: &[CMat],
    z: &DesignState,
    rho: f64,
    u_max: f64,
    shifts: &ShiftMatrixSet,
) -> Vec<CMat> {
    shifts
        .k_indices()
        .enumerate()
        .map(|(i, k)| {
            let r = shifts.sidelobe_matrix(&z.x, &z.f, k) - &z.c[i];
            let tilde = &u[i] + r * Complex::new(rho, 0.0);
            tilde.map(|e| {
                let m = e.norm();
                if m > u_max {
                    e * (u_max / m)
                } else {
                    e
                }
            })
        })
        .collect()
}

/// Constraint violation sqrt(sum_k ||X J_k F^H - C_k||_F^2).
pub fn violation(z: &DesignState, shifts: &ShiftMatrixSet) -> f64 {
    shifts
        .k_indices()
        .enumerate()
        .map(|(i, k)| (shifts.sidelobe_matrix(&z.x, &z.f, k) - &z.c[i]).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Adaptive penalty: grow by gamma only when the violation failed to drop by
/// the factor delta.
pub fn update_penalty(rho: f64, v_new: f64, v_prev: f64, delta: f64, gamma: f64) -> f64 {
    if v_new > delta * v_prev {
        gamma * rho
    } else {
        rho
    }
}

/// Run options beyond the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub squarem: bool,
}

pub fn run<R: Rng>(cfg: &ProblemConfig, data: &ProblemData, rng: &mut R) -> Result<(DesignState, OuterReport)> {
    run_with_options(cfg, data, rng, RunOptions::default())
}

/// Feasibility search rounds before giving up.
const FEASIBILITY_ROUNDS: usize = 30;

pub fn run_with_options<R: Rng>(
    cfg: &ProblemConfig,
    data: &ProblemData,
    rng: &mut R,
    opts: RunOptions,
) -> Result<(DesignState, OuterReport)> {
    cfg.validate()?;
    let feas = find_feasible(cfg, data, rng, FEASIBILITY_ROUNDS)?;
    run_from_feasible(cfg, data, &feas, opts)
}

/// Runs the outer loop from an explicit feasible point (lets campaigns share
/// one predetermined point across simulations).
pub fn run_from_feasible(
    cfg: &ProblemConfig,
    data: &ProblemData,
    feas: &FeasiblePoint,
    opts: RunOptions,
) -> Result<(DesignState, OuterReport)> {
    cfg.validate()?;
    let shifts = &data.shifts;
    let inner_opts = InnerOptions { squarem: opts.squarem };
    let stop_tol = cfg.stop_tol();

    let mut z = DesignState::from_feasible(feas);
    let mut u: Vec<CMat> = (0..cfg.n_bins())
        .map(|_| CMat::zeros(cfg.n_tx, cfg.n_rx))
        .collect();
    let mut rho = cfg.rho0;
    let zeta = compute_zeta(feas, &z, &u, rho, cfg.alpha, data)?;

    // Reference stationarity scale: the bound between the initial point and
    // its first sweep drives the target schedule e0 / l.
    let e0 = {
        let probe_cfg = ProblemConfig { max_inner: 1, ..cfg.clone() };
        let (z1, _) = solve_subproblem_opts(&z, &u, rho, f64::INFINITY, &probe_cfg, data, inner_opts)?;
        epsilon_bound(&z, &z1, rho, cfg, data).max(f64::MIN_POSITIVE)
    };

    let mut report = OuterReport {
        outer_iters: 0,
        v_trace: Vec::new(),
        e_trace: Vec::new(),
        rho_trace: Vec::new(),
        alf_trace: Vec::new(),
        rate_trace: Vec::new(),
        bpmse_trace: Vec::new(),
        maxsl_trace: Vec::new(),
        inner_iters: Vec::new(),
        inner_alf_traces: Vec::new(),
        converged: false,
        final_state: z.clone(),
    };

    let mut v_prev = violation(&z, shifts);
    for outer in 1..=cfg.max_outer.max(1) {
        let eps = e0 / outer as f64;
        let start = pick_inner_start(feas, &z, &u, rho, cfg.alpha, data)?;
        let (z_new, inner) = solve_subproblem_opts(&start, &u, rho, eps, cfg, data, inner_opts)?;
        z = z_new;
        let v = violation(&z, shifts);
        let e = inner.final_e_bound();

        report.outer_iters = outer;
        report.v_trace.push(v);
        report.e_trace.push(e);
        report.rho_trace.push(rho);
        report.alf_trace.push(inner.final_alf());
        report.rate_trace.push(crate::eval::sum_rate(&z.x, data, cfg.sigma_n2));
        report
            .bpmse_trace
            .push(crate::eval::beampattern_mse(&z.x, &z.f, &data.r_d));
        report.maxsl_trace.push(max_sidelobe(&z.x, &z.f, shifts));
        report.inner_iters.push(inner.iters);
        report.inner_alf_traces.push(inner.alf_trace.clone());
        debug_assert!(inner.final_alf() <= zeta + 1e-6 * zeta.abs().max(1.0));

        u = update_multipliers(&u, &z, rho, cfg.u_max, shifts);
        rho = update_penalty(rho, v, v_prev, cfg.delta, cfg.gamma);
        v_prev = v;

        if e.max(v) <= stop_tol {
            report.converged = true;
            break;
        }
    }
    report.final_state = z.clone();
    Ok((z, report))
}
