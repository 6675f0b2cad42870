//! Feasible-point construction: alternates majorize-minimize sweeps on the
//! waveform with an eigendecomposition step on the filter until every
//! range-bin sidelobe ||X J_k F^H||_F falls below the threshold xi.

use num_complex::Complex;
use rand::Rng;

use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen_desc, induced_one_norm, random_on_sphere, random_unimodular, unit_phase};
use crate::model::{ProblemData, ShiftMatrixSet};
use crate::CMat;

/// A feasible point of the constrained design problem, together with the
/// objective value it attains on the given data.
#[derive(Debug, Clone)]
pub struct FeasiblePoint {
    pub x: CMat,
    pub f: CMat,
    /// C_k = X J_k F^H in the listed offset order.
    pub c: Vec<CMat>,
    /// f(F, X) on the data used to construct the point.
    pub objective: f64,
}

impl FeasiblePoint {
    /// Recomputes the objective on different data (the feasibility of
    /// (X, F) does not depend on the channel or symbols).
    pub fn reevaluate(&self, alpha: f64, data: &ProblemData) -> FeasiblePoint {
        FeasiblePoint {
            objective: crate::eval::design_objective(&self.f, &self.x, alpha, data),
            ..self.clone()
        }
    }
}

/// Integrated sidelobe level sum_k ||X J_k F^H||_F^2.
pub fn isl(x: &CMat, f: &CMat, shifts: &ShiftMatrixSet) -> f64 {
    shifts
        .k_indices()
        .map(|k| shifts.sidelobe_matrix(x, f, k).norm_squared())
        .sum()
}

/// Largest per-bin sidelobe max_k ||X J_k F^H||_F.
pub fn max_sidelobe(x: &CMat, f: &CMat, shifts: &ShiftMatrixSet) -> f64 {
    shifts
        .k_indices()
        .map(|k| shifts.sidelobe_matrix(x, f, k).norm())
        .fold(0.0, f64::max)
}

/// Theta = sum_k J_k F^H F J_k^T.
fn isl_quadratic_x(f: &CMat, shifts: &ShiftMatrixSet) -> CMat {
    let t = shifts.block_len();
    let mut theta = CMat::zeros(t, t);
    for k in shifts.k_indices() {
        // J_k F^H F J_k^T = (F J_{-k})^H (F J_{-k}).
        let fj = shifts.shift_cols(f, -k);
        theta += fj.adjoint() * fj;
    }
    theta
}

/// Phi = sum_k J_k^T X^H X J_k.
fn isl_quadratic_f(x: &CMat, shifts: &ShiftMatrixSet) -> CMat {
    let t = shifts.block_len();
    let mut phi = CMat::zeros(t, t);
    for k in shifts.k_indices() {
        let xj = shifts.shift_cols(x, k);
        phi += xj.adjoint() * xj;
    }
    phi
}

/// One MM descent step on the ISL with respect to the unimodular waveform:
/// Z = lambda_theta X - X Theta with lambda_theta = ||Theta||_1, then
/// entrywise phase projection. Never increases the ISL.
pub fn isl_mm_step_x(x: &CMat, f: &CMat, shifts: &ShiftMatrixSet, p_x: f64) -> CMat {
    let theta = isl_quadratic_x(f, shifts);
    let lambda = induced_one_norm(&theta);
    let z = x * Complex::new(lambda, 0.0) - x * theta;
    unit_phase(&z, p_x)
}

/// The ISL-optimal filter on the power sphere: a single nonzero row
/// sqrt(P_F) u_min^H in the last row, where u_min is the eigenvector of the
/// smallest eigenvalue of Phi. Attains ISL = P_F * lambda_min(Phi).
pub fn isl_min_filter(x: &CMat, shifts: &ShiftMatrixSet, n_rx: usize, p_f: f64) -> CMat {
    let phi = isl_quadratic_f(x, shifts);
    let (_, vecs) = hermitian_eigen_desc(&phi);
    let u_min = vecs.last().expect("nonempty spectrum");
    let mut f = CMat::zeros(n_rx, shifts.block_len());
    let row = u_min.map(|c| c.conj()) * Complex::new(p_f.sqrt(), 0.0);
    f.set_row(n_rx - 1, &row.transpose());
    f
}

/// Number of waveform MM sweeps per round before re-checking the constraint.
const X_SWEEPS_PER_ROUND: usize = 10;

/// Finds a feasible point: random start, then rounds of waveform sweeps
/// followed (if still infeasible) by the optimal filter step.
pub fn find_feasible<R: Rng>(
    cfg: &ProblemConfig,
    data: &ProblemData,
    rng: &mut R,
    max_rounds: usize,
) -> Result<FeasiblePoint> {
    cfg.validate()?;
    let shifts = &data.shifts;
    let xi = cfg.psl_threshold();
    let mut f = random_on_sphere(cfg.n_rx, cfg.block_len, cfg.p_f, rng);
    let mut x = random_unimodular(cfg.n_tx, cfg.block_len, cfg.p_x, rng);
    let mut best = f64::INFINITY;
    for _round in 0..max_rounds.max(1) {
        for _ in 0..X_SWEEPS_PER_ROUND {
            x = isl_mm_step_x(&x, &f, shifts, cfg.p_x);
        }
        best = best.min(max_sidelobe(&x, &f, shifts));
        if best <= xi {
            break;
        }
        f = isl_min_filter(&x, shifts, cfg.n_rx, cfg.p_f);
        best = best.min(max_sidelobe(&x, &f, shifts));
        if best <= xi {
            break;
        }
    }
    let reached = max_sidelobe(&x, &f, shifts);
    if reached > xi {
        return Err(Error::Infeasible { best_residual: best, xi });
    }
    let c: Vec<CMat> = shifts
        .k_indices()
        .map(|k| shifts.sidelobe_matrix(&x, &f, k))
        .collect();
    let objective = crate::eval::design_objective(&f, &x, cfg.alpha, data);
    Ok(FeasiblePoint { x, f, c, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_complex_matrix;
    use crate::model::ResponsePreset;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> ProblemConfig {
        ProblemConfig {
            n_tx: 4,
            n_rx: 4,
            n_users: 2,
            block_len: 8,
            cp_len: 2,
            k_max: 2,
            p_f: 8.0,
            pslr_db: 10.0,
            ..ProblemConfig::default()
        }
    }

    fn small_data(cfg: &ProblemConfig, seed: u64) -> ProblemData {
        ProblemData::sample(cfg, ResponsePreset::Omni, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn mm_step_never_increases_isl() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shifts = ShiftMatrixSet::new(8, 2).unwrap();
        let f = random_on_sphere(4, 8, 8.0, &mut rng);
        let mut x = random_unimodular(4, 8, 1.0, &mut rng);
        let mut prev = isl(&x, &f, &shifts);
        for _ in 0..20 {
            x = isl_mm_step_x(&x, &f, &shifts, 1.0);
            let cur = isl(&x, &f, &shifts);
            assert!(cur <= prev + 1e-9 * prev.max(1.0));
            prev = cur;
        }
    }

    #[test]
    fn zero_isl_state_is_fixed_up_to_phase() {
        // F orthogonal to every X J_k leaves the ISL at zero through the step.
        let shifts = ShiftMatrixSet::new(8, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_unimodular(2, 8, 1.0, &mut rng);
        let f = isl_min_filter(&x, &shifts, 2, 8.0);
        let before = isl(&x, &f, &shifts);
        let x2 = isl_mm_step_x(&x, &f, &shifts, 1.0);
        let after = isl(&x2, &f, &shifts);
        assert!(after <= before + 1e-8);
    }

    #[test]
    fn induced_one_norm_dominates_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..100 {
            let n = 4 + (trial % 13);
            let a = random_complex_matrix(n, n, &mut rng);
            let theta = a.adjoint() * &a;
            let lambda = induced_one_norm(&theta);
            let (vals, _) = hermitian_eigen_desc(&theta);
            assert!(lambda >= vals[0] - 1e-9 * vals[0].abs());
        }
    }

    #[test]
    fn min_filter_attains_p_f_lambda_min() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shifts = ShiftMatrixSet::new(8, 2).unwrap();
        let x = random_unimodular(4, 8, 1.0, &mut rng);
        let f = isl_min_filter(&x, &shifts, 4, 8.0);
        assert!((f.norm_squared() - 8.0).abs() < 1e-10);
        let phi = isl_quadratic_f(&x, &shifts);
        let (vals, _) = hermitian_eigen_desc(&phi);
        let lambda_min = *vals.last().unwrap();
        assert!((isl(&x, &f, &shifts) - 8.0 * lambda_min).abs() < 1e-8);
    }

    #[test]
    fn min_filter_beats_random_filters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shifts = ShiftMatrixSet::new(8, 2).unwrap();
        let x = random_unimodular(4, 8, 1.0, &mut rng);
        let f_opt = isl_min_filter(&x, &shifts, 4, 8.0);
        let best = isl(&x, &f_opt, &shifts);
        for _ in 0..50 {
            let f = random_on_sphere(4, 8, 8.0, &mut rng);
            assert!(best <= isl(&x, &f, &shifts) + 1e-9);
        }
    }

    #[test]
    fn rank_deficient_waveform_gives_zero_sidelobes() {
        // N_T = 2, K = 1: rank(Phi) <= 2 |Omega_K| = 4 < T = 8, so
        // lambda_min(Phi) = 0 and the optimal filter nulls every sidelobe.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let shifts = ShiftMatrixSet::new(8, 1).unwrap();
        let x = random_unimodular(2, 8, 1.0, &mut rng);
        let f = isl_min_filter(&x, &shifts, 2, 8.0);
        assert!(isl(&x, &f, &shifts).sqrt() < 1e-8);
    }

    #[test]
    fn feasible_point_invariants_over_seeds() {
        let cfg = small_cfg();
        let data = small_data(&cfg, 0);
        let xi = cfg.psl_threshold();
        for seed in 0..25 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let feas = find_feasible(&cfg, &data, &mut rng, 5).unwrap();
            for e in feas.x.iter() {
                assert!((e.norm() - cfg.p_x).abs() < 1e-12);
            }
            assert!((feas.f.norm_squared() - cfg.p_f).abs() < 1e-10);
            for (i, k) in data.shifts.k_indices().enumerate() {
                let sl = data.shifts.sidelobe_matrix(&feas.x, &feas.f, k);
                assert!(sl.norm() <= xi + 1e-9);
                assert!((&feas.c[i] - sl).norm() < 1e-12);
            }
            assert!(feas.objective.is_finite());
        }
    }
}
