//! Domain model: temporal shift matrices, the CP-based frequency-selective
//! channel, symbol matrices, steering vectors, and the desired spatial
//! response.
//!
//! Vectorization convention used everywhere: the stacked waveform vector x
//! holds the ROWS of X, i.e. x = [x_1^T; ...; x_{N_T}^T] where x_i is the
//! i-th row (per-antenna time series).

use num_complex::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::config::ProblemConfig;
use crate::error::{invalid, Result};
use crate::linalg::{power_iteration_lambda_max, stack_rows, standard_complex};
use crate::{C64, CMat, CVec};

/// The set of temporal shift matrices J_k for k in
/// Omega_K = {-K, ..., -1, 1, ..., K}.
///
/// J_k (k > 0) carries I_{T-k} in the top-right and I_k in the bottom-left
/// block, i.e. X J_k cyclically delays every row of X by k slots, and
/// J_{-k} = J_k^T. Applications are implemented as column permutations; the
/// dense 0/1 matrix is materialized on demand.
#[derive(Debug, Clone)]
pub struct ShiftMatrixSet {
    t: usize,
    k_max: usize,
}

impl ShiftMatrixSet {
    /// Builds the shift set for block length `t` and maximum offset `k_max`.
    pub fn new(t: usize, k_max: usize) -> Result<Self> {
        if k_max < 1 || k_max >= t {
            return Err(invalid(format!(
                "shift set requires 1 <= K < T, got K = {k_max}, T = {t}"
            )));
        }
        Ok(Self { t, k_max })
    }

    pub fn block_len(&self) -> usize {
        self.t
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Offsets in listed order: -K, ..., -1, 1, ..., K.
    pub fn k_indices(&self) -> impl Iterator<Item = i64> + '_ {
        let k = self.k_max as i64;
        (-k..0).chain(1..=k)
    }

    pub fn n_bins(&self) -> usize {
        2 * self.k_max
    }

    /// Dense J_k (0/1 permutation matrix). `k = 0` yields the identity.
    pub fn matrix(&self, k: i64) -> CMat {
        assert!(k.unsigned_abs() as usize <= self.k_max, "offset out of range");
        let t = self.t as i64;
        CMat::from_fn(self.t, self.t, |i, j| {
            // Column j of J_k is e_{(j - k) mod T}.
            if (i as i64 - (j as i64 - k)).rem_euclid(t) == 0 {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// X J_k without forming J_k: column j of the result is column
    /// (j - k) mod T of `x`.
    pub fn shift_cols(&self, x: &CMat, k: i64) -> CMat {
        assert!(k.unsigned_abs() as usize <= self.k_max, "offset out of range");
        assert_eq!(x.ncols(), self.t, "column count must equal T");
        let t = self.t as i64;
        let mut out = CMat::zeros(x.nrows(), x.ncols());
        for j in 0..self.t {
            let src = (j as i64 - k).rem_euclid(t) as usize;
            out.set_column(j, &x.column(src));
        }
        out
    }

    /// The sidelobe matrix X J_k F^H.
    pub fn sidelobe_matrix(&self, x: &CMat, f: &CMat, k: i64) -> CMat {
        self.shift_cols(x, k) * f.adjoint()
    }
}

/// Block channel matrix of the CP-based frequency-selective downlink.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    /// H in C^{(N_C T) x (N_T T)}: block (m, n) is the T x T circulant
    /// effective channel of the link from transmit antenna n to user m.
    pub h: CMat,
    /// Per-link taps, indexed taps[m][n], each of length L + 1.
    pub taps: Vec<Vec<Vec<C64>>>,
    pub block_len: usize,
}

impl ChannelMatrix {
    pub fn n_users(&self) -> usize {
        self.taps.len()
    }

    pub fn n_tx(&self) -> usize {
        self.taps[0].len()
    }

    /// The per-user block row H_i = [H~_{i,1}, ..., H~_{i,N_T}].
    pub fn user_block(&self, user: usize) -> CMat {
        let t = self.block_len;
        CMat::from(self.h.view((user * t, 0), (t, self.h.ncols())))
    }
}

/// After CP insertion and removal the per-link channel is circulant with
/// first column [h_0, ..., h_L, 0, ...]^T. Assembles the user-by-antenna
/// block layout.
pub fn build_cp_channel(taps: &[Vec<Vec<C64>>], t: usize, l: usize) -> Result<ChannelMatrix> {
    if l >= t {
        return Err(invalid(format!("cp length L = {l} must be < T = {t}")));
    }
    let n_users = taps.len();
    if n_users == 0 || taps[0].is_empty() {
        return Err(invalid("taps must be a non-empty (user x antenna) grid"));
    }
    let n_tx = taps[0].len();
    for (m, row) in taps.iter().enumerate() {
        if row.len() != n_tx {
            return Err(invalid(format!("ragged tap grid at user {m}")));
        }
        for (n, link) in row.iter().enumerate() {
            if link.len() != l + 1 {
                return Err(invalid(format!(
                    "tap vector for link ({m}, {n}) has length {}, expected L + 1 = {}",
                    link.len(),
                    l + 1
                )));
            }
        }
    }
    let mut h = CMat::zeros(n_users * t, n_tx * t);
    for m in 0..n_users {
        for n in 0..n_tx {
            let link = &taps[m][n];
            for i in 0..t {
                for j in 0..t {
                    let lag = (i as i64 - j as i64).rem_euclid(t as i64) as usize;
                    if lag <= l {
                        h[(m * t + i, n * t + j)] = link[lag];
                    }
                }
            }
        }
    }
    Ok(ChannelMatrix { h, taps: taps.to_vec(), block_len: t })
}

/// Draws per-link taps h_l ~ CN(0, p_l) with an exponential power-delay
/// profile p_l proportional to e^{-l / L_decay}, normalized so the profile
/// sums to one per link. L_decay = L / 3 (flat single tap when L = 0).
pub fn sample_channel<R: Rng>(cfg: &ProblemConfig, rng: &mut R) -> Result<ChannelMatrix> {
    cfg.validate()?;
    let l = cfg.cp_len;
    let profile = exp_power_delay_profile(l);
    let mut taps = vec![vec![Vec::with_capacity(l + 1); cfg.n_tx]; cfg.n_users];
    for m in 0..cfg.n_users {
        for n in 0..cfg.n_tx {
            for p in &profile {
                taps[m][n].push(standard_complex(rng) * Complex::new(p.sqrt(), 0.0));
            }
        }
    }
    build_cp_channel(&taps, cfg.block_len, l)
}

/// Normalized exponential power-delay profile of length L + 1.
pub fn exp_power_delay_profile(l: usize) -> Vec<f64> {
    if l == 0 {
        return vec![1.0];
    }
    let decay = l as f64 / 3.0;
    let raw: Vec<f64> = (0..=l).map(|i| (-(i as f64) / decay).exp()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / sum).collect()
}

/// Unit-power QPSK symbol matrix, N_C x T, entries in {(+-1 +- j)/sqrt(2)}.
#[derive(Debug, Clone)]
pub struct SymbolMatrix {
    pub s: CMat,
}

impl SymbolMatrix {
    /// Row-stacked vector form s.
    pub fn stacked(&self) -> CVec {
        stack_rows(&self.s)
    }
}

pub fn sample_symbols<R: Rng>(cfg: &ProblemConfig, rng: &mut R) -> Result<SymbolMatrix> {
    cfg.validate()?;
    let mut s = CMat::zeros(cfg.n_users, cfg.block_len);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..cfg.n_users {
        for j in 0..cfg.block_len {
            let q: u8 = rng.random_range(0..4);
            let (re, im) = match q {
                0 => (r, r),
                1 => (r, -r),
                2 => (-r, r),
                _ => (-r, -r),
            };
            s[(i, j)] = C64::new(re, im);
        }
    }
    Ok(SymbolMatrix { s })
}

/// Half-wavelength ULA steering vector of length `n`: entry m (0-based) is
/// e^{-j pi m sin(theta)}.
pub fn steering(theta: f64, n: usize) -> CVec {
    assert!(n >= 1);
    let st = theta.sin();
    CVec::from_fn(n, |m, _| {
        Complex::from_polar(1.0, -std::f64::consts::PI * m as f64 * st)
    })
}

/// Desired spatial response presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResponsePreset {
    /// R_d = (P_X / N_T) I.
    Omni,
    /// Mainlobe centered at `center` radians with total width `width`
    /// radians, synthesized by a least-squares sum of steering outer
    /// products over a uniform grid and rescaled so
    /// ||R_d||_F^2 = P_X * N_R / N_T.
    Directional { center: f64, width: f64 },
}

/// Desired response R_d in C^{N_T x N_R}.
pub fn build_desired_response(preset: ResponsePreset, cfg: &ProblemConfig) -> Result<CMat> {
    cfg.validate()?;
    let p_total = cfg.total_tx_power();
    match preset {
        ResponsePreset::Omni => {
            if cfg.n_tx != cfg.n_rx {
                return Err(invalid("omni preset requires N_T = N_R"));
            }
            Ok(CMat::identity(cfg.n_tx, cfg.n_rx) * C64::new(p_total / cfg.n_tx as f64, 0.0))
        }
        ResponsePreset::Directional { center, width } => {
            if width < 0.0 {
                return Err(invalid("mainlobe width must be nonnegative (empty grid)"));
            }
            // 1 degree grid spacing, always at least the center point.
            let step = 1f64.to_radians();
            let n_pts = ((width / step).ceil() as usize).max(0) + 1;
            let mut r_d = CMat::zeros(cfg.n_tx, cfg.n_rx);
            for g in 0..n_pts {
                let theta = if n_pts == 1 {
                    center
                } else {
                    center - width / 2.0 + width * g as f64 / (n_pts - 1) as f64
                };
                let v = steering(theta, cfg.n_tx).map(|c| c.conj());
                let a = steering(theta, cfg.n_rx);
                // Reference both steering vectors to the array phase center so
                // grid contributions add coherently across the mainlobe.
                let centering = Complex::from_polar(
                    1.0,
                    -std::f64::consts::PI
                        * ((cfg.n_tx + cfg.n_rx) as f64 / 2.0 - 1.0)
                        * theta.sin(),
                );
                r_d += v * a.adjoint() * centering;
            }
            r_d *= C64::new(p_total / n_pts as f64, 0.0);
            let target = (p_total * cfg.n_rx as f64 / cfg.n_tx as f64).sqrt();
            let norm = r_d.norm();
            if norm == 0.0 {
                return Err(invalid("degenerate desired response grid"));
            }
            Ok(r_d * C64::new(target / norm, 0.0))
        }
    }
}

/// Frozen per-run inputs: channel, symbols, desired response, shift set,
/// plus quantities cached for the solver (H^H H, H^H s, and the largest
/// eigenvalue of H^H H).
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub channel: ChannelMatrix,
    pub symbols: SymbolMatrix,
    /// Row-stacked symbol vector.
    pub s_vec: CVec,
    pub r_d: CMat,
    pub shifts: ShiftMatrixSet,
    /// H^H H, cached.
    pub hh: CMat,
    /// H^H s, cached.
    pub hs: CVec,
    /// Majorizer constant for x^H H^H H x: power-iteration estimate of
    /// lambda_max(H^H H) inflated by 1e-6 relative so the dominance
    /// lambda_h I >= H^H H holds numerically.
    pub lambda_h: f64,
}

impl ProblemData {
    /// Samples channel and symbols from `rng` and assembles the cached
    /// products. Deterministic given the rng state.
    pub fn sample<R: Rng>(cfg: &ProblemConfig, preset: ResponsePreset, rng: &mut R) -> Result<Self> {
        let channel = sample_channel(cfg, rng)?;
        let symbols = sample_symbols(cfg, rng)?;
        let r_d = build_desired_response(preset, cfg)?;
        Self::assemble(cfg, channel, symbols, r_d)
    }

    /// Builds a `ProblemData` from explicit parts (used by tests and small
    /// synthetic instances).
    pub fn assemble(
        cfg: &ProblemConfig,
        channel: ChannelMatrix,
        symbols: SymbolMatrix,
        r_d: CMat,
    ) -> Result<Self> {
        let shifts = ShiftMatrixSet::new(cfg.block_len, cfg.k_max)?;
        let s_vec = symbols.stacked();
        let hh = channel.h.adjoint() * &channel.h;
        let hs = channel.h.adjoint() * &s_vec;
        // The eigenvalue estimate must not depend on caller rng state.
        let mut pi_rng = ChaCha8Rng::seed_from_u64(0x5eed_1a_bd);
        let lambda_h = power_iteration_lambda_max(&hh, &mut pi_rng) * (1.0 + 1e-6);
        Ok(Self { channel, symbols, s_vec, r_d, shifts, hh, hs, lambda_h })
    }

    pub fn n_tx(&self) -> usize {
        self.channel.n_tx()
    }

    pub fn n_rx(&self) -> usize {
        self.r_d.ncols()
    }

    pub fn block_len(&self) -> usize {
        self.channel.block_len
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_complex_matrix;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> ProblemConfig {
        ProblemConfig {
            n_tx: 2,
            n_rx: 2,
            n_users: 2,
            block_len: 8,
            cp_len: 2,
            k_max: 2,
            p_f: 8.0,
            ..ProblemConfig::default()
        }
    }

    #[test]
    fn shift_matrix_t3_k1() {
        let shifts = ShiftMatrixSet::new(3, 1).unwrap();
        let j1 = shifts.matrix(1);
        let expect = CMat::from_row_slice(
            3,
            3,
            &[
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        assert_eq!(j1, expect);
        assert_eq!(shifts.matrix(-1), j1.transpose());
    }

    #[test]
    fn shift_matrices_are_permutations() {
        for (t, k_max) in [(3, 1), (5, 2), (8, 4)] {
            let shifts = ShiftMatrixSet::new(t, k_max).unwrap();
            for k in shifts.k_indices().collect::<Vec<_>>() {
                let j = shifts.matrix(k);
                assert_abs_diff_eq!((&j * j.transpose() - CMat::identity(t, t)).norm(), 0.0);
                assert_eq!(shifts.matrix(-k), j.transpose());
                for row in 0..t {
                    let ones = (0..t).filter(|&c| j[(row, c)].re == 1.0).count();
                    assert_eq!(ones, 1);
                }
            }
        }
    }

    #[test]
    fn shift_cols_matches_dense_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let shifts = ShiftMatrixSet::new(7, 3).unwrap();
        let x = random_complex_matrix(4, 7, &mut rng);
        for k in shifts.k_indices().collect::<Vec<_>>() {
            let fast = shifts.shift_cols(&x, k);
            let dense = &x * shifts.matrix(k);
            assert!((fast - dense).norm() < 1e-14);
        }
    }

    #[test]
    fn shift_set_rejects_bad_k() {
        assert!(ShiftMatrixSet::new(3, 3).is_err());
        assert!(ShiftMatrixSet::new(3, 0).is_err());
    }

    #[test]
    fn cp_channel_t3_l1_example() {
        let taps = vec![vec![vec![C64::new(1.0, 0.0), C64::new(0.5, 0.0)]]];
        let ch = build_cp_channel(&taps, 3, 1).unwrap();
        let expect = CMat::from_row_slice(
            3,
            3,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.5, 0.0),
                C64::new(0.5, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.5, 0.0),
                C64::new(1.0, 0.0),
            ],
        );
        assert!((ch.h - expect).norm() < 1e-15);
    }

    #[test]
    fn cp_channel_identity_taps() {
        let mut taps = vec![C64::new(0.0, 0.0); 4];
        taps[0] = C64::new(1.0, 0.0);
        let ch = build_cp_channel(&vec![vec![taps]], 6, 3).unwrap();
        assert!((ch.h - CMat::identity(6, 6)).norm() < 1e-15);
    }

    #[test]
    fn cp_channel_column_sums_equal_tap_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let l = 2;
        let taps: Vec<C64> = (0..=l).map(|_| standard_complex(&mut rng)).collect();
        let total: C64 = taps.iter().sum();
        let ch = build_cp_channel(&vec![vec![taps]], 5, l).unwrap();
        for j in 0..5 {
            let col: C64 = ch.h.column(j).iter().sum();
            assert!((col - total).norm() < 1e-12);
        }
    }

    #[test]
    fn cp_channel_rejects_bad_taps() {
        let taps = vec![vec![vec![C64::new(1.0, 0.0)]]]; // length 1, L = 1 needs 2
        assert!(build_cp_channel(&taps, 4, 1).is_err());
    }

    #[test]
    fn sampled_channel_is_deterministic() {
        let cfg = small_cfg();
        let a = sample_channel(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = sample_channel(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.h, b.h);
    }

    #[test]
    fn power_delay_profile_normalized() {
        for l in [0, 1, 3, 6, 10] {
            let p = exp_power_delay_profile(l);
            assert_eq!(p.len(), l + 1);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_fading_channel_is_block_diagonal() {
        let cfg = ProblemConfig { cp_len: 0, ..small_cfg() };
        let ch = sample_channel(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let t = cfg.block_len;
        for m in 0..cfg.n_users {
            for n in 0..cfg.n_tx {
                for i in 0..t {
                    for j in 0..t {
                        if i != j {
                            assert_eq!(ch.h[(m * t + i, n * t + j)], C64::new(0.0, 0.0));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn symbols_unimodular_and_deterministic() {
        let cfg = small_cfg();
        let a = sample_symbols(&cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = sample_symbols(&cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a.s, b.s);
        for c in a.s.iter() {
            assert!((c.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn symbols_have_near_zero_mean() {
        let cfg = ProblemConfig { n_users: 10, block_len: 100, cp_len: 6, ..ProblemConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut sum = C64::new(0.0, 0.0);
        let mut count = 0usize;
        // 100 draws of a 10 x 100 matrix: 1e5 samples.
        for _ in 0..100 {
            let s = sample_symbols(&cfg, &mut rng).unwrap();
            sum += s.s.iter().sum::<C64>();
            count += s.s.len();
        }
        assert!((sum / count as f64).norm() < 0.02);
    }

    #[test]
    fn steering_basics() {
        let a = steering(0.0, 5);
        for c in a.iter() {
            assert!((c - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
        let b = steering(std::f64::consts::FRAC_PI_2, 2);
        assert!((b[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((b[1] - C64::new(-1.0, 0.0)).norm() < 1e-12);
        // Constant modulus and a^H a = N.
        let c = steering(0.4, 9);
        for e in c.iter() {
            assert!((e.norm() - 1.0).abs() < 1e-14);
        }
        assert!(((c.adjoint() * &c)[(0, 0)].re - 9.0).abs() < 1e-12);
    }

    #[test]
    fn omni_response_is_scaled_identity() {
        let cfg = small_cfg();
        let r = build_desired_response(ResponsePreset::Omni, &cfg).unwrap();
        let scale = cfg.total_tx_power() / cfg.n_tx as f64;
        assert!((r - CMat::identity(2, 2) * C64::new(scale, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn directional_zero_width_is_broadside_rank_one() {
        let cfg = small_cfg();
        let r = build_desired_response(
            ResponsePreset::Directional { center: 0.0, width: 0.0 },
            &cfg,
        )
        .unwrap();
        // v*(0) a(0)^T is the all-ones outer product; check proportionality.
        let scale = r[(0, 0)];
        for e in r.iter() {
            assert!((e - scale).norm() < 1e-12);
        }
        let target = cfg.total_tx_power() * cfg.n_rx as f64 / cfg.n_tx as f64;
        assert!((r.norm_squared() - target).abs() < 1e-9 * target);
    }

    #[test]
    fn directional_norm_matches_declared_normalization() {
        let cfg = small_cfg();
        let r = build_desired_response(
            ResponsePreset::Directional { center: 0.2, width: 0.3 },
            &cfg,
        )
        .unwrap();
        let target = cfg.total_tx_power() * cfg.n_rx as f64 / cfg.n_tx as f64;
        assert!((r.norm_squared() - target).abs() < 1e-9 * target);
    }

    #[test]
    fn directional_rejects_negative_width() {
        let cfg = small_cfg();
        assert!(build_desired_response(
            ResponsePreset::Directional { center: 0.0, width: -0.1 },
            &cfg
        )
        .is_err());
    }

    #[test]
    fn problem_data_sampling_deterministic() {
        let cfg = small_cfg();
        let a = ProblemData::sample(&cfg, ResponsePreset::Omni, &mut ChaCha8Rng::seed_from_u64(3))
            .unwrap();
        let b = ProblemData::sample(&cfg, ResponsePreset::Omni, &mut ChaCha8Rng::seed_from_u64(3))
            .unwrap();
        assert_eq!(a.channel.h, b.channel.h);
        assert_eq!(a.symbols.s, b.symbols.s);
        assert_eq!(a.lambda_h, b.lambda_h);
    }
}
