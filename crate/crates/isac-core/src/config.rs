use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// All dimensions, weights, powers, thresholds, and algorithm
/// hyperparameters of a design run. Defaults reproduce the reference
/// simulation setting (8x8 antennas, 4 users, block length 64, K = 6,
/// 30 dB sidelobe ratio).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Transmit antennas N_T.
    pub n_tx: usize,
    /// Radar receive antennas N_R.
    pub n_rx: usize,
    /// Single-antenna communication users N_C.
    pub n_users: usize,
    /// Block length T.
    pub block_len: usize,
    /// Cyclic prefix length L.
    pub cp_len: usize,
    /// Maximum range-bin offset K; sidelobes are constrained for
    /// k in {-K, ..., -1, 1, ..., K}.
    pub k_max: usize,
    /// Desired peak-sidelobe ratio xi' in dB; the Frobenius threshold is
    /// xi = sqrt(T * N_T) * 10^(-xi'/20).
    pub pslr_db: f64,
    /// Objective weight: alpha on beampattern MSE, (1 - alpha) on MUI.
    pub alpha: f64,
    /// Per-entry modulus of the transmit waveform.
    pub p_x: f64,
    /// Receive filter power ||F||_F^2.
    pub p_f: f64,
    /// Communication noise power sigma_n^2.
    pub sigma_n2: f64,
    /// Violation descent factor delta in (0, 1) for the penalty update.
    pub delta: f64,
    /// Penalty growth factor gamma > 1 (gamma = 1 keeps the penalty fixed).
    pub gamma: f64,
    /// Proximal weight beta > 0 in the auxiliary-variable update.
    pub beta: f64,
    /// Entrywise magnitude bound on the Lagrange multipliers.
    pub u_max: f64,
    /// Initial penalty parameter rho^(0).
    pub rho0: f64,
    /// Outer iteration cap.
    pub max_outer: usize,
    /// Inner (block-sweep) iteration cap per subproblem.
    pub max_inner: usize,
    /// RNG seed for channel, symbols, and initial points.
    pub seed: u64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            n_tx: 8,
            n_rx: 8,
            n_users: 4,
            block_len: 64,
            cp_len: 6,
            k_max: 6,
            pslr_db: 30.0,
            alpha: 0.2,
            p_x: 1.0,
            p_f: 64.0,
            // SNR = 6 dB with unit-power symbols.
            sigma_n2: 10f64.powf(-0.6),
            delta: 0.965,
            gamma: 1.1,
            beta: 1.0,
            u_max: 1e3,
            rho0: 1e-3,
            max_outer: 500,
            max_inner: 50,
            seed: 0,
        }
    }
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 || self.n_rx == 0 || self.n_users == 0 {
            return Err(invalid("antenna and user counts must be positive"));
        }
        if self.block_len == 0 {
            return Err(invalid("block_len must be positive"));
        }
        if self.cp_len >= self.block_len {
            return Err(invalid(format!(
                "cp_len ({}) must be smaller than block_len ({})",
                self.cp_len, self.block_len
            )));
        }
        if self.k_max < 1 || self.k_max >= self.block_len {
            return Err(invalid(format!(
                "k_max ({}) must satisfy 1 <= k_max < block_len ({})",
                self.k_max, self.block_len
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("alpha must lie in [0, 1]"));
        }
        if self.p_x <= 0.0 || self.p_f <= 0.0 || self.sigma_n2 <= 0.0 {
            return Err(invalid("p_x, p_f, and sigma_n2 must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta must lie in (0, 1)"));
        }
        if self.gamma < 1.0 {
            return Err(invalid("gamma must be >= 1"));
        }
        if self.beta <= 0.0 {
            return Err(invalid("beta must be positive"));
        }
        if self.u_max <= 0.0 || self.rho0 <= 0.0 {
            return Err(invalid("u_max and rho0 must be positive"));
        }
        let xi = self.psl_threshold();
        if !xi.is_finite() || xi <= 0.0 {
            return Err(invalid("derived threshold xi must be finite and positive"));
        }
        Ok(())
    }

    /// Sidelobe threshold xi = sqrt(T * N_T) * 10^(-xi'/20).
    pub fn psl_threshold(&self) -> f64 {
        ((self.block_len * self.n_tx) as f64).sqrt() * 10f64.powf(-self.pslr_db / 20.0)
    }

    /// Total transmit power P_X = N_T * T * P_x^2.
    pub fn total_tx_power(&self) -> f64 {
        (self.n_tx * self.block_len) as f64 * self.p_x * self.p_x
    }

    /// Number of constrained range bins |Omega_K| = 2K.
    pub fn n_bins(&self) -> usize {
        2 * self.k_max
    }

    /// Outer stopping threshold sqrt(T) * 1e-3 on max{e, v}.
    pub fn stop_tol(&self) -> f64 {
        (self.block_len as f64).sqrt() * 1e-3
    }
}
