//! Metric evaluation and radar-echo simulation: MUI, SINR/sum rate,
//! beampattern MSE, per-bin sidelobe levels, echo synthesis, and image
//! formation.

use std::io::Write;
use std::path::Path;

use num_complex::Complex;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::linalg::{stack_rows, standard_complex};
use crate::model::{steering, ProblemData, ShiftMatrixSet};
use crate::{C64, CMat};

/// Design objective f(F, X) = alpha ||X F^H - R_d||_F^2
/// + (1 - alpha) ||H x - s||_2^2.
pub fn design_objective(f: &CMat, x: &CMat, alpha: f64, data: &ProblemData) -> f64 {
    alpha * beampattern_mse(x, f, &data.r_d) + (1.0 - alpha) * mui(x, data)
}

/// Multi-user interference power ||H x - s||_2^2 (row-stacked x).
pub fn mui(x: &CMat, data: &ProblemData) -> f64 {
    let xv = stack_rows(x);
    (&data.channel.h * xv - &data.s_vec).norm_squared()
}

/// Per-user residual powers ||H_i x - s_i||_2^2.
pub fn per_user_residuals(x: &CMat, data: &ProblemData) -> Vec<f64> {
    let t = data.block_len();
    let xv = stack_rows(x);
    let r = &data.channel.h * xv - &data.s_vec;
    (0..data.channel.n_users())
        .map(|i| r.rows(i * t, t).norm_squared())
        .collect()
}

/// Achievable downlink sum rate with per-symbol SINR
/// gamma_i = 1 / (||H_i x - s_i||^2 / T + sigma_n^2) for unit-power symbols.
pub fn sum_rate(x: &CMat, data: &ProblemData, sigma_n2: f64) -> f64 {
    assert!(sigma_n2 > 0.0);
    let t = data.block_len() as f64;
    per_user_residuals(x, data)
        .iter()
        .map(|&res| {
            let gamma = 1.0 / (res / t + sigma_n2);
            (1.0 + gamma).log2()
        })
        .sum()
}

/// Beampattern mismatch ||X F^H - R_d||_F^2.
pub fn beampattern_mse(x: &CMat, f: &CMat, r_d: &CMat) -> f64 {
    (x * f.adjoint() - r_d).norm_squared()
}

/// Per-bin sidelobe levels ||X J_k F^H||_F, in the listed offset order,
/// plus the peak and integrated levels.
#[derive(Debug, Clone)]
pub struct SidelobeLevels {
    pub per_bin: Vec<(i64, f64)>,
    /// max_k level (PSL proxy).
    pub peak: f64,
    /// sum of squared levels (ISL).
    pub integrated: f64,
}

pub fn sidelobe_levels(x: &CMat, f: &CMat, shifts: &ShiftMatrixSet) -> SidelobeLevels {
    let per_bin: Vec<(i64, f64)> = shifts
        .k_indices()
        .map(|k| (k, shifts.sidelobe_matrix(x, f, k).norm()))
        .collect();
    let peak = per_bin.iter().map(|&(_, l)| l).fold(0.0, f64::max);
    let integrated = per_bin.iter().map(|&(_, l)| l * l).sum();
    SidelobeLevels { per_bin, peak, integrated }
}

/// A point scatterer: absolute range bin, angle, and complex amplitude.
#[derive(Debug, Clone, Copy)]
pub struct Scatterer {
    pub bin: i64,
    pub angle: f64,
    pub amplitude: C64,
}

/// Radar scene: point scatterers inside the simulated range window
/// [-K_scene, K_scene] plus white receiver noise of per-entry variance
/// sigma_r2.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub scatterers: Vec<Scatterer>,
    pub sigma_r2: f64,
    pub k_scene: usize,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let k = self.k_scene as i64;
        for s in &self.scatterers {
            if s.bin < -k || s.bin > k {
                return Err(invalid(format!(
                    "scatterer bin {} outside simulated window [{}, {}]",
                    s.bin, -k, k
                )));
            }
            if !s.amplitude.is_finite() {
                return Err(invalid("scatterer amplitude must be finite"));
            }
        }
        if self.sigma_r2 < 0.0 {
            return Err(invalid("noise variance must be nonnegative"));
        }
        Ok(())
    }

    /// Bins for which echo data is produced.
    pub fn bins(&self) -> impl Iterator<Item = i64> {
        let k = self.k_scene as i64;
        -k..=k
    }
}

/// Received echo matrices D_(i), one N_R x T matrix per range bin of the
/// scene window. A scatterer at absolute bin j contributes to bin i through
/// X J_{j-i} whenever |j - i| <= K (and through X itself when j = i).
pub fn simulate_echo<R: Rng>(
    scene: &SceneSpec,
    x: &CMat,
    shifts: &ShiftMatrixSet,
    n_rx: usize,
    rng: &mut R,
) -> Result<Vec<(i64, CMat)>> {
    scene.validate()?;
    let t = shifts.block_len();
    let n_tx = x.nrows();
    let k_max = shifts.k_max() as i64;
    let mut out = Vec::new();
    for i in scene.bins() {
        let mut d = CMat::zeros(n_rx, t);
        for sc in &scene.scatterers {
            let offset = sc.bin - i;
            if offset.abs() > k_max {
                continue;
            }
            let a = steering(sc.angle, n_rx);
            let v = steering(sc.angle, n_tx);
            let vx = if offset == 0 {
                v.transpose() * x
            } else {
                v.transpose() * shifts.shift_cols(x, offset)
            };
            d += a * vx * sc.amplitude;
        }
        if scene.sigma_r2 > 0.0 {
            let sd = scene.sigma_r2.sqrt();
            for r in 0..n_rx {
                for c in 0..t {
                    d[(r, c)] += standard_complex(rng) * Complex::new(sd, 0.0);
                }
            }
        }
        out.push((i, d));
    }
    Ok(out)
}

/// Radar image r_{theta, i} = |a(theta)^H D_(i) F^H a(theta)| on an
/// (angle x range-bin) grid.
#[derive(Debug, Clone)]
pub struct RadarImage {
    pub angles: Vec<f64>,
    pub bins: Vec<i64>,
    /// values[(a, b)] for angle index a, bin index b.
    pub values: nalgebra::DMatrix<f64>,
}

/// Uniform angle grid of `n` points over [-90, 90] degrees, in radians.
pub fn default_angle_grid(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| (-90.0 + 180.0 * i as f64 / (n - 1) as f64).to_radians())
        .collect()
}

pub fn form_image(echoes: &[(i64, CMat)], f: &CMat, angle_grid: &[f64]) -> Result<RadarImage> {
    if echoes.is_empty() || angle_grid.is_empty() {
        return Err(invalid("image grids must be nonempty"));
    }
    let n_rx = f.nrows();
    let bins: Vec<i64> = echoes.iter().map(|&(b, _)| b).collect();
    let mut values = nalgebra::DMatrix::zeros(angle_grid.len(), bins.len());
    for (ai, &theta) in angle_grid.iter().enumerate() {
        let a = steering(theta, n_rx);
        let fa = f.adjoint() * &a;
        for (bi, (_, d)) in echoes.iter().enumerate() {
            values[(ai, bi)] = (a.adjoint() * d * &fa)[(0, 0)].norm();
        }
    }
    Ok(RadarImage { angles: angle_grid.to_vec(), bins, values })
}

impl RadarImage {
    /// Location (angle index, bin index) of the global maximum.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_v = f64::NEG_INFINITY;
        for a in 0..self.values.nrows() {
            for b in 0..self.values.ncols() {
                if self.values[(a, b)] > best_v {
                    best_v = self.values[(a, b)];
                    best = (a, b);
                }
            }
        }
        best
    }

    /// CSV matrix: header row of bins, then one row per angle
    /// (angle_deg, value...).
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = String::new();
        out.push_str("angle_deg");
        for b in &self.bins {
            out.push_str(&format!(",bin_{b}"));
        }
        out.push('\n');
        for (ai, theta) in self.angles.iter().enumerate() {
            out.push_str(&format!("{:.6}", theta.to_degrees()));
            for bi in 0..self.bins.len() {
                out.push_str(&format!(",{:.12e}", self.values[(ai, bi)]));
            }
            out.push('\n');
        }
        std::fs::write(path, out)
    }

    /// 8-bit grayscale PGM with linear min-max normalization
    /// (rows = angles, columns = bins).
    pub fn write_pgm(&self, path: &Path) -> std::io::Result<()> {
        let (nr, nc) = (self.values.nrows(), self.values.ncols());
        let min = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = if max > min { max - min } else { 1.0 };
        let mut file = std::fs::File::create(path)?;
        writeln!(file, "P5\n{nc} {nr}\n255")?;
        let mut buf = Vec::with_capacity(nr * nc);
        for a in 0..nr {
            for b in 0..nc {
                let v = ((self.values[(a, b)] - min) / span * 255.0).round();
                buf.push(v.clamp(0.0, 255.0) as u8);
            }
        }
        file.write_all(&buf)
    }
}
