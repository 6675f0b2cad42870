use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use isac_core::alm::{run_from_feasible, OuterReport, RunOptions};
use isac_core::eval::{
    default_angle_grid, form_image, simulate_echo, sum_rate, SceneSpec, Scatterer,
};
use isac_core::feasibility::max_sidelobe;
use isac_core::model::ResponsePreset;
use isac_core::{find_feasible, C64, DesignState, ProblemConfig, ProblemData};

use crate::io_util::{atomic_write, complex_csv, mean_std, parse_complex_csv};

/// Seed of the predetermined feasible point shared by every simulation of a
/// campaign (separate from the per-run data seed).
const FEASIBILITY_SEED: u64 = 0xfea5;
const FEASIBILITY_ROUNDS: usize = 30;
/// Beampattern evaluation grid.
const ANGLE_POINTS: usize = 181;

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveFlags {
    pub squarem: bool,
    pub fixed_penalty: bool,
}

pub fn load_config(path: &Path) -> Result<ProblemConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let cfg: ProblemConfig =
        toml::from_str(&text).map_err(|e| anyhow!("config {}: {e}", path.display()))?;
    cfg.validate()
        .map_err(|e| anyhow!("config {}: {e}", path.display()))?;
    Ok(cfg)
}

fn effective(cfg: &ProblemConfig, flags: SolveFlags) -> ProblemConfig {
    let mut cfg = cfg.clone();
    if flags.fixed_penalty {
        cfg.gamma = 1.0;
    }
    cfg
}

#[derive(Debug, Clone, Serialize)]
struct Metrics {
    sum_rate: f64,
    bp_mse: f64,
    max_sidelobe: f64,
    mui: f64,
}

fn metrics(z: &DesignState, cfg: &ProblemConfig, data: &ProblemData) -> Metrics {
    Metrics {
        sum_rate: sum_rate(&z.x, data, cfg.sigma_n2),
        bp_mse: isac_core::eval::beampattern_mse(&z.x, &z.f, &data.r_d),
        max_sidelobe: max_sidelobe(&z.x, &z.f, &data.shifts),
        mui: isac_core::eval::mui(&z.x, data),
    }
}

struct SeedOutcome {
    state: DesignState,
    report: OuterReport,
    metrics: Metrics,
}

/// One campaign run: data drawn from `seed`, feasible point from the fixed
/// campaign seed so every simulation starts from the same (X, F).
fn run_seed(cfg: &ProblemConfig, seed: u64, flags: SolveFlags) -> Result<SeedOutcome> {
    let mut cfg = cfg.clone();
    cfg.seed = seed;
    let data = ProblemData::sample(&cfg, ResponsePreset::Omni, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let feas = find_feasible(
        &cfg,
        &data,
        &mut ChaCha8Rng::seed_from_u64(FEASIBILITY_SEED),
        FEASIBILITY_ROUNDS,
    )?;
    let (state, report) = run_from_feasible(&cfg, &data, &feas, RunOptions { squarem: flags.squarem })?;
    let m = metrics(&state, &cfg, &data);
    Ok(SeedOutcome { state, report, metrics: m })
}

fn trace_csv(report: &OuterReport) -> String {
    let mut out = String::from("iter,alf,v,e,rho,sum_rate,bp_mse,max_sidelobe\n");
    for i in 0..report.outer_iters {
        out.push_str(&format!(
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            i + 1,
            report.alf_trace[i],
            report.v_trace[i],
            report.e_trace[i],
            report.rho_trace[i],
            report.rate_trace[i],
            report.bpmse_trace[i],
            report.maxsl_trace[i],
        ));
    }
    out
}

#[derive(Serialize)]
struct DesignSummary {
    converged: bool,
    outer_iters: usize,
    final_violation: f64,
    final_e_bound: f64,
    final_rho: f64,
    sum_rate: f64,
    bp_mse: f64,
    max_sidelobe: f64,
    mui: f64,
    inner_within_10: f64,
    wall_time_s: f64,
}

pub fn cmd_design(config: &Path, out: &Path, flags: SolveFlags) -> Result<u8> {
    let cfg = effective(&load_config(config)?, flags);
    let t0 = Instant::now();
    let outcome = run_seed(&cfg, cfg.seed, flags)?;
    let rep = &outcome.report;
    let n = rep.outer_iters;
    let summary = DesignSummary {
        converged: rep.converged,
        outer_iters: n,
        final_violation: rep.v_trace[n - 1],
        final_e_bound: rep.e_trace[n - 1],
        final_rho: rep.rho_trace[n - 1],
        sum_rate: outcome.metrics.sum_rate,
        bp_mse: outcome.metrics.bp_mse,
        max_sidelobe: outcome.metrics.max_sidelobe,
        mui: outcome.metrics.mui,
        inner_within_10: rep.inner_within(10),
        wall_time_s: t0.elapsed().as_secs_f64(),
    };
    atomic_write(&out.join("trace.csv"), trace_csv(rep).as_bytes())?;
    atomic_write(
        &out.join("summary.json"),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    atomic_write(&out.join("X.csv"), complex_csv(&outcome.state.x).as_bytes())?;
    atomic_write(&out.join("F.csv"), complex_csv(&outcome.state.f).as_bytes())?;
    Ok(if rep.converged { 0 } else { 2 })
}

#[derive(Serialize)]
struct CampaignSummary {
    n_seeds: usize,
    n_failed: usize,
    n_converged: usize,
    mean_outer_iters: f64,
    inner_within_10: f64,
    mean_sum_rate: f64,
    mean_bp_mse: f64,
    mean_max_sidelobe: f64,
    wall_time_s: f64,
}

pub fn cmd_montecarlo(
    config: &Path,
    seeds: usize,
    workers: usize,
    out: &Path,
    flags: SolveFlags,
) -> Result<u8> {
    if seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let cfg = effective(&load_config(config)?, flags);
    let t0 = Instant::now();
    let results = run_parallel(&cfg, (0..seeds as u64).collect(), workers, flags)?;

    let mut seeds_csv =
        String::from("seed,converged,outer_iters,sum_rate,bp_mse,max_sidelobe,mui\n");
    let mut ok: Vec<&SeedOutcome> = Vec::new();
    let mut failed = 0usize;
    for (seed, res) in &results {
        match res {
            Ok(o) => {
                seeds_csv.push_str(&format!(
                    "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                    seed,
                    o.report.converged,
                    o.report.outer_iters,
                    o.metrics.sum_rate,
                    o.metrics.bp_mse,
                    o.metrics.max_sidelobe,
                    o.metrics.mui,
                ));
                ok.push(o);
            }
            Err(e) => {
                failed += 1;
                seeds_csv.push_str(&format!("{seed},error,0,,,,\n"));
                eprintln!("seed {seed} failed: {e}");
            }
        }
    }
    if ok.is_empty() {
        bail!("all {seeds} seeds failed");
    }

    let curves = aggregate_curves(&ok);
    let hist = inner_histogram(&ok);
    let all_inner: Vec<usize> = ok.iter().flat_map(|o| o.report.inner_iters.clone()).collect();
    let within_10 =
        all_inner.iter().filter(|&&n| n <= 10).count() as f64 / all_inner.len().max(1) as f64;
    let summary = CampaignSummary {
        n_seeds: seeds,
        n_failed: failed,
        n_converged: ok.iter().filter(|o| o.report.converged).count(),
        mean_outer_iters: ok.iter().map(|o| o.report.outer_iters as f64).sum::<f64>()
            / ok.len() as f64,
        inner_within_10: within_10,
        mean_sum_rate: ok.iter().map(|o| o.metrics.sum_rate).sum::<f64>() / ok.len() as f64,
        mean_bp_mse: ok.iter().map(|o| o.metrics.bp_mse).sum::<f64>() / ok.len() as f64,
        mean_max_sidelobe: ok.iter().map(|o| o.metrics.max_sidelobe).sum::<f64>()
            / ok.len() as f64,
        wall_time_s: t0.elapsed().as_secs_f64(),
    };
    atomic_write(&out.join("seeds.csv"), seeds_csv.as_bytes())?;
    atomic_write(&out.join("curves.csv"), curves.as_bytes())?;
    atomic_write(&out.join("inner_hist.csv"), hist.as_bytes())?;
    atomic_write(
        &out.join("summary.json"),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    Ok(0)
}

type SeedResult = (u64, std::result::Result<SeedOutcome, String>);

fn run_parallel(
    cfg: &ProblemConfig,
    seeds: Vec<u64>,
    workers: usize,
    flags: SolveFlags,
) -> Result<Vec<SeedResult>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("building worker pool")?;
    Ok(pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| (seed, run_seed(cfg, seed, flags).map_err(|e| e.to_string())))
            .collect()
    }))
}

/// Mean and std of every trace per outer iteration; shorter runs are padded
/// by carrying their final value.
fn aggregate_curves(ok: &[&SeedOutcome]) -> String {
    let max_len = ok.iter().map(|o| o.report.outer_iters).max().unwrap_or(0);
    let fields: [(&str, fn(&OuterReport) -> &Vec<f64>); 7] = [
        ("alf", |r| &r.alf_trace),
        ("v", |r| &r.v_trace),
        ("e", |r| &r.e_trace),
        ("rho", |r| &r.rho_trace),
        ("sum_rate", |r| &r.rate_trace),
        ("bp_mse", |r| &r.bpmse_trace),
        ("max_sidelobe", |r| &r.maxsl_trace),
    ];
    let mut out = String::from("iter");
    for (name, _) in &fields {
        out.push_str(&format!(",mean_{name},std_{name}"));
    }
    out.push('\n');
    for i in 0..max_len {
        out.push_str(&format!("{}", i + 1));
        for (_, get) in &fields {
            let vals: Vec<f64> = ok
                .iter()
                .map(|o| {
                    let tr = get(&o.report);
                    tr[i.min(tr.len() - 1)]
                })
                .collect();
            let (m, s) = mean_std(&vals);
            out.push_str(&format!(",{m:.12e},{s:.12e}"));
        }
        out.push('\n');
    }
    out
}

fn inner_histogram(ok: &[&SeedOutcome]) -> String {
    let mut counts: std::collections::BTreeMap<usize, usize> = Default::default();
    for o in ok {
        for &n in &o.report.inner_iters {
            *counts.entry(n).or_default() += 1;
        }
    }
    let mut out = String::from("sweeps,count\n");
    for (sweeps, count) in counts {
        out.push_str(&format!("{sweeps},{count}\n"));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    KMax,
    PslrDb,
    Alpha,
    SnrDb,
}

impl std::str::FromStr for SweepAxis {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k_max" => Ok(Self::KMax),
            "pslr_db" => Ok(Self::PslrDb),
            "alpha" => Ok(Self::Alpha),
            "snr_db" => Ok(Self::SnrDb),
            other => bail!("unknown sweep axis '{other}' (expected k_max, pslr_db, alpha, snr_db)"),
        }
    }
}

fn apply_axis(cfg: &ProblemConfig, axis: SweepAxis, value: f64) -> Result<ProblemConfig> {
    let mut cfg = cfg.clone();
    match axis {
        SweepAxis::KMax => {
            if value.fract() != 0.0 || value < 1.0 {
                bail!("k_max sweep values must be positive integers");
            }
            cfg.k_max = value as usize;
        }
        SweepAxis::PslrDb => cfg.pslr_db = value,
        SweepAxis::Alpha => cfg.alpha = value,
        SweepAxis::SnrDb => cfg.sigma_n2 = 10f64.powf(-value / 10.0),
    }
    cfg.validate()
        .map_err(|e| anyhow!("sweep value {value}: {e}"))?;
    Ok(cfg)
}

pub fn cmd_sweep(
    config: &Path,
    axis: SweepAxis,
    values: &[f64],
    seeds: usize,
    workers: usize,
    out: &Path,
    flags: SolveFlags,
) -> Result<u8> {
    if values.is_empty() {
        bail!("--values must be nonempty");
    }
    if seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let base = effective(&load_config(config)?, flags);
    let axis_name = match axis {
        SweepAxis::KMax => "k_max",
        SweepAxis::PslrDb => "pslr_db",
        SweepAxis::Alpha => "alpha",
        SweepAxis::SnrDb => "snr_db",
    };
    let mut csv =
        String::from("axis,value,seed,converged,outer_iters,sum_rate,bp_mse,max_sidelobe\n");
    for &value in values {
        let cfg = apply_axis(&base, axis, value)?;
        let results = run_parallel(&cfg, (0..seeds as u64).collect(), workers, flags)?;
        for (seed, res) in results {
            match res {
                Ok(o) => csv.push_str(&format!(
                    "{axis_name},{value},{seed},{},{},{:.12e},{:.12e},{:.12e}\n",
                    o.report.converged,
                    o.report.outer_iters,
                    o.metrics.sum_rate,
                    o.metrics.bp_mse,
                    o.metrics.max_sidelobe,
                )),
                Err(e) => {
                    csv.push_str(&format!("{axis_name},{value},{seed},error,0,,,\n"));
                    eprintln!("value {value} seed {seed} failed: {e}");
                }
            }
        }
    }
    atomic_write(&out.join("sweep.csv"), csv.as_bytes())?;
    Ok(0)
}

/// Scene file: one scatterer per line "bin angle_deg amp_re amp_im";
/// blank lines and '#' comments ignored.
fn load_scene(path: &Path, k_min: usize, sigma_r2: f64) -> Result<SceneSpec> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading scene {}", path.display()))?;
    let mut scatterers = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 {
            bail!("scene {} line {}: expected 'bin angle_deg amp_re amp_im'", path.display(), ln + 1);
        }
        scatterers.push(Scatterer {
            bin: parts[0].parse().context("bad range bin")?,
            angle: parts[1].parse::<f64>().context("bad angle")?.to_radians(),
            amplitude: C64::new(
                parts[2].parse().context("bad amplitude")?,
                parts[3].parse().context("bad amplitude")?,
            ),
        });
    }
    if scatterers.is_empty() {
        bail!("scene {} has no scatterers", path.display());
    }
    let k_scene = scatterers
        .iter()
        .map(|s| s.bin.unsigned_abs() as usize)
        .max()
        .unwrap_or(0)
        .max(k_min);
    Ok(SceneSpec { scatterers, sigma_r2, k_scene })
}

pub fn cmd_image(
    config: &Path,
    scene_path: &Path,
    design_dir: Option<&Path>,
    snr_db: f64,
    out: &Path,
    flags: SolveFlags,
) -> Result<u8> {
    let cfg = effective(&load_config(config)?, flags);
    let (x, f) = match design_dir {
        Some(dir) => {
            let x_text = std::fs::read_to_string(dir.join("X.csv"))
                .with_context(|| format!("reading {}", dir.join("X.csv").display()))?;
            let f_text = std::fs::read_to_string(dir.join("F.csv"))
                .with_context(|| format!("reading {}", dir.join("F.csv").display()))?;
            (
                parse_complex_csv(&x_text, cfg.n_tx, cfg.block_len)?,
                parse_complex_csv(&f_text, cfg.n_rx, cfg.block_len)?,
            )
        }
        None => {
            let outcome = run_seed(&cfg, cfg.seed, flags)?;
            (outcome.state.x, outcome.state.f)
        }
    };
    let sigma_r2 = 10f64.powf(-snr_db / 10.0);
    let scene = load_scene(scene_path, cfg.k_max, sigma_r2)?;
    let shifts = isac_core::model::ShiftMatrixSet::new(cfg.block_len, scene.k_scene)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let echoes = simulate_echo(&scene, &x, &shifts, cfg.n_rx, &mut rng)?;
    let image = form_image(&echoes, &f, &default_angle_grid(ANGLE_POINTS))?;
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let csv_tmp = out.join(".image.csv.tmp");
    image.write_csv(&csv_tmp)?;
    std::fs::rename(&csv_tmp, out.join("image.csv"))?;
    let pgm_tmp = out.join(".image.pgm.tmp");
    image.write_pgm(&pgm_tmp)?;
    std::fs::rename(&pgm_tmp, out.join("image.pgm"))?;
    Ok(0)
}
