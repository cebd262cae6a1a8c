//! Wall-clock comparison of BP, plain IL and Z-IL on the same models.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::autodiff::backprop;
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::{code_version, config_hash};
use crate::pc::{il_train_step, Stopping};
use crate::zil::{zil_train_step, ZilVariant};
use crate::zoo::build_model;

/// Plain IL should cost at least this many Z-IL steps.
pub const IL_OVER_ZIL_MIN: f64 = 5.0;
/// Z-IL should cost at most this many BP steps.
pub const ZIL_OVER_BP_MAX: f64 = 3.0;

#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub model: String,
    pub seed: u64,
    pub algorithm: String,
    pub repetitions: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub std_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchResult {
    pub code_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub rows: Vec<TimingRow>,
    /// Per (model, seed): mean IL time over mean Z-IL time.
    pub il_over_zil: Vec<f64>,
    /// Per (model, seed): mean Z-IL time over mean BP time.
    pub zil_over_bp: Vec<f64>,
}

impl BenchResult {
    pub fn ratios_hold(&self) -> bool {
        self.il_over_zil.iter().all(|&r| r >= IL_OVER_ZIL_MIN) && self.zil_over_bp.iter().all(|&r| r <= ZIL_OVER_BP_MAX)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "model",
            "seed",
            "algorithm",
            "repetitions",
            "mean_ms",
            "median_ms",
            "std_ms",
            "config_hash",
            "code_version",
        ])?;
        for r in &self.rows {
            wtr.write_record([
                r.model.clone(),
                r.seed.to_string(),
                r.algorithm.clone(),
                r.repetitions.to_string(),
                format!("{:.6}", r.mean_ms),
                format!("{:.6}", r.median_ms),
                format!("{:.6}", r.std_ms),
                self.config_hash.clone(),
                self.code_version.clone(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

fn time<F: FnMut() -> Result<()>>(warmup: usize, reps: usize, mut f: F) -> Result<Vec<f64>> {
    for _ in 0..warmup {
        f()?;
    }
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        f()?;
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(samples)
}

fn stats(mut xs: Vec<f64>) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    xs.sort_by(f64::total_cmp);
    let mid = xs.len() / 2;
    let median = if xs.len().is_multiple_of(2) { 0.5 * (xs[mid - 1] + xs[mid]) } else { xs[mid] };
    (mean, median, var.sqrt())
}

/// Times one training step of each algorithm. Runs sequentially so that
/// timings are not distorted by contention. Z-IL runs the level schedule on
/// the levelled model; BP and IL run on the model as built.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<BenchResult> {
    cfg.validate()?;
    if cfg.il_steps < 20 {
        return Err(Error::Config(format!("il_steps must be at least 20, got {}", cfg.il_steps)));
    }
    if cfg.repetitions < 2 {
        return Err(Error::Config("need at least two repetitions".into()));
    }
    let mut rows = Vec::new();
    let mut il_over_zil = Vec::new();
    let mut zil_over_bp = Vec::new();
    for spec in &cfg.models {
        for &seed in &cfg.seeds {
            let m = build_model(&spec.with_seed(seed))?;
            let (lv, _) = m.levelled();
            let (a, reps, warm) = (cfg.alpha, cfg.repetitions, cfg.warmup);

            let bp = time(warm, reps, || backprop(&m.graph, &m.params, m.target, a).map(drop))?;
            let il = time(warm, reps, || {
                il_train_step(&m.graph, &m.params, m.target, a, cfg.gamma, Stopping::Fixed(cfg.il_steps)).map(drop)
            })?;
            let zil = time(warm, reps, || {
                zil_train_step(&lv.graph, &lv.params, lv.target, a, ZilVariant::LevelStructured).map(drop)
            })?;

            let mut means = Vec::new();
            for (name, samples) in [("bp", bp), ("il", il), ("zil_level", zil)] {
                let (mean_ms, median_ms, std_ms) = stats(samples);
                means.push(mean_ms);
                rows.push(TimingRow {
                    model: spec.label(),
                    seed,
                    algorithm: name.into(),
                    repetitions: reps,
                    mean_ms,
                    median_ms,
                    std_ms,
                });
            }
            il_over_zil.push(means[1] / means[2]);
            zil_over_bp.push(means[2] / means[0]);
        }
    }
    Ok(BenchResult {
        code_version: code_version(),
        config_hash: config_hash(cfg),
        config: cfg.clone(),
        rows,
        il_over_zil,
        zil_over_bp,
    })
}
