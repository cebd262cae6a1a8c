//! Divergence tables: Z-IL (and its ablations) against BP.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::autodiff::backprop;
use crate::error::Result;
use crate::harness::config::ExperimentConfig;
use crate::harness::report::divergence;
use crate::harness::{code_version, config_hash};
use crate::zil::{check_quiet_before_arrival, zil_ablate, zil_train_step, Ablation, ZilSchedule, ZilVariant};
use crate::zoo::{build_model, Model, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// Divergence at most the configured tolerance.
    Zero,
    /// Divergence strictly above the positive threshold.
    Positive,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteRow {
    pub model: String,
    pub family: String,
    pub seed: u64,
    /// `raw` or `levelled`.
    pub graph: String,
    pub algorithm: String,
    pub divergence: f64,
    pub expected: Expectation,
    pub pass: bool,
    /// Quiet-before-arrival violations in the Z-IL trace (premise-breaking ablations
    /// and unlevelled runs are expected to have some).
    pub quiet_violations: usize,
    pub wall_time_s: f64,
    pub config_hash: String,
    pub code_version: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub code_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub rows: Vec<SuiteRow>,
}

impl SuiteResult {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SuiteRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    /// CSV with one row per (model, seed, algorithm); the last column holds
    /// the compact JSON configuration.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let cfg = serde_json::to_string(&self.config)?;
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "model",
            "family",
            "seed",
            "graph",
            "algorithm",
            "divergence",
            "expected",
            "pass",
            "quiet_violations",
            "wall_time_s",
            "config_hash",
            "code_version",
            "config",
        ])?;
        for r in &self.rows {
            wtr.write_record([
                r.model.clone(),
                r.family.clone(),
                r.seed.to_string(),
                r.graph.clone(),
                r.algorithm.clone(),
                format!("{:e}", r.divergence),
                format!("{:?}", r.expected).to_lowercase(),
                r.pass.to_string(),
                r.quiet_violations.to_string(),
                format!("{:e}", r.wall_time_s),
                r.config_hash.clone(),
                r.code_version.clone(),
                cfg.clone(),
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

struct RowContext<'a> {
    cfg: &'a ExperimentConfig,
    spec: &'a ModelSpec,
    seed: u64,
    hash: &'a str,
    version: &'a str,
}

impl RowContext<'_> {
    #[allow(clippy::too_many_arguments)]
    fn row(
        &self,
        graph: &str,
        algorithm: &str,
        divergence: f64,
        expected: Expectation,
        quiet_violations: usize,
        wall_time_s: f64,
    ) -> SuiteRow {
        let pass = match expected {
            Expectation::Zero => divergence <= self.cfg.tolerance,
            Expectation::Positive => divergence > self.cfg.positive_threshold,
        };
        SuiteRow {
            model: self.spec.label(),
            family: self.spec.family.to_string(),
            seed: self.seed,
            graph: graph.into(),
            algorithm: algorithm.into(),
            divergence,
            expected,
            pass,
            quiet_violations,
            wall_time_s,
            config_hash: self.hash.into(),
            code_version: self.version.into(),
        }
    }
}

fn jobs(cfg: &ExperimentConfig) -> Vec<(ModelSpec, u64)> {
    cfg.models.iter().flat_map(|m| cfg.seeds.iter().map(move |&s| (m.clone(), s))).collect()
}

fn run_rows<F>(cfg: &ExperimentConfig, per_job: F) -> Result<SuiteResult>
where
    F: Fn(&RowContext, &Model) -> Result<Vec<SuiteRow>> + Sync,
{
    cfg.validate()?;
    let hash = config_hash(cfg);
    let version = code_version();
    let chunks: Vec<Vec<SuiteRow>> = jobs(cfg)
        .par_iter()
        .map(|(spec, seed)| {
            let model = build_model(&spec.with_seed(*seed))?;
            let ctx = RowContext { cfg, spec, seed: *seed, hash: &hash, version: &version };
            per_job(&ctx, &model)
        })
        .collect::<Result<_>>()?;
    Ok(SuiteResult {
        code_version: version.clone(),
        config_hash: hash.clone(),
        config: cfg.clone(),
        rows: chunks.into_iter().flatten().collect(),
    })
}

/// Layer-indexed Z-IL on each model as built (exact iff the graph is
/// levelled), and level-scheduled Z-IL on the levelled version (always
/// exact).
pub fn run_equivalence_suite(cfg: &ExperimentConfig) -> Result<SuiteResult> {
    run_rows(cfg, |ctx, model| {
        let alpha = ctx.cfg.alpha;
        let bp = backprop(&model.graph, &model.params, model.target, alpha)?;

        let (raw, raw_trace) =
            zil_train_step(&model.graph, &model.params, model.target, alpha, ZilVariant::LayerIndexed)?;
        let expected = if model.graph.is_levelled() { Expectation::Zero } else { Expectation::Positive };
        let raw_row = ctx.row(
            "raw",
            ZilVariant::LayerIndexed.tag(),
            divergence(&bp.update, &raw)?,
            expected,
            check_quiet_before_arrival(&raw_trace, &model.graph).violations.len(),
            raw.wall_time,
        );

        let (lv, _) = model.levelled();
        let bp_lv = backprop(&lv.graph, &lv.params, lv.target, alpha)?;
        let (gen, gen_trace) = zil_train_step(&lv.graph, &lv.params, lv.target, alpha, ZilVariant::LevelStructured)?;
        let lv_row = ctx.row(
            "levelled",
            ZilVariant::LevelStructured.tag(),
            divergence(&bp_lv.update, &gen)?,
            Expectation::Zero,
            check_quiet_before_arrival(&gen_trace, &lv.graph).violations.len(),
            gen.wall_time,
        );
        Ok(vec![raw_row, lv_row])
    })
}

/// Each ablation on the levelled version of every model. Breaking any one
/// condition must produce a nonzero divergence whenever the schedule spans
/// more than one update time.
pub fn run_ablation_suite(cfg: &ExperimentConfig) -> Result<SuiteResult> {
    run_rows(cfg, |ctx, model| {
        let alpha = ctx.cfg.alpha;
        let (lv, _) = model.levelled();
        let bp = backprop(&lv.graph, &lv.params, lv.target, alpha)?;
        let schedule = ZilSchedule::new(&lv.graph, ZilVariant::LevelStructured)?;
        let first = schedule.update_times.first().map(|(_, t)| *t);
        let multi_level = schedule.update_times.iter().any(|(_, t)| Some(*t) != first);
        let expected = if multi_level { Expectation::Positive } else { Expectation::Zero };
        Ablation::ALL
            .iter()
            .map(|&which| {
                let (r, trace) = zil_ablate(&lv.graph, &lv.params, lv.target, alpha, which)?;
                Ok(ctx.row(
                    "levelled",
                    which.tag(),
                    divergence(&bp.update, &r)?,
                    expected,
                    check_quiet_before_arrival(&trace, &lv.graph).violations.len(),
                    r.wall_time,
                ))
            })
            .collect()
    })
}
