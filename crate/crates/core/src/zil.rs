//! Zero-divergence inference learning.
//!
//! Z-IL is inference learning with three conditions: value nodes start at
//! their forward predictions (zero error), the integration step is `γ = 1`,
//! and each parameter is updated exactly once, at the step where the output
//! error first reaches it.
//!
//! A leaf whose parents settle at arrival time `d` is updated from the state
//! at time `d` (after `d` inference steps). Arrival times come from:
//!
//! - [`ZilVariant::LayerIndexed`]: breadth-first distance from the output,
//!   the layer index of the original multilayer formulation.
//! - [`ZilVariant::LevelStructured`]: the level structure of a levelled
//!   graph. On levelled graphs the two coincide.
//!
//! Updates are collected against the fixed parameters and returned, never
//! applied mid-schedule.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, LeafRole, VertexId};
use crate::harness::report::UpdateReport;
use crate::numeric::canonical_sum;
use crate::params::LeafValues;
use crate::pc::{InitMode, PCState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZilVariant {
    LayerIndexed,
    LevelStructured,
}

impl ZilVariant {
    pub fn tag(self) -> &'static str {
        match self {
            ZilVariant::LayerIndexed => "zil_layer",
            ZilVariant::LevelStructured => "zil_level",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Every leaf updated at the final step instead of at its arrival time.
    NoLevelSchedule,
    /// Internal value nodes start at `μ + 0.1` instead of `μ`.
    NonzeroInitError,
    /// Integration step `γ = 0.5`.
    GammaHalf,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::NoLevelSchedule, Ablation::NonzeroInitError, Ablation::GammaHalf];

    pub fn tag(self) -> &'static str {
        match self {
            Ablation::NoLevelSchedule => "no_level_schedule",
            Ablation::NonzeroInitError => "nonzero_init_error",
            Ablation::GammaHalf => "gamma_half",
        }
    }
}

pub const ABLATION_PERTURBATION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ZilSchedule {
    pub variant: ZilVariant,
    /// Arrival time of the error signal at every vertex.
    pub arrival: Vec<usize>,
    /// `(leaf, t)` for every trainable leaf, ascending leaf id.
    pub update_times: Vec<(VertexId, usize)>,
    /// Number of inference steps run (the latest update time).
    pub steps: usize,
}

impl ZilSchedule {
    pub fn new(g: &Graph, variant: ZilVariant) -> Result<ZilSchedule> {
        if g.is_leaf(g.output()) {
            return Err(Error::OutputIsLeaf);
        }
        let arrival = match variant {
            ZilVariant::LayerIndexed => g.min_distances(),
            ZilVariant::LevelStructured => g.level_structure()?.levels,
        };
        let update_times: Vec<(VertexId, usize)> = g
            .leaves()
            .iter()
            .filter(|&&l| g.role(l) == Some(LeafRole::Param))
            .map(|&l| {
                let t = g.parents(l).iter().map(|e| arrival[e.parent.0]).min().unwrap_or(0);
                (l, t)
            })
            .collect();
        let steps = update_times.iter().map(|(_, t)| *t).max().unwrap_or(0);
        Ok(ZilSchedule { variant, arrival, update_times, steps })
    }
}

/// Snapshots of `x` and `ε` at every time `0..=steps`, plus the recorded
/// per-leaf updates.
#[derive(Debug, Clone)]
pub struct ZilTrace {
    pub arrival: Vec<usize>,
    pub gamma: f64,
    pub x: Vec<Vec<Vec<f64>>>,
    pub eps: Vec<Vec<Vec<f64>>>,
    pub leaf_updates: Vec<(VertexId, usize, Vec<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZilConfig {
    pub variant: ZilVariant,
    pub gamma: f64,
    /// Permits `γ ≠ 1`, which voids the exactness guarantee.
    pub allow_inexact_gamma: bool,
}

impl ZilConfig {
    pub fn new(variant: ZilVariant) -> Self {
        ZilConfig { variant, gamma: 1.0, allow_inexact_gamma: false }
    }
}

pub fn zil_train_step(
    g: &Graph,
    params: &LeafValues,
    target: f64,
    alpha: f64,
    variant: ZilVariant,
) -> Result<(UpdateReport, ZilTrace)> {
    zil_train_step_with(g, params, target, alpha, &ZilConfig::new(variant))
}

pub fn zil_train_step_with(
    g: &Graph,
    params: &LeafValues,
    target: f64,
    alpha: f64,
    cfg: &ZilConfig,
) -> Result<(UpdateReport, ZilTrace)> {
    if cfg.gamma != 1.0 && !cfg.allow_inexact_gamma {
        return Err(Error::BadGamma(cfg.gamma));
    }
    let schedule = ZilSchedule::new(g, cfg.variant)?;
    run_schedule(g, params, target, alpha, &schedule, cfg.gamma, 0.0, cfg.variant.tag())
}

/// Z-IL with one of its conditions deliberately broken. Uses the level
/// schedule on levelled graphs and the layer-indexed one otherwise.
pub fn zil_ablate(
    g: &Graph,
    params: &LeafValues,
    target: f64,
    alpha: f64,
    which: Ablation,
) -> Result<(UpdateReport, ZilTrace)> {
    let variant = if g.is_levelled() { ZilVariant::LevelStructured } else { ZilVariant::LayerIndexed };
    let mut schedule = ZilSchedule::new(g, variant)?;
    let (gamma, perturbation) = match which {
        Ablation::NoLevelSchedule => {
            let last = schedule.steps;
            schedule.update_times.iter_mut().for_each(|(_, t)| *t = last);
            (1.0, 0.0)
        }
        Ablation::NonzeroInitError => (1.0, ABLATION_PERTURBATION),
        Ablation::GammaHalf => (0.5, 0.0),
    };
    run_schedule(g, params, target, alpha, &schedule, gamma, perturbation, which.tag())
}

#[allow(clippy::too_many_arguments)]
fn run_schedule(
    g: &Graph,
    params: &LeafValues,
    target: f64,
    alpha: f64,
    schedule: &ZilSchedule,
    gamma: f64,
    perturbation: f64,
    tag: &str,
) -> Result<(UpdateReport, ZilTrace)> {
    let start = Instant::now();
    let mut state = PCState::init_perturbed(g, params, Some(target), InitMode::ZeroError, perturbation)?;
    let mut due: Vec<Vec<VertexId>> = vec![Vec::new(); schedule.steps + 1];
    for &(leaf, t) in &schedule.update_times {
        due[t].push(leaf);
    }

    let mut trace = ZilTrace {
        arrival: schedule.arrival.clone(),
        gamma,
        x: Vec::with_capacity(schedule.steps + 1),
        eps: Vec::with_capacity(schedule.steps + 1),
        leaf_updates: Vec::with_capacity(schedule.update_times.len()),
    };
    let mut leaf_updates: Vec<Option<Vec<f64>>> = vec![None; g.len()];
    for (t, leaves) in due.iter().enumerate() {
        trace.x.push(state.x.clone());
        trace.eps.push(state.eps.clone());
        for &leaf in leaves {
            let u = state.leaf_update(g, leaf, alpha);
            trace.leaf_updates.push((leaf, t, u.clone()));
            leaf_updates[leaf.0] = Some(u);
        }
        if t < schedule.steps {
            state.step(g, gamma)?;
        }
    }
    let mut report = UpdateReport::from_leaf_updates(g, tag, &leaf_updates, schedule.steps);
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((report, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub vertex: VertexId,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleCheck {
    pub holds: bool,
    pub violations: Vec<Violation>,
}

impl ScheduleCheck {
    fn from(violations: Vec<Violation>) -> Self {
        ScheduleCheck { holds: violations.is_empty(), violations }
    }
}

/// Before the error signal arrives (`t < arrival(i)`), every internal vertex
/// has exactly zero error and an unmoved value node.
pub fn check_quiet_before_arrival(trace: &ZilTrace, g: &Graph) -> ScheduleCheck {
    let mut violations = Vec::new();
    for v in g.internal() {
        let until = trace.arrival[v.0].min(trace.eps.len());
        for t in 0..until {
            let quiet = trace.eps[t][v.0].iter().all(|&e| e == 0.0) && trace.x[t][v.0] == trace.x[0][v.0];
            if !quiet {
                violations.push(Violation { vertex: v, t });
            }
        }
    }
    ScheduleCheck::from(violations)
}

/// At its arrival time `d`, a vertex's error equals
/// `γ Σ_{j ∈ P(i)} ε_{j,d−1}ᵀ ∂μ_j/∂x_i`, recomputed from the trace at `d − 1`.
/// Compared with relative tolerance `tol`.
pub fn check_arrival_error(trace: &ZilTrace, g: &Graph, tol: f64) -> ScheduleCheck {
    let mut violations = Vec::new();
    for v in g.internal() {
        let d = trace.arrival[v.0];
        if d == 0 || d >= trace.eps.len() {
            continue;
        }
        let (x_prev, eps_prev) = (&trace.x[d - 1], &trace.eps[d - 1]);
        let contribs: Vec<Vec<f64>> = g
            .parents(v)
            .iter()
            .map(|e| {
                let func = g.func(e.parent).expect("parent is internal");
                let inputs: Vec<&[f64]> = g.children(e.parent).iter().map(|c| x_prev[c.0].as_slice()).collect();
                func.vjp(&inputs, &eps_prev[e.parent.0], e.slot)
            })
            .collect();
        let predicted = canonical_sum(&contribs, g.dim(v));
        let ok = predicted
            .iter()
            .zip(&trace.eps[d][v.0])
            .all(|(p, e)| (trace.gamma * p - e).abs() <= tol * e.abs().max(1.0));
        if !ok {
            violations.push(Violation { vertex: v, t: d });
        }
    }
    ScheduleCheck::from(violations)
}
