//! Predictive-coding dynamics on a computational graph.
//!
//! Every internal vertex carries a value node `x`, a prediction
//! `μ = g({x_c})` computed from its children's value nodes, and an error
//! `ε = x − μ`. Leaves hold their parameter value with `μ = ζ` and `ε = 0`.
//! Inference descends the energy `F = ½ Σ ε²` with synchronous updates
//!
//! ```text
//! Δx_i = γ (−ε_i + Σ_{j ∈ P(i)} ε_jᵀ ∂μ_j/∂x_i)
//! ```
//!
//! all computed from the state at time `t` and applied together. A clamped
//! output keeps `x_out = y` forever.

use std::io::Write;
use std::time::Instant;

use crate::autodiff::{eval_vertex, forward, inputs_of};
use crate::error::{Error, Result};
use crate::graph::{Graph, LeafRole, VertexId};
use crate::harness::report::UpdateReport;
use crate::numeric::{canonical_sum, is_zero};
use crate::params::LeafValues;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Forward pass, then `x = μ` so every error starts at zero.
    ZeroError,
    /// All value nodes start at zero.
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PCState {
    pub x: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub eps: Vec<Vec<f64>>,
    pub t: usize,
    pub clamped_output: Option<f64>,
}

impl PCState {
    pub fn init(g: &Graph, params: &LeafValues, target: Option<f64>, mode: InitMode) -> Result<PCState> {
        Self::init_perturbed(g, params, target, mode, 0.0)
    }

    /// As [`PCState::init`], with `perturbation` added to the initial value
    /// node of every internal, unclamped vertex.
    pub fn init_perturbed(
        g: &Graph,
        params: &LeafValues,
        target: Option<f64>,
        mode: InitMode,
        perturbation: f64,
    ) -> Result<PCState> {
        if g.is_leaf(g.output()) {
            return Err(Error::OutputIsLeaf);
        }
        let n = g.len();
        let mut x: Vec<Vec<f64>> = match mode {
            InitMode::ZeroError => forward(g, params)?.mu,
            InitMode::Free => {
                params.validate(g)?;
                (0..n)
                    .map(|i| {
                        let v = VertexId(i);
                        match params.get(v) {
                            Some(val) if g.is_leaf(v) => val.to_vec(),
                            _ => vec![0.0; g.dim(v)],
                        }
                    })
                    .collect()
            }
        };
        if perturbation != 0.0 {
            for v in g.internal() {
                if v != g.output() || target.is_none() {
                    x[v.0].iter_mut().for_each(|e| *e += perturbation);
                }
            }
        }
        if let Some(y) = target {
            x[g.output().0] = vec![y];
        }
        Self::from_values(g, x, target)
    }

    /// State with the given value nodes; predictions and errors are derived.
    /// With a target, the output value node is overwritten by it.
    pub fn from_values(g: &Graph, mut x: Vec<Vec<f64>>, target: Option<f64>) -> Result<PCState> {
        let n = g.len();
        if x.len() != n || (0..n).any(|i| x[i].len() != g.dim(VertexId(i))) {
            return Err(Error::ShapeMismatch("value nodes do not match the graph".into()));
        }
        if let Some(y) = target {
            x[g.output().0] = vec![y];
        }
        let mut state = PCState { mu: vec![Vec::new(); n], eps: vec![Vec::new(); n], x, t: 0, clamped_output: target };
        for i in 0..n {
            state.refresh(g, VertexId(i))?;
        }
        Ok(state)
    }

    fn refresh(&mut self, g: &Graph, v: VertexId) -> Result<()> {
        if g.is_leaf(v) {
            self.mu[v.0] = self.x[v.0].clone();
            self.eps[v.0] = vec![0.0; g.dim(v)];
        } else {
            self.mu[v.0] = eval_vertex(g, v, &self.x)?;
            self.eps[v.0] = self.x[v.0].iter().zip(&self.mu[v.0]).map(|(x, m)| x - m).collect();
        }
        Ok(())
    }

    pub fn energy(&self, g: &Graph) -> f64 {
        0.5 * g.internal().flat_map(|v| self.eps[v.0].iter()).map(|e| e * e).sum::<f64>()
    }

    fn is_clamped(&self, g: &Graph, v: VertexId) -> bool {
        v == g.output() && self.clamped_output.is_some()
    }

    /// `Σ_{j ∈ P(v)} ε_jᵀ ∂μ_j/∂x_v` from the current state: the feedback a
    /// vertex (or a leaf, for parameter updates) receives from its parents.
    pub fn feedback(&self, g: &Graph, v: VertexId) -> Vec<f64> {
        let contribs: Vec<Vec<f64>> = g
            .parents(v)
            .iter()
            .filter(|e| !is_zero(&self.eps[e.parent.0]))
            .map(|e| {
                let func = g.func(e.parent).expect("parent is internal");
                func.vjp(&inputs_of(g, e.parent, &self.x), &self.eps[e.parent.0], e.slot)
            })
            .collect();
        canonical_sum(&contribs, g.dim(v))
    }

    /// One synchronous inference step. Returns the largest `|Δx|`.
    ///
    /// A vertex whose own error and whose parents' errors are all exactly zero
    /// has `Δx = 0`; such vertices are skipped, and predictions are recomputed
    /// only where a child moved.
    pub fn step(&mut self, g: &Graph, gamma: f64) -> Result<f64> {
        let n = g.len();
        let nonzero: Vec<bool> = (0..n).map(|i| !is_zero(&self.eps[i])).collect();
        let mut moves: Vec<(VertexId, Vec<f64>)> = Vec::new();
        for v in g.internal() {
            if self.is_clamped(g, v) {
                continue;
            }
            let fed = g.parents(v).iter().any(|e| nonzero[e.parent.0]);
            if !nonzero[v.0] && !fed {
                continue;
            }
            let fb = self.feedback(g, v);
            let dx: Vec<f64> = self.eps[v.0].iter().zip(&fb).map(|(e, f)| gamma * (-e + f)).collect();
            moves.push((v, dx));
        }

        let mut max_dx = 0.0f64;
        let mut moved = vec![false; n];
        for (v, dx) in moves {
            for (xi, d) in self.x[v.0].iter_mut().zip(&dx) {
                *xi += d;
                max_dx = max_dx.max(d.abs());
            }
            moved[v.0] = true;
        }
        for v in g.internal() {
            if moved[v.0] || g.children(v).iter().any(|c| moved[c.0]) {
                self.refresh(g, v)?;
            }
        }
        self.t += 1;
        Ok(max_dx)
    }

    /// Parameter update `α Σ_{j ∈ P(i)} ε_jᵀ ∂μ_j/∂ζ_i` for one leaf.
    pub fn leaf_update(&self, g: &Graph, leaf: VertexId, alpha: f64) -> Vec<f64> {
        self.feedback(g, leaf).into_iter().map(|f| alpha * f).collect()
    }
}

pub fn init_state(g: &Graph, params: &LeafValues, target: Option<f64>, mode: InitMode) -> Result<PCState> {
    PCState::init(g, params, target, mode)
}

pub fn inference_step(mut state: PCState, g: &Graph, gamma: f64) -> Result<PCState> {
    state.step(g, gamma)?;
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stopping {
    Fixed(usize),
    /// Stop once `‖Δx‖_∞ < tol`, or after `max_steps`.
    Converged {
        tol: f64,
        max_steps: usize,
    },
}

/// Per-step record of `(t, F, ε)` for CSV export.
#[derive(Debug, Clone, Default)]
pub struct PcTrace {
    pub rows: Vec<(usize, f64, Vec<f64>)>,
}

impl PcTrace {
    pub fn record(&mut self, g: &Graph, s: &PCState) {
        let eps = g.internal().flat_map(|v| s.eps[v.0].iter().copied()).collect();
        self.rows.push((s.t, s.energy(g), eps));
    }

    pub fn write_csv<W: Write>(&self, g: &Graph, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string(), "F".to_string()];
        for v in g.internal() {
            let d = g.dim(v);
            for k in 0..d {
                header.push(if d == 1 { format!("eps_{}", v.0) } else { format!("eps_{}_{k}", v.0) });
            }
        }
        wtr.write_record(&header)?;
        for (t, f, eps) in &self.rows {
            let mut rec = vec![t.to_string(), format!("{f:e}")];
            rec.extend(eps.iter().map(|e| format!("{e:e}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Runs inference until the stopping rule fires, recording the trace if asked.
pub fn relax(
    state: &mut PCState,
    g: &Graph,
    gamma: f64,
    stopping: Stopping,
    mut trace: Option<&mut PcTrace>,
) -> Result<usize> {
    if let Some(tr) = trace.as_deref_mut() {
        tr.record(g, state);
    }
    let (max_steps, tol) = match stopping {
        Stopping::Fixed(t) => (t, None),
        Stopping::Converged { tol, max_steps } => (max_steps, Some(tol)),
    };
    let mut steps = 0;
    while steps < max_steps {
        let dx = state.step(g, gamma)?;
        steps += 1;
        if let Some(tr) = trace.as_deref_mut() {
            tr.record(g, state);
        }
        if tol.is_some_and(|tol| dx < tol) {
            break;
        }
    }
    Ok(steps)
}

/// Plain inference learning: zero-error init, clamp, relax, then update every
/// parameter from the settled errors. Parameters are not mutated.
pub fn il_train_step(
    g: &Graph,
    params: &LeafValues,
    target: f64,
    alpha: f64,
    gamma: f64,
    stopping: Stopping,
) -> Result<UpdateReport> {
    let start = Instant::now();
    let mut state = PCState::init(g, params, Some(target), InitMode::ZeroError)?;
    let steps = relax(&mut state, g, gamma, stopping, None)?;
    let leaf_updates: Vec<Option<Vec<f64>>> = (0..g.len())
        .map(|i| {
            let v = VertexId(i);
            (g.role(v) == Some(LeafRole::Param)).then(|| state.leaf_update(g, v, alpha))
        })
        .collect();
    let mut report = UpdateReport::from_leaf_updates(g, "il", &leaf_updates, steps);
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}
