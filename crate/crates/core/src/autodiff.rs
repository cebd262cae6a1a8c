//! Forward evaluation and reverse differentiation.
//!
//! The loss is `E = ½ (μ_out − y)²`. Error signals `δ_i = ∂E/∂μ_i` are pushed
//! from the output toward the leaves in topological order, and every trainable
//! leaf is updated by `Δz = −α δ`.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Graph, LeafRole, ParamKey, VertexId};
use crate::harness::report::UpdateReport;
use crate::numeric::canonical_sum;
use crate::params::LeafValues;

/// Forward value `μ_i` of every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub mu: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self, g: &Graph) -> f64 {
        self.mu[g.output().0][0]
    }
}

/// Gathers the current values of `v`'s children, in argument order.
pub(crate) fn inputs_of<'a>(g: &Graph, v: VertexId, values: &'a [Vec<f64>]) -> Vec<&'a [f64]> {
    g.children(v).iter().map(|c| values[c.0].as_slice()).collect()
}

/// Applies the function of internal vertex `v` to `values` of its children.
pub(crate) fn eval_vertex(g: &Graph, v: VertexId, values: &[Vec<f64>]) -> Result<Vec<f64>> {
    let func = g.func(v).expect("eval_vertex on a leaf");
    func.eval(&inputs_of(g, v, values)).map_err(|value| Error::Domain { vertex: v, value })
}

pub fn forward(g: &Graph, params: &LeafValues) -> Result<ForwardTrace> {
    params.validate(g)?;
    let mut mu: Vec<Vec<f64>> = vec![Vec::new(); g.len()];
    for &v in g.topological_sort().iter().rev() {
        mu[v.0] = match params.get(v) {
            Some(val) if g.is_leaf(v) => val.to_vec(),
            _ => eval_vertex(g, v, &mu)?,
        };
    }
    Ok(ForwardTrace { mu })
}

#[derive(Debug, Clone)]
pub struct BPReport {
    pub trace: ForwardTrace,
    /// `δ_i = ∂E/∂μ_i` for every vertex, leaves included.
    pub delta: Vec<Vec<f64>>,
    pub update: UpdateReport,
    pub loss: f64,
}

pub fn backprop(g: &Graph, params: &LeafValues, target: f64, alpha: f64) -> Result<BPReport> {
    let start = Instant::now();
    let trace = forward(g, params)?;
    let out = g.output();
    let residual = trace.mu[out.0][0] - target;
    let loss = 0.5 * residual * residual;

    let mut contribs: Vec<Vec<Vec<f64>>> = vec![Vec::new(); g.len()];
    let mut delta: Vec<Vec<f64>> = vec![Vec::new(); g.len()];
    for &v in g.topological_sort() {
        delta[v.0] = if v == out { vec![residual] } else { canonical_sum(&contribs[v.0], g.dim(v)) };
        if let Some(func) = g.func(v) {
            let inputs = inputs_of(g, v, &trace.mu);
            for (slot, c) in g.children(v).iter().enumerate() {
                let contrib = func.vjp(&inputs, &delta[v.0], slot);
                contribs[c.0].push(contrib);
            }
        }
    }

    let leaf_updates: Vec<Option<Vec<f64>>> = (0..g.len())
        .map(|i| {
            let v = VertexId(i);
            (g.role(v) == Some(LeafRole::Param)).then(|| delta[i].iter().map(|d| -alpha * d).collect())
        })
        .collect();
    let mut update = UpdateReport::from_leaf_updates(g, "bp", &leaf_updates, 0);
    update.wall_time = start.elapsed().as_secs_f64();
    Ok(BPReport { trace, delta, update, loss })
}

pub fn loss(g: &Graph, params: &LeafValues, target: f64) -> Result<f64> {
    let r = forward(g, params)?.output(g) - target;
    Ok(0.5 * r * r)
}

#[derive(Debug, Clone, Serialize)]
pub struct GradEntry {
    pub param: ParamKey,
    pub component: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub entries: Vec<GradEntry>,
    pub max_rel_error: f64,
}

impl GradCheck {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["param", "component", "analytic", "numeric", "rel_error"])?;
        for e in &self.entries {
            wtr.write_record([
                e.param.to_string(),
                e.component.to_string(),
                format!("{:e}", e.analytic),
                format!("{:e}", e.numeric),
                format!("{:e}", e.rel_error),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Compares BP gradients with central differences of the loss, one
/// parameter component at a time. Tied members move together.
pub fn grad_check(g: &Graph, params: &LeafValues, target: f64, h: f64) -> Result<GradCheck> {
    let bp = backprop(g, params, target, 1.0)?;
    let mut entries = Vec::new();
    for (p, u) in g.parameters().iter().zip(&bp.update.updates) {
        for k in 0..p.dim {
            let perturbed = |step: f64| -> Result<f64> {
                let mut vals = params.clone();
                for m in &p.members {
                    vals.get_mut(*m).ok_or(Error::MissingParam(*m))?[k] += step;
                }
                loss(g, &vals, target)
            };
            let numeric = (perturbed(h)? - perturbed(-h)?) / (2.0 * h);
            let analytic = -u.delta[k];
            let rel_error = (analytic - numeric).abs() / analytic.abs().max(1.0);
            entries.push(GradEntry { param: p.key, component: k, analytic, numeric, rel_error });
        }
    }
    let max_rel_error = entries.iter().map(|e| e.rel_error).fold(0.0, f64::max);
    Ok(GradCheck { entries, max_rel_error })
}
