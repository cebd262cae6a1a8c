//! Per-parameter weight updates and the divergence between two of them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, ParamKey};
use crate::numeric::l2_norm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamUpdate {
    pub key: ParamKey,
    pub delta: Vec<f64>,
}

/// Weight deltas from one training step, in the graph's canonical parameter
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub algorithm: String,
    pub updates: Vec<ParamUpdate>,
    /// Seconds spent producing the update; zero when not measured.
    pub wall_time: f64,
    /// Inference steps (0 for BP).
    pub steps: usize,
}

impl UpdateReport {
    /// Collects per-leaf updates into parameter updates. Tied members are
    /// summed in ascending member order; input leaves are skipped.
    pub fn from_leaf_updates(
        g: &Graph,
        algorithm: impl Into<String>,
        leaf_updates: &[Option<Vec<f64>>],
        steps: usize,
    ) -> Self {
        let updates = g
            .parameters()
            .iter()
            .map(|p| {
                let mut delta = vec![0.0; p.dim];
                for m in &p.members {
                    if let Some(u) = &leaf_updates[m.0] {
                        for (d, x) in delta.iter_mut().zip(u) {
                            *d += x;
                        }
                    }
                }
                ParamUpdate { key: p.key, delta }
            })
            .collect();
        UpdateReport { algorithm: algorithm.into(), updates, wall_time: 0.0, steps }
    }

    pub fn get(&self, key: ParamKey) -> Option<&[f64]> {
        self.updates.iter().find(|u| u.key == key).map(|u| u.delta.as_slice())
    }

    pub fn flat(&self) -> Vec<f64> {
        self.updates.iter().flat_map(|u| u.delta.iter().copied()).collect()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(self.flat())
    }
}

/// Euclidean distance between the full update vectors of two reports.
pub fn divergence(a: &UpdateReport, b: &UpdateReport) -> Result<f64> {
    if a.updates.len() != b.updates.len() {
        return Err(Error::ShapeMismatch(format!("{} parameters vs {}", a.updates.len(), b.updates.len())));
    }
    let mut diffs = Vec::new();
    for (ua, ub) in a.updates.iter().zip(&b.updates) {
        if ua.key != ub.key || ua.delta.len() != ub.delta.len() {
            return Err(Error::ShapeMismatch(format!("parameter {} vs {}", ua.key, ub.key)));
        }
        diffs.extend(ua.delta.iter().zip(&ub.delta).map(|(x, y)| x - y));
    }
    Ok(l2_norm(diffs))
}

/// Angle in degrees between two update vectors.
pub fn angle_degrees(a: &UpdateReport, b: &UpdateReport) -> f64 {
    let (fa, fb) = (a.flat(), b.flat());
    let dot: f64 = fa.iter().zip(&fb).map(|(x, y)| x * y).sum();
    let cos = dot / (l2_norm(fa) * l2_norm(fb));
    cos.clamp(-1.0, 1.0).acos().to_degrees()
}
