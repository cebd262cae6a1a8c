use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, ParamKey, VertexId};
use crate::harness::report::UpdateReport;

/// Values of every leaf of a graph, tie groups expanded to their members.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LeafValues(BTreeMap<VertexId, Vec<f64>>);

impl LeafValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, leaf: VertexId, value: Vec<f64>) {
        self.0.insert(leaf, value);
    }

    pub fn get(&self, leaf: VertexId) -> Option<&[f64]> {
        self.0.get(&leaf).map(|v| v.as_slice())
    }

    pub fn get_mut(&mut self, leaf: VertexId) -> Option<&mut Vec<f64>> {
        self.0.get_mut(&leaf)
    }

    pub fn iter(&self) -> impl Iterator<Item = (VertexId, &[f64])> {
        self.0.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    /// Sets a parameter, writing the same value into every tied member.
    pub fn set_param(&mut self, g: &Graph, key: ParamKey, value: Vec<f64>) {
        let p = g.parameters().iter().find(|p| p.key == key).expect("unknown parameter");
        for &m in &p.members {
            self.0.insert(m, value.clone());
        }
    }

    pub fn param(&self, g: &Graph, key: ParamKey) -> Option<&[f64]> {
        let p = g.parameters().iter().find(|p| p.key == key)?;
        self.get(p.members[0])
    }

    /// Checks coverage, dimensions and tie consistency.
    pub fn validate(&self, g: &Graph) -> Result<()> {
        for &l in g.leaves() {
            let v = self.get(l).ok_or(Error::MissingParam(l))?;
            if v.len() != g.dim(l) {
                return Err(Error::ShapeMismatch(format!("leaf {l} expects {} values, got {}", g.dim(l), v.len())));
            }
        }
        for tg in g.tie_groups() {
            let first = tg.members[0];
            for &m in &tg.members[1..] {
                if self.get(m) != self.get(first) {
                    return Err(Error::TieMismatch(first, m));
                }
            }
        }
        Ok(())
    }

    /// Parameters after applying an update (`ζ + Δζ`).
    pub fn applied(&self, g: &Graph, update: &UpdateReport) -> LeafValues {
        let mut next = self.clone();
        for (p, u) in g.parameters().iter().zip(&update.updates) {
            for &m in &p.members {
                if let Some(v) = next.get_mut(m) {
                    for (x, d) in v.iter_mut().zip(&u.delta) {
                        *x += d;
                    }
                }
            }
        }
        next
    }
}
