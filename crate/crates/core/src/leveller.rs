//! Levelling by identity insertion.
//!
//! Every edge `p → c` is padded with `L(c) − L(p) − 1` identity vertices,
//! where `L` is the longest root-path length in the original graph. Afterwards
//! every root→vertex path to `c` has length exactly `L(c)`, and since
//! identities pass values and error signals through unchanged, the function
//! and its BP updates are untouched.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{ElemFn, Graph, LevelStructure, VertexId, VertexKind, VertexSpec};

/// Default vertex-count cap for [`audit_paths`].
pub const AUDIT_LIMIT: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EdgePadding {
    pub parent: VertexId,
    pub child: VertexId,
    pub slot: usize,
    pub padding: usize,
}

#[derive(Debug, Clone)]
pub struct LevelReport {
    pub inserted: usize,
    /// One entry per original edge, in topological order of the parent.
    pub edge_paddings: Vec<EdgePadding>,
    pub structure: LevelStructure,
}

impl LevelReport {
    pub fn summary(&self) -> String {
        let padded = self.edge_paddings.iter().filter(|e| e.padding > 0).count();
        format!(
            "inserted {} identity vertices on {} of {} edges; {} levels",
            self.inserted,
            padded,
            self.edge_paddings.len(),
            self.structure.max_level + 1
        )
    }
}

pub fn level(g: &Graph) -> (Graph, LevelReport) {
    let (_, longest) = g.path_length_bounds();
    let mut spec = g.to_spec();
    let mut edge_paddings = Vec::new();
    let mut next_id = g.len();

    for &p in g.topological_sort() {
        let children = g.children(p).to_vec();
        for (slot, &c) in children.iter().enumerate() {
            let padding = longest[c.0] - longest[p.0] - 1;
            edge_paddings.push(EdgePadding { parent: p, child: c, slot, padding });
            if padding == 0 {
                continue;
            }
            // chain p → id_1 → … → id_padding → c
            let first = VertexId(next_id);
            for k in 0..padding {
                let below = if k + 1 == padding { c } else { VertexId(next_id + 1) };
                spec.vertices.push(VertexSpec {
                    id: next_id,
                    name: Some(format!("id{}_{}.{}#{}", p.0, c.0, slot, k + 1)),
                    kind: VertexKind::Op { func: ElemFn::Identity, children: vec![below] },
                });
                next_id += 1;
            }
            if let VertexKind::Op { children, .. } = &mut spec.vertices[p.0].kind {
                children[slot] = first;
            }
        }
    }

    let levelled = Graph::from_spec(&spec).expect("identity insertion preserves validity");
    let structure = levelled.level_structure().expect("padded graph is levelled");
    let inserted = levelled.len() - g.len();
    (levelled, LevelReport { inserted, edge_paddings, structure })
}

/// Exhaustive enumeration of every root→vertex path length. Exponential in
/// the worst case; refuses graphs with more than `limit` vertices.
pub fn audit_paths(g: &Graph, limit: usize) -> Result<BTreeMap<VertexId, BTreeSet<usize>>> {
    if g.len() > limit {
        return Err(Error::TooLarge { count: g.len(), limit });
    }
    let mut lengths: BTreeMap<VertexId, BTreeSet<usize>> = BTreeMap::new();
    let mut stack = vec![(g.output(), 0usize)];
    while let Some((v, len)) = stack.pop() {
        lengths.entry(v).or_default().insert(len);
        for &c in g.children(v) {
            stack.push((c, len + 1));
        }
    }
    Ok(lengths)
}
