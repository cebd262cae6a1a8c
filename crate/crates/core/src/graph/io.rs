//! JSON construction schema and DOT export.
//!
//! ```json
//! {
//!   "vertices": [
//!     { "id": 0, "name": "z1", "leaf": { "dim": 1, "role": "param" } },
//!     { "id": 1, "name": "sqrt", "op": { "fn": { "kind": "sqrt" }, "children": [0] } }
//!   ],
//!   "output": 1,
//!   "tie_groups": [ { "id": 0, "members": [3, 7] } ]
//! }
//! ```
//!
//! Vertex ids must be `0..n` in order. `children` lists the function's inputs
//! in argument order.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{ElemFn, Graph, VertexKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub vertices: Vec<VertexSpec>,
    pub output: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tie_groups: Vec<TieGroupSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexSpec {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub kind: VertexKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieGroupSpec {
    pub id: usize,
    pub members: Vec<usize>,
}

/// Graphviz rendering. Arrows point from a vertex to the inputs it reads;
/// identity vertices are filled green, leaves drawn as boxes.
pub fn to_dot(g: &Graph) -> String {
    let mut s = String::from("digraph G {\n  rankdir=TB;\n");
    for v in g.vertices() {
        let label = v.label().replace('"', "'");
        let attrs = match &v.kind {
            VertexKind::Leaf { dim, .. } => {
                let tie = v.tie_group.map(|t| format!(" [tie{t}]")).unwrap_or_default();
                format!("shape=box, label=\"{label} ({dim}){tie}\"")
            }
            VertexKind::Op { func: ElemFn::Identity, .. } => {
                format!("style=filled, fillcolor=palegreen, label=\"{label}\"")
            }
            VertexKind::Op { func, .. } => format!("label=\"{label}\\n{}\"", func.label()),
        };
        let _ = writeln!(s, "  {} [{attrs}];", v.id.0);
    }
    for v in g.vertices() {
        for (slot, c) in v.children().iter().enumerate() {
            let _ = writeln!(s, "  {} -> {} [label=\"{slot}\"];", v.id.0, c.0);
        }
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphBuilder, LeafRole, VertexId};

    #[test]
    fn json_schema_shape() {
        let text = r#"{
            "vertices": [
                {"id": 0, "name": "w", "leaf": {"dim": 2, "role": "param"}},
                {"id": 1, "name": "x", "leaf": {"dim": 2, "role": "input"}},
                {"id": 2, "op": {"fn": {"kind": "matvec", "rows": 1, "cols": 2}, "children": [0, 1]}},
                {"id": 3, "op": {"fn": {"kind": "activation", "name": "tanh"}, "children": [2]}}
            ],
            "output": 3
        }"#;
        let spec: GraphSpec = serde_json::from_str(text).unwrap();
        let g = Graph::from_spec(&spec).unwrap();
        assert_eq!(g.role(VertexId(1)), Some(LeafRole::Input));
        assert_eq!(g.dim(VertexId(2)), 1);
        let back: GraphSpec = serde_json::from_str(&serde_json::to_string(&g.to_spec()).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn dot_mentions_every_edge() {
        let mut b = GraphBuilder::new();
        let a = b.param("a", 1);
        let i = b.op("i", ElemFn::Identity, &[a]);
        let out = b.op("out", ElemFn::Square, &[i]);
        let dot = to_dot(&b.build(out).unwrap());
        assert!(dot.contains("2 -> 1"));
        assert!(dot.contains("1 -> 0"));
        assert!(dot.contains("palegreen"));
    }
}
