//! Computational-graph data model.
//!
//! Edges are stored child-ward: an internal vertex lists the vertices its
//! function reads (`C(i)`), and the parent index `P(i)` is derived as the
//! exact transpose. The output vertex is the unique root; the forward pass
//! walks the topological order in reverse.

mod elem;
mod io;

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use elem::{Activation, ElemFn};
pub use io::{to_dot, GraphSpec, TieGroupSpec, VertexSpec};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub usize);

impl VertexId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Leaves are either trainable parameters or fixed data inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafRole {
    Param,
    Input,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexKind {
    Leaf {
        dim: usize,
        role: LeafRole,
    },
    Op {
        #[serde(rename = "fn")]
        func: ElemFn,
        children: Vec<VertexId>,
    },
}

#[derive(Debug, Clone)]
pub struct Vertex {
    pub id: VertexId,
    pub name: Option<String>,
    pub kind: VertexKind,
    /// Dimension of the value carried by the vertex.
    pub dim: usize,
    pub tie_group: Option<usize>,
}

impl Vertex {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, VertexKind::Leaf { .. })
    }

    pub fn children(&self) -> &[VertexId] {
        match &self.kind {
            VertexKind::Leaf { .. } => &[],
            VertexKind::Op { children, .. } => children,
        }
    }

    pub fn func(&self) -> Option<&ElemFn> {
        match &self.kind {
            VertexKind::Leaf { .. } => None,
            VertexKind::Op { func, .. } => Some(func),
        }
    }

    pub fn label(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => self.id.to_string(),
        }
    }
}

/// One edge seen from the child: `parent` reads the child in input `slot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParentEdge {
    pub parent: VertexId,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TieGroup {
    pub id: usize,
    pub members: Vec<VertexId>,
}

/// A trainable parameter: either a free leaf or a whole tie group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKey {
    Leaf(VertexId),
    Tied(usize),
}

impl fmt::Display for ParamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamKey::Leaf(v) => write!(f, "{v}"),
            ParamKey::Tied(g) => write!(f, "tie{g}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parameter {
    pub key: ParamKey,
    pub members: Vec<VertexId>,
    pub dim: usize,
}

/// Partition of a levelled graph by root-path length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelStructure {
    pub levels: Vec<usize>,
    pub max_level: usize,
}

impl LevelStructure {
    pub fn level(&self, v: VertexId) -> usize {
        self.levels[v.0]
    }

    /// Vertices of `S_k` in ascending id order.
    pub fn members(&self, k: usize) -> Vec<VertexId> {
        self.levels.iter().enumerate().filter(|(_, &l)| l == k).map(|(i, _)| VertexId(i)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Graph {
    vertices: Vec<Vertex>,
    output: VertexId,
    leaves: Vec<VertexId>,
    parents: Vec<Vec<ParentEdge>>,
    tie_groups: Vec<TieGroup>,
    parameters: Vec<Parameter>,
    topo: Vec<VertexId>,
}

impl Graph {
    /// Validates a construction description and builds the graph.
    pub fn from_spec(spec: &GraphSpec) -> Result<Graph> {
        let n = spec.vertices.len();
        for (i, v) in spec.vertices.iter().enumerate() {
            if v.id != i {
                return Err(Error::BadVertexId { expected: i, found: v.id });
            }
        }
        if spec.output >= n {
            return Err(Error::DanglingId { vertex: VertexId(spec.output), missing: spec.output });
        }

        let mut parents: Vec<Vec<ParentEdge>> = vec![Vec::new(); n];
        for v in &spec.vertices {
            if let VertexKind::Op { func, children } = &v.kind {
                if children.len() != func.arity() {
                    return Err(Error::ArityMismatch {
                        vertex: VertexId(v.id),
                        expected: func.arity(),
                        got: children.len(),
                    });
                }
                for (slot, c) in children.iter().enumerate() {
                    if c.0 >= n {
                        return Err(Error::DanglingId { vertex: VertexId(v.id), missing: c.0 });
                    }
                    parents[c.0].push(ParentEdge { parent: VertexId(v.id), slot });
                }
            }
        }
        for p in &mut parents {
            p.sort();
        }

        let output = VertexId(spec.output);
        let order = kahn_order(n, &spec.vertices, &parents)?;
        if !parents[output.0].is_empty() {
            return Err(Error::OutputHasParents(output));
        }

        // reachability from the output along child edges
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([output]);
        seen[output.0] = true;
        while let Some(v) = queue.pop_front() {
            if let VertexKind::Op { children, .. } = &spec.vertices[v.0].kind {
                for c in children {
                    if !seen[c.0] {
                        seen[c.0] = true;
                        queue.push_back(*c);
                    }
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::UnreachableVertex(VertexId(i)));
        }

        // dimensions, children before parents
        let mut dims = vec![0usize; n];
        for &v in order.iter().rev() {
            let vs = &spec.vertices[v.0];
            dims[v.0] = match &vs.kind {
                VertexKind::Leaf { dim, .. } => {
                    if *dim == 0 {
                        return Err(Error::ShapeMismatch(format!("leaf {v} has zero dimension")));
                    }
                    *dim
                }
                VertexKind::Op { func, children } => {
                    let ins: Vec<usize> = children.iter().map(|c| dims[c.0]).collect();
                    func.output_dim(&ins).map_err(|e| Error::ShapeMismatch(format!("vertex {v}: {e}")))?
                }
            };
        }
        if dims[output.0] != 1 {
            return Err(Error::ShapeMismatch(format!("output must be scalar, has dimension {}", dims[output.0])));
        }

        let mut tie_of = vec![None; n];
        let mut tie_groups = Vec::with_capacity(spec.tie_groups.len());
        for (gi, tg) in spec.tie_groups.iter().enumerate() {
            let bad = |reason: String| Error::BadTieGroup { group: tg.id, reason };
            if tg.id != gi {
                return Err(bad(format!("tie group ids must be dense, expected {gi}")));
            }
            if tg.members.is_empty() {
                return Err(bad("no members".into()));
            }
            let mut members: Vec<VertexId> = Vec::with_capacity(tg.members.len());
            for &m in &tg.members {
                if m >= n {
                    return Err(bad(format!("member {m} does not exist")));
                }
                match spec.vertices[m].kind {
                    VertexKind::Leaf { role: LeafRole::Param, .. } => {}
                    VertexKind::Leaf { role: LeafRole::Input, .. } => {
                        return Err(bad(format!("member v{m} is an input leaf")))
                    }
                    VertexKind::Op { .. } => return Err(bad(format!("member v{m} is not a leaf"))),
                }
                if tie_of[m].is_some() {
                    return Err(bad(format!("leaf v{m} belongs to more than one group")));
                }
                if dims[m] != dims[tg.members[0]] {
                    return Err(bad("members differ in dimension".into()));
                }
                tie_of[m] = Some(gi);
                members.push(VertexId(m));
            }
            members.sort();
            tie_groups.push(TieGroup { id: gi, members });
        }

        let vertices: Vec<Vertex> = spec
            .vertices
            .iter()
            .map(|v| Vertex {
                id: VertexId(v.id),
                name: v.name.clone(),
                kind: v.kind.clone(),
                dim: dims[v.id],
                tie_group: tie_of[v.id],
            })
            .collect();
        let leaves: Vec<VertexId> = vertices.iter().filter(|v| v.is_leaf()).map(|v| v.id).collect();

        let mut parameters = Vec::new();
        let mut group_done = vec![false; tie_groups.len()];
        for &l in &leaves {
            let v = &vertices[l.0];
            if !matches!(v.kind, VertexKind::Leaf { role: LeafRole::Param, .. }) {
                continue;
            }
            match v.tie_group {
                None => parameters.push(Parameter { key: ParamKey::Leaf(l), members: vec![l], dim: v.dim }),
                Some(g) if !group_done[g] => {
                    group_done[g] = true;
                    parameters.push(Parameter {
                        key: ParamKey::Tied(g),
                        members: tie_groups[g].members.clone(),
                        dim: v.dim,
                    });
                }
                Some(_) => {}
            }
        }

        let topo = rooted_order(output, &vertices, &parents);
        Ok(Graph { vertices, output, leaves, parents, tie_groups, parameters, topo })
    }

    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexSpec { id: v.id.0, name: v.name.clone(), kind: v.kind.clone() })
                .collect(),
            output: self.output.0,
            tie_groups: self
                .tie_groups
                .iter()
                .map(|g| TieGroupSpec { id: g.id, members: g.members.iter().map(|m| m.0).collect() })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        &self.vertices[v.0]
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn output(&self) -> VertexId {
        self.output
    }

    pub fn leaves(&self) -> &[VertexId] {
        &self.leaves
    }

    /// Internal (non-leaf) vertices in ascending id order.
    pub fn internal(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices.iter().filter(|v| !v.is_leaf()).map(|v| v.id)
    }

    pub fn is_leaf(&self, v: VertexId) -> bool {
        self.vertices[v.0].is_leaf()
    }

    pub fn dim(&self, v: VertexId) -> usize {
        self.vertices[v.0].dim
    }

    pub fn children(&self, v: VertexId) -> &[VertexId] {
        self.vertices[v.0].children()
    }

    pub fn parents(&self, v: VertexId) -> &[ParentEdge] {
        &self.parents[v.0]
    }

    pub fn func(&self, v: VertexId) -> Option<&ElemFn> {
        self.vertices[v.0].func()
    }

    pub fn role(&self, v: VertexId) -> Option<LeafRole> {
        match self.vertices[v.0].kind {
            VertexKind::Leaf { role, .. } => Some(role),
            VertexKind::Op { .. } => None,
        }
    }

    pub fn tie_groups(&self) -> &[TieGroup] {
        &self.tie_groups
    }

    /// Trainable parameters in canonical order: leaves by ascending id, a
    /// tie group placed at its first member.
    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn find(&self, name: &str) -> Option<VertexId> {
        self.vertices.iter().find(|v| v.name.as_deref() == Some(name)).map(|v| v.id)
    }

    /// Output first, every vertex after all of its parents, ties broken by
    /// ascending id.
    pub fn topological_sort(&self) -> &[VertexId] {
        &self.topo
    }

    /// Breadth-first distance from the output along child edges.
    pub fn min_distances(&self) -> Vec<usize> {
        let mut d = vec![usize::MAX; self.len()];
        d[self.output.0] = 0;
        let mut queue = VecDeque::from([self.output]);
        while let Some(v) = queue.pop_front() {
            for c in self.children(v) {
                if d[c.0] == usize::MAX {
                    d[c.0] = d[v.0] + 1;
                    queue.push_back(*c);
                }
            }
        }
        d
    }

    /// Shortest and longest root-path length of every vertex.
    pub fn path_length_bounds(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.len();
        let mut lo = vec![usize::MAX; n];
        let mut hi = vec![0usize; n];
        lo[self.output.0] = 0;
        for &v in &self.topo {
            for c in self.children(v) {
                lo[c.0] = lo[c.0].min(lo[v.0] + 1);
                hi[c.0] = hi[c.0].max(hi[v.0] + 1);
            }
        }
        (lo, hi)
    }

    /// Set of all root-path lengths per vertex, by dynamic programming over
    /// the topological order.
    pub fn path_length_sets(&self) -> Vec<BTreeSet<usize>> {
        let mut sets = vec![BTreeSet::new(); self.len()];
        sets[self.output.0].insert(0);
        for &v in &self.topo {
            let next: Vec<usize> = sets[v.0].iter().map(|l| l + 1).collect();
            for c in self.children(v) {
                sets[c.0].extend(next.iter().copied());
            }
        }
        sets
    }

    pub fn level_structure(&self) -> Result<LevelStructure> {
        let (lo, hi) = self.path_length_bounds();
        if let Some(&v) = self.topo.iter().find(|v| lo[v.0] != hi[v.0]) {
            let lengths = self.path_length_sets().swap_remove(v.0);
            return Err(Error::NotLevelled { vertex: v, lengths });
        }
        let max_level = lo.iter().copied().max().unwrap_or(0);
        Ok(LevelStructure { levels: lo, max_level })
    }

    pub fn is_levelled(&self) -> bool {
        let (lo, hi) = self.path_length_bounds();
        lo == hi
    }
}

/// Kahn's algorithm over every vertex; fails on a cycle.
fn kahn_order(n: usize, vertices: &[VertexSpec], parents: &[Vec<ParentEdge>]) -> Result<Vec<VertexId>> {
    let mut indeg: Vec<usize> = parents.iter().map(|p| p.len()).collect();
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(VertexId(v));
        if let VertexKind::Op { children, .. } = &vertices[v].kind {
            for c in children {
                indeg[c.0] -= 1;
                if indeg[c.0] == 0 {
                    ready.push(Reverse(c.0));
                }
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).find(|&i| indeg[i] > 0).unwrap_or(0);
        return Err(Error::CycleDetected(VertexId(stuck)));
    }
    Ok(order)
}

fn rooted_order(output: VertexId, vertices: &[Vertex], parents: &[Vec<ParentEdge>]) -> Vec<VertexId> {
    let mut indeg: Vec<usize> = parents.iter().map(|p| p.len()).collect();
    let mut ready = BinaryHeap::from([Reverse(output.0)]);
    let mut order = Vec::with_capacity(vertices.len());
    while let Some(Reverse(v)) = ready.pop() {
        order.push(VertexId(v));
        for c in vertices[v].children() {
            indeg[c.0] -= 1;
            if indeg[c.0] == 0 {
                ready.push(Reverse(c.0));
            }
        }
    }
    order
}

/// Incremental construction of a [`Graph`].
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    vertices: Vec<VertexSpec>,
    tie_groups: Vec<TieGroupSpec>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: Option<String>, kind: VertexKind) -> VertexId {
        let id = self.vertices.len();
        self.vertices.push(VertexSpec { id, name, kind });
        VertexId(id)
    }

    pub fn param(&mut self, name: impl Into<String>, dim: usize) -> VertexId {
        self.push(Some(name.into()), VertexKind::Leaf { dim, role: LeafRole::Param })
    }

    pub fn input(&mut self, name: impl Into<String>, dim: usize) -> VertexId {
        self.push(Some(name.into()), VertexKind::Leaf { dim, role: LeafRole::Input })
    }

    pub fn op(&mut self, name: impl Into<String>, func: ElemFn, children: &[VertexId]) -> VertexId {
        self.push(Some(name.into()), VertexKind::Op { func, children: children.to_vec() })
    }

    /// Ties the given parameter leaves into one group; returns its id.
    pub fn tie(&mut self, members: &[VertexId]) -> usize {
        let id = self.tie_groups.len();
        self.tie_groups.push(TieGroupSpec { id, members: members.iter().map(|m| m.0).collect() });
        id
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn into_spec(self, output: VertexId) -> GraphSpec {
        GraphSpec { vertices: self.vertices, output: output.0, tie_groups: self.tie_groups }
    }

    pub fn build(self, output: VertexId) -> Result<Graph> {
        Graph::from_spec(&self.into_spec(output))
    }
}
