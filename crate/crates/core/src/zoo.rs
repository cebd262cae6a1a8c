//! Desk-scale model builders.
//!
//! Each family is emitted as a computational graph plus initial leaf values
//! and a target. Trainable parameters are drawn uniformly from `[−0.5, 0.5]`,
//! data inputs and the target from `[−1, 1]`, all from one seeded stream.
//!
//! | family | `dims` | levelled as built |
//! |---|---|---|
//! | `mlp` | layer widths, last = 1 | yes |
//! | `conv1d` | `[input_len, kernel, kernel…]` | yes |
//! | `rnn` | `[input_dim, hidden, seq_len]` | yes |
//! | `residual` | layer widths, last = 1 | no |
//! | `toy_attention` | `[width]` | no |
//!
//! Convolution kernels are realised as scalar multiply-adds whose kernel
//! entries are tied across positions; recurrent weights are matrices tied
//! across time steps.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Activation, ElemFn, Graph, GraphBuilder, GraphSpec, VertexId};
use crate::leveller::{level, LevelReport};
use crate::params::LeafValues;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Mlp,
    Conv1d,
    Rnn,
    Residual,
    ToyAttention,
    SqrtToy,
    SkipToy,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Mlp => "mlp",
            Family::Conv1d => "conv1d",
            Family::Rnn => "rnn",
            Family::Residual => "residual",
            Family::ToyAttention => "toy_attention",
            Family::SqrtToy => "sqrt_toy",
            Family::SkipToy => "skip_toy",
        }
    }

    pub fn default_dims(self) -> Vec<usize> {
        match self {
            Family::Mlp => vec![4, 8, 1],
            Family::Conv1d => vec![8, 3],
            Family::Rnn => vec![3, 4, 5],
            Family::Residual => vec![4, 4, 4, 1],
            Family::ToyAttention => vec![4],
            Family::SqrtToy | Family::SkipToy => vec![],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mlp" => Family::Mlp,
            "conv1d" | "cnn" => Family::Conv1d,
            "rnn" => Family::Rnn,
            "residual" | "resnet" => Family::Residual,
            "toy_attention" | "attention" | "transformer" => Family::ToyAttention,
            "sqrt_toy" | "sqrt_chain" => Family::SqrtToy,
            "skip_toy" | "skip" => Family::SkipToy,
            other => return Err(Error::BadSpec(format!("unknown family '{other}'"))),
        })
    }
}

fn default_activation() -> Activation {
    Activation::Tanh
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default)]
    pub dims: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(family: Family, dims: Vec<usize>, activation: Activation, seed: u64) -> Self {
        ModelSpec { family, dims, activation, seed }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ModelSpec { seed, ..self.clone() }
    }

    pub fn label(&self) -> String {
        let dims: Vec<String> = self.effective_dims().iter().map(|d| d.to_string()).collect();
        format!("{}[{}]", self.family, dims.join("-"))
    }

    fn effective_dims(&self) -> Vec<usize> {
        if self.dims.is_empty() {
            self.family.default_dims()
        } else {
            self.dims.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub graph: Graph,
    pub params: LeafValues,
    pub target: f64,
}

/// On-disk form of a [`Model`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub graph: GraphSpec,
    pub params: LeafValues,
    pub target: f64,
}

impl Model {
    pub fn to_file(&self) -> ModelFile {
        ModelFile { graph: self.graph.to_spec(), params: self.params.clone(), target: self.target }
    }

    pub fn from_file(f: &ModelFile) -> Result<Model> {
        let graph = Graph::from_spec(&f.graph)?;
        f.params.validate(&graph)?;
        Ok(Model { graph, params: f.params.clone(), target: f.target })
    }

    /// Same function, parameters and target on the levelled graph.
    pub fn levelled(&self) -> (Model, LevelReport) {
        let (graph, report) = level(&self.graph);
        (Model { graph, params: self.params.clone(), target: self.target }, report)
    }
}

struct Draw {
    b: GraphBuilder,
    values: Vec<(VertexId, Vec<f64>)>,
    rng: ChaCha8Rng,
}

impl Draw {
    fn new(seed: u64) -> Self {
        Draw { b: GraphBuilder::new(), values: Vec::new(), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn uniform(&mut self, n: usize, half_width: f64) -> Vec<f64> {
        (0..n).map(|_| self.rng.gen_range(-half_width..=half_width)).collect()
    }

    fn param(&mut self, name: String, dim: usize) -> VertexId {
        let v = self.uniform(dim, 0.5);
        self.param_with(name, v)
    }

    fn param_with(&mut self, name: String, value: Vec<f64>) -> VertexId {
        let id = self.b.param(name, value.len());
        self.values.push((id, value));
        id
    }

    fn input(&mut self, name: String, dim: usize) -> VertexId {
        let v = self.uniform(dim, 1.0);
        let id = self.b.input(name, dim);
        self.values.push((id, v));
        id
    }

    fn op(&mut self, name: String, func: ElemFn, children: &[VertexId]) -> VertexId {
        self.b.op(name, func, children)
    }

    fn finish(mut self, output: VertexId) -> Result<Model> {
        let target = self.rng.gen_range(-1.0..=1.0);
        self.finish_with_target(output, target)
    }

    fn finish_with_target(self, output: VertexId, target: f64) -> Result<Model> {
        let graph = self.b.build(output)?;
        let mut params = LeafValues::new();
        for (id, v) in self.values {
            params.set(id, v);
        }
        Ok(Model { graph, params, target })
    }
}

pub fn build_model(spec: &ModelSpec) -> Result<Model> {
    let dims = spec.effective_dims();
    if dims.contains(&0) {
        return Err(Error::BadSpec(format!("dimensions must be positive: {dims:?}")));
    }
    match spec.family {
        Family::Mlp => mlp(&dims, spec.activation, spec.seed, false),
        Family::Residual => mlp(&dims, spec.activation, spec.seed, true),
        Family::Conv1d => conv1d(&dims, spec.activation, spec.seed),
        Family::Rnn => rnn(&dims, spec.activation, spec.seed),
        Family::ToyAttention => toy_attention(&dims, spec.seed),
        Family::SqrtToy => sqrt_toy(),
        Family::SkipToy => skip_toy(),
    }
}

fn mlp(dims: &[usize], act: Activation, seed: u64, skips: bool) -> Result<Model> {
    if dims.len() < 2 || *dims.last().unwrap() != 1 {
        return Err(Error::BadSpec(format!("layer widths must have ≥ 2 entries ending in 1, got {dims:?}")));
    }
    let layers = dims.len() - 1;
    let mut d = Draw::new(seed);
    let mut h = d.input("s".into(), dims[0]);
    for l in 0..layers {
        let (cols, rows) = (dims[l], dims[l + 1]);
        let w = d.param(format!("W{}", l + 1), rows * cols);
        let z = d.op(format!("z{}", l + 1), ElemFn::MatVec { rows, cols }, &[w, h]);
        if l + 1 == layers {
            return d.finish(z);
        }
        let a = d.op(format!("a{}", l + 1), ElemFn::Activation { name: act }, &[z]);
        h = if skips && l >= 1 && rows == cols {
            d.op(format!("r{}", l + 1), ElemFn::Add { arity: 2 }, &[a, h])
        } else {
            a
        };
    }
    unreachable!()
}

fn conv1d(dims: &[usize], act: Activation, seed: u64) -> Result<Model> {
    if dims.len() < 2 {
        return Err(Error::BadSpec("conv1d needs [input_len, kernel, ...]".into()));
    }
    let mut d = Draw::new(seed);
    let mut cur: Vec<VertexId> = (0..dims[0]).map(|i| d.input(format!("s{i}"), 1)).collect();
    let mut groups = Vec::new();
    for (layer, &k) in dims[1..].iter().enumerate() {
        if k > cur.len() {
            return Err(Error::BadSpec(format!("kernel {k} longer than input {}", cur.len())));
        }
        let kernel = d.uniform(k, 0.5);
        let positions = cur.len() - k + 1;
        let mut members: Vec<Vec<VertexId>> = vec![Vec::new(); k];
        let mut next = Vec::with_capacity(positions);
        for p in 0..positions {
            let prods: Vec<VertexId> = (0..k)
                .map(|m| {
                    let w = d.param_with(format!("k{layer}_{m}@{p}"), vec![kernel[m]]);
                    members[m].push(w);
                    d.op(format!("c{layer}_{p}_{m}"), ElemFn::Multiply { arity: 2 }, &[w, cur[p + m]])
                })
                .collect();
            let pre = d.op(format!("c{layer}_{p}"), ElemFn::Add { arity: k }, &prods);
            next.push(d.op(format!("a{layer}_{p}"), ElemFn::Activation { name: act }, &[pre]));
        }
        groups.extend(members);
        cur = next;
    }
    let head: Vec<VertexId> = cur
        .iter()
        .enumerate()
        .map(|(p, &a)| {
            let v = d.param(format!("v{p}"), 1);
            d.op(format!("h{p}"), ElemFn::Multiply { arity: 2 }, &[v, a])
        })
        .collect();
    let out = d.op("out".into(), ElemFn::Add { arity: head.len() }, &head);
    for m in &groups {
        d.b.tie(m);
    }
    d.finish(out)
}

fn rnn(dims: &[usize], act: Activation, seed: u64) -> Result<Model> {
    let &[input, hidden, steps] = dims else {
        return Err(Error::BadSpec("rnn needs [input_dim, hidden, seq_len]".into()));
    };
    let mut d = Draw::new(seed);
    let theta_x = d.uniform(hidden * input, 0.5);
    let theta_h = d.uniform(hidden * hidden, 0.5);
    let (mut xs, mut hs) = (Vec::new(), Vec::new());
    let mut h: Option<VertexId> = None;
    for k in 1..=steps {
        let s = d.input(format!("s{k}"), input);
        let wx = d.param_with(format!("Wx@{k}"), theta_x.clone());
        xs.push(wx);
        let ux = d.op(format!("ux{k}"), ElemFn::MatVec { rows: hidden, cols: input }, &[wx, s]);
        let pre = match h {
            None => ux,
            Some(prev) => {
                let wh = d.param_with(format!("Wh@{k}"), theta_h.clone());
                hs.push(wh);
                let uh = d.op(format!("uh{k}"), ElemFn::MatVec { rows: hidden, cols: hidden }, &[wh, prev]);
                d.op(format!("pre{k}"), ElemFn::Add { arity: 2 }, &[uh, ux])
            }
        };
        h = Some(d.op(format!("h{k}"), ElemFn::Activation { name: act }, &[pre]));
    }
    let wy = d.param("Wy".into(), hidden);
    let out = d.op("out".into(), ElemFn::MatVec { rows: 1, cols: hidden }, &[wy, h.unwrap()]);
    d.b.tie(&xs);
    if !hs.is_empty() {
        d.b.tie(&hs);
    }
    d.finish(out)
}

/// One gated block: `res = σ(q ⊙ k) ⊙ v + v` with `q, k, v` linear in the
/// input, followed by a linear read-out. The multiplicative gate and the
/// residual give `v` (and the input) two different root-path lengths.
fn toy_attention(dims: &[usize], seed: u64) -> Result<Model> {
    let &[w] = dims else {
        return Err(Error::BadSpec("toy_attention needs [width]".into()));
    };
    let mut d = Draw::new(seed);
    let s = d.input("s".into(), w);
    let mv = ElemFn::MatVec { rows: w, cols: w };
    let wq = d.param("Wq".into(), w * w);
    let wk = d.param("Wk".into(), w * w);
    let wv = d.param("Wv".into(), w * w);
    let wo = d.param("Wo".into(), w);
    let q = d.op("q".into(), mv.clone(), &[wq, s]);
    let k = d.op("k".into(), mv.clone(), &[wk, s]);
    let v = d.op("v".into(), mv, &[wv, s]);
    let qk = d.op("qk".into(), ElemFn::Multiply { arity: 2 }, &[q, k]);
    let gate = d.op("gate".into(), ElemFn::Activation { name: Activation::Logistic }, &[qk]);
    let mix = d.op("mix".into(), ElemFn::Multiply { arity: 2 }, &[gate, v]);
    let res = d.op("res".into(), ElemFn::Add { arity: 2 }, &[mix, v]);
    let out = d.op("out".into(), ElemFn::MatVec { rows: 1, cols: w }, &[wo, res]);
    d.finish(out)
}

/// `(√z1 + z2)²` at `z = (4, 1)`, target 4.
fn sqrt_toy() -> Result<Model> {
    let mut d = Draw::new(0);
    let z1 = d.param_with("z1".into(), vec![4.0]);
    let z2 = d.param_with("z2".into(), vec![1.0]);
    let s = d.op("sqrt".into(), ElemFn::Sqrt, &[z1]);
    let a = d.op("add".into(), ElemFn::Add { arity: 2 }, &[s, z2]);
    let out = d.op("out".into(), ElemFn::Square, &[a]);
    d.finish_with_target(out, 4.0)
}

/// `s z3 + s z3 z2 z1` with unit values, target 0. `s` is a data input.
fn skip_toy() -> Result<Model> {
    let mut d = Draw::new(0);
    let s = d.b.input("s", 1);
    d.values.push((s, vec![1.0]));
    let z1 = d.param_with("z1".into(), vec![1.0]);
    let z2 = d.param_with("z2".into(), vec![1.0]);
    let z3 = d.param_with("z3".into(), vec![1.0]);
    let mul = ElemFn::Multiply { arity: 2 };
    let g3 = d.op("g3".into(), mul.clone(), &[s, z3]);
    let g2 = d.op("g2".into(), mul.clone(), &[g3, z2]);
    let g1 = d.op("g1".into(), mul, &[g2, z1]);
    let out = d.op("out".into(), ElemFn::Add { arity: 2 }, &[g1, g3]);
    d.finish_with_target(out, 0.0)
}

/// Clone with every tie group dissolved; each former member becomes an
/// independent parameter holding the same value.
pub fn untie(g: &Graph) -> Graph {
    let mut spec = g.to_spec();
    spec.tie_groups.clear();
    Graph::from_spec(&spec).expect("removing ties keeps the graph valid")
}

/// Random scalar DAG with exactly `n` vertices (n ≥ 3): 2–4 leaves, internal
/// vertices drawn from add, multiply, square, tanh, logistic, identity and
/// sqrt (sqrt only over logistic outputs). Children are picked from earlier
/// vertices, so skip connections of every length occur.
pub fn random_graph(seed: u64, n: usize) -> Result<Model> {
    if n < 3 {
        return Err(Error::BadSpec("random graphs need at least 3 vertices".into()));
    }
    let mut d = Draw::new(seed);
    let n_leaves = d.rng.gen_range(2..=4usize.min(n - 1));
    let mut all: Vec<VertexId> = Vec::new();
    let mut positive: Vec<bool> = Vec::new();
    for i in 0..n_leaves {
        let v = if i == 0 && d.rng.gen_bool(0.3) { d.input(format!("x{i}"), 1) } else { d.param(format!("z{i}"), 1) };
        all.push(v);
        positive.push(false);
    }
    let mut unused: Vec<VertexId> = all.clone();
    let n_internal = n - n_leaves;

    for k in 0..n_internal {
        let last = k + 1 == n_internal;
        let roll = d.rng.gen_range(0..7);
        let (mut func, arity) = if last && unused.len() > 1 {
            let arity = unused.len();
            if d.rng.gen_bool(0.5) {
                (ElemFn::Add { arity }, arity)
            } else {
                (ElemFn::Multiply { arity }, arity)
            }
        } else {
            match roll {
                0 => {
                    let a = d.rng.gen_range(2..=3);
                    (ElemFn::Add { arity: a }, a)
                }
                1 => {
                    let a = d.rng.gen_range(2..=3);
                    (ElemFn::Multiply { arity: a }, a)
                }
                2 => (ElemFn::Square, 1),
                3 => (ElemFn::Activation { name: Activation::Tanh }, 1),
                4 => (ElemFn::Activation { name: Activation::Logistic }, 1),
                5 => (ElemFn::Identity, 1),
                _ => (ElemFn::Sqrt, 1),
            }
        };
        let mut children = Vec::with_capacity(arity);
        if last {
            children.append(&mut unused);
        }
        while children.len() < arity {
            let from_unused = !unused.is_empty() && (children.is_empty() || d.rng.gen_bool(0.5));
            let c = if from_unused {
                let i = d.rng.gen_range(0..unused.len());
                unused.swap_remove(i)
            } else {
                all[d.rng.gen_range(0..all.len())]
            };
            children.push(c);
        }
        if func == ElemFn::Sqrt && !positive[children[0].0] {
            func = ElemFn::Activation { name: Activation::Logistic };
        }
        let is_positive = matches!(func, ElemFn::Activation { name: Activation::Logistic });
        let v = d.op(format!("g{k}"), func, &children);
        all.push(v);
        positive.push(is_positive);
        if !last {
            unused.push(v);
        }
    }
    let out = *all.last().unwrap();
    d.finish(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::forward;

    #[test]
    fn skip_toy_value() {
        let m = build_model(&ModelSpec::new(Family::SkipToy, vec![], Activation::Linear, 0)).unwrap();
        assert_eq!(m.graph.len(), 8);
        assert_eq!(m.graph.internal().count(), 4);
        assert_eq!(forward(&m.graph, &m.params).unwrap().output(&m.graph), 2.0);
        assert_eq!(m.graph.parents(m.graph.find("g3").unwrap()).len(), 2);
    }

    #[test]
    fn mlp_is_levelled() {
        let m = build_model(&ModelSpec::new(Family::Mlp, vec![4, 8, 1], Activation::Linear, 0)).unwrap();
        assert!(m.graph.level_structure().is_ok());
    }

    #[test]
    fn residual_needs_levelling() {
        let m = build_model(&ModelSpec::new(Family::Residual, vec![4, 4, 4, 1], Activation::Tanh, 0)).unwrap();
        assert!(m.graph.level_structure().is_err());
        let (lv, _) = m.levelled();
        assert!(lv.graph.level_structure().is_ok());
    }

    #[test]
    fn levelled_families() {
        for fam in [Family::Mlp, Family::Conv1d, Family::Rnn] {
            let m = build_model(&ModelSpec::new(fam, vec![], Activation::Tanh, 3)).unwrap();
            assert!(m.graph.is_levelled(), "{fam}");
        }
        for fam in [Family::Residual, Family::ToyAttention] {
            let m = build_model(&ModelSpec::new(fam, vec![], Activation::Tanh, 3)).unwrap();
            assert!(!m.graph.is_levelled(), "{fam}");
        }
    }

    #[test]
    fn untie_conv_counts() {
        let m = build_model(&ModelSpec::new(Family::Conv1d, vec![4, 2], Activation::Tanh, 0)).unwrap();
        assert_eq!(m.graph.tie_groups().len(), 2);
        let tied: usize = m.graph.tie_groups().iter().map(|t| t.members.len()).sum();
        assert_eq!(tied, 6);
        let u = untie(&m.graph);
        assert!(u.tie_groups().is_empty());
        assert_eq!(u.parameters().len(), m.graph.parameters().len() - 2 + 6);
    }

    #[test]
    fn untie_without_ties_is_identity() {
        let m = build_model(&ModelSpec::new(Family::Mlp, vec![], Activation::Tanh, 0)).unwrap();
        assert_eq!(untie(&m.graph).to_spec(), m.graph.to_spec());
    }

    #[test]
    fn bad_specs() {
        assert!(build_model(&ModelSpec::new(Family::Mlp, vec![4, 2], Activation::Tanh, 0)).is_err());
        assert!(build_model(&ModelSpec::new(Family::Rnn, vec![4, 2], Activation::Tanh, 0)).is_err());
        assert!(build_model(&ModelSpec::new(Family::Conv1d, vec![2, 3], Activation::Tanh, 0)).is_err());
        assert!(build_model(&ModelSpec::new(Family::Mlp, vec![4, 0, 1], Activation::Tanh, 0)).is_err());
    }

    #[test]
    fn random_graphs_are_valid_and_deterministic() {
        for seed in 0..50 {
            let n = 3 + (seed as usize % 8);
            let a = random_graph(seed, n).unwrap();
            assert_eq!(a.graph.len(), n);
            forward(&a.graph, &a.params).unwrap();
            let b = random_graph(seed, n).unwrap();
            assert_eq!(a.graph.to_spec(), b.graph.to_spec());
            assert_eq!(a.params, b.params);
        }
    }

    #[test]
    fn model_file_roundtrip() {
        let m = build_model(&ModelSpec::new(Family::Rnn, vec![], Activation::Tanh, 1)).unwrap();
        let text = serde_json::to_string(&m.to_file()).unwrap();
        let back = Model::from_file(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.graph.to_spec(), m.graph.to_spec());
        assert_eq!(back.params, m.params);
        assert_eq!(back.target, m.target);
    }
}
