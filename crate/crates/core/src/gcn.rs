//! Sentiment graphs over the aspects of a sentence, the GCN stack, the output
//! layer and the training loss.

use alloc::format;
use alloc::vec::Vec;

use crate::autodiff::{Graph, Var};
use crate::data::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::params::{init_normal, init_uniform, ParamId, ParamStore};
use crate::rng::RngStream;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Topology {
    /// Each aspect is linked to the aspects right before and after it.
    Adjacent,
    /// Every pair of aspects is linked.
    Global,
}

impl Topology {
    pub fn as_str(self) -> &'static str {
        match self {
            Topology::Adjacent => "adjacent",
            Topology::Global => "global",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "adjacent" | "a" | "A" => Some(Topology::Adjacent),
            "global" | "g" | "G" => Some(Topology::Global),
            _ => None,
        }
    }
}

/// Undirected graph over the `k` aspects of one sentence, nodes `0..k` in
/// sentence order. Self-loops are not stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentimentGraph {
    k: usize,
    topology: Topology,
    /// `(u, v)` with `u < v`.
    edges: Vec<(usize, usize)>,
}

impl SentimentGraph {
    pub fn build(k: usize, topology: Topology) -> Result<Self> {
        if k == 0 {
            return Err(Error::Precondition("sentiment graph needs at least one aspect".into()));
        }
        let edges = match topology {
            Topology::Adjacent => (1..k).map(|v| (v - 1, v)).collect(),
            Topology::Global => (0..k)
                .flat_map(|u| (u + 1..k).map(move |v| (u, v)))
                .collect(),
        };
        Ok(Self { k, topology, edges })
    }

    pub fn num_nodes(&self) -> usize {
        self.k
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors(v).len()
    }

    /// Symmetric 0/1 adjacency matrix.
    pub fn adjacency(&self) -> Tensor {
        let mut a = Tensor::zeros(self.k, self.k);
        for &(u, v) in &self.edges {
            a.set(u, v, 1.0);
            a.set(v, u, 1.0);
        }
        a
    }
}

/// Weights of one GCN layer; layers never share them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GcnLayerParams {
    pub w_cross: ParamId,
    pub b_cross: ParamId,
    pub w_self: ParamId,
    pub b_self: ParamId,
}

impl GcnLayerParams {
    pub fn register(store: &mut ParamStore, layer: usize, dim: usize, scale: f64, rng: &mut RngStream) -> Result<Self> {
        let p = format!("gcn.{layer}");
        let w_cross = store.insert(&format!("{p}.w_cross"), init_uniform(dim, dim, -scale, scale, rng)?, true)?;
        let w_self = store.insert(&format!("{p}.w_self"), init_uniform(dim, dim, -scale, scale, rng)?, true)?;
        let b_cross = store.insert(&format!("{p}.b_cross"), Tensor::zeros(dim, 1), true)?;
        let b_self = store.insert(&format!("{p}.b_self"), Tensor::zeros(dim, 1), true)?;
        Ok(Self {
            w_cross,
            b_cross,
            w_self,
            b_self,
        })
    }
}

/// One GCN layer over the columns of `x` (one column per aspect):
///
/// ```text
/// x'_v = relu(W_cross · Σ_{u ∈ N(v)} x_u + b_cross) + relu(W_self · x_v + b_self)
/// ```
///
/// A node without neighbours gets `relu(b_cross)` as its neighbour term.
pub fn gcn_layer(g: &mut Graph<'_>, x: Var, graph: &SentimentGraph, layer: &GcnLayerParams) -> Result<Var> {
    let (dim, k) = g.shape(x);
    if k != graph.num_nodes() {
        return Err(Error::Shape {
            op: "gcn_layer",
            lhs: (dim, k),
            rhs: (graph.num_nodes(), graph.num_nodes()),
        });
    }
    let w_cross = g.param(layer.w_cross);
    let b_cross = g.param(layer.b_cross);
    let w_self = g.param(layer.w_self);
    let b_self = g.param(layer.b_self);

    let adj = g.constant(graph.adjacency());
    let neigh_sum = g.matmul(x, adj)?;
    let cross = g.matmul(w_cross, neigh_sum)?;
    let cross = g.add_bias(cross, b_cross)?;
    let cross = g.relu(cross);

    let own = g.matmul(w_self, x)?;
    let own = g.add_bias(own, b_self)?;
    let own = g.relu(own);
    g.add(cross, own)
}

/// `layers.len()` GCN layers applied in order.
pub fn gcn_forward(g: &mut Graph<'_>, x: Var, graph: &SentimentGraph, layers: &[GcnLayerParams]) -> Result<Var> {
    if layers.is_empty() {
        return Err(Error::Config("GCN needs at least one layer".into()));
    }
    let mut h = x;
    for layer in layers {
        h = gcn_layer(g, h, graph, layer)?;
    }
    Ok(h)
}

/// Final linear layer mapping an aspect vector to class logits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutputHead {
    pub w: ParamId,
    pub b: ParamId,
}

impl OutputHead {
    /// `W_z ~ N(0, std²)`, `b_z = 0`.
    pub fn register(store: &mut ParamStore, dim: usize, std: f64, rng: &mut RngStream) -> Result<Self> {
        let w = store.insert("out.w", init_normal(NUM_CLASSES, dim, 0.0, std, rng)?, true)?;
        let b = store.insert("out.b", Tensor::zeros(NUM_CLASSES, 1), true)?;
        Ok(Self { w, b })
    }
}

/// Logits (`C × K`) and class probabilities (softmax over each column).
pub fn classify(g: &mut Graph<'_>, x: Var, head: &OutputHead) -> Result<(Var, Var)> {
    let w = g.param(head.w);
    let b = g.param(head.b);
    let z = g.matmul(w, x)?;
    let z = g.add_bias(z, b)?;
    let p = g.softmax_cols(z);
    Ok((z, p))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    /// L2 coefficient.
    pub lambda: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { lambda: 0.01 }
    }
}

/// Sentence loss: summed negative log-likelihood of the gold labels plus
/// `λ · Σ ‖θ‖²` over `regularized`.
pub fn sentence_loss(
    g: &mut Graph<'_>,
    logits: Var,
    labels: &[usize],
    cfg: &LossConfig,
    regularized: &[Var],
) -> Result<Var> {
    if cfg.lambda < 0.0 {
        return Err(Error::Config(format!("negative L2 coefficient {}", cfg.lambda)));
    }
    let mut loss = g.cross_entropy(logits, labels)?;
    if cfg.lambda > 0.0 {
        for &theta in regularized {
            let sq = g.sum_squares(theta);
            let pen = g.scale(sq, cfg.lambda);
            loss = g.add(loss, pen)?;
        }
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{grad_check, GradCheckConfig};

    fn rand(r: usize, c: usize, seed: u64) -> Tensor {
        init_uniform(r, c, -1.0, 1.0, &mut RngStream::new(seed)).unwrap()
    }

    fn relu(v: f64) -> f64 {
        v.max(0.0)
    }

    #[test]
    fn five_aspect_graphs() {
        let a = SentimentGraph::build(5, Topology::Adjacent).unwrap();
        assert_eq!(a.edges(), &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let gl = SentimentGraph::build(5, Topology::Global).unwrap();
        assert_eq!(gl.edges().len(), 10);
        for t in [Topology::Adjacent, Topology::Global] {
            assert!(SentimentGraph::build(1, t).unwrap().edges().is_empty());
        }
        assert!(SentimentGraph::build(0, Topology::Global).is_err());
    }

    fn layer_store(dim: usize, seed: u64) -> (ParamStore, GcnLayerParams) {
        let mut s = ParamStore::new();
        let l = GcnLayerParams::register(&mut s, 0, dim, 1.0, &mut RngStream::new(seed)).unwrap();
        *s.value_mut(l.b_cross) = rand(dim, 1, seed + 1);
        *s.value_mut(l.b_self) = rand(dim, 1, seed + 2);
        (s, l)
    }

    #[test]
    fn isolated_node() {
        let (s, l) = layer_store(4, 1);
        let graph = SentimentGraph::build(1, Topology::Global).unwrap();
        let x0 = rand(4, 1, 9);
        let mut g = Graph::new(&s);
        let x = g.constant(x0.clone());
        let y = gcn_layer(&mut g, x, &graph, &l).unwrap();
        let ws = s.value(l.w_self).matmul(&x0).unwrap();
        for r in 0..4 {
            let expect = relu(s.value(l.b_cross).get(r, 0)) + relu(ws.get(r, 0) + s.value(l.b_self).get(r, 0));
            assert!((g.value(y).get(r, 0) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_parameters_give_zero() {
        let (mut s, l) = layer_store(4, 1);
        for id in s.ids().collect::<Vec<_>>() {
            s.value_mut(id).fill(0.0);
        }
        let graph = SentimentGraph::build(3, Topology::Global).unwrap();
        let mut g = Graph::new(&s);
        let x = g.constant(rand(4, 3, 3));
        let y = gcn_layer(&mut g, x, &graph, &l).unwrap();
        assert_eq!(g.value(y).max_abs(), 0.0);
    }

    #[test]
    fn node_count_mismatch() {
        let (s, l) = layer_store(4, 1);
        let graph = SentimentGraph::build(2, Topology::Global).unwrap();
        let mut g = Graph::new(&s);
        let x = g.constant(rand(4, 3, 3));
        assert!(matches!(gcn_layer(&mut g, x, &graph, &l), Err(Error::Shape { .. })));
    }

    #[test]
    fn layer_gradients() {
        let (s, l) = layer_store(4, 5);
        let graph = SentimentGraph::build(3, Topology::Global).unwrap();
        let x0 = rand(4, 3, 6);
        let w0 = rand(4, 3, 7);
        let report = grad_check(
            &s,
            |g| {
                let x = g.constant(x0.clone());
                let y = gcn_layer(g, x, &graph, &l)?;
                let w = g.constant(w0.clone());
                let p = g.mul(y, w)?;
                Ok(g.sum(p))
            },
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn classify_uniform_and_dominant() {
        let mut s = ParamStore::new();
        let head = OutputHead::register(&mut s, 4, 1.0, &mut RngStream::new(0)).unwrap();
        s.value_mut(head.w).fill(0.0);
        {
            let mut g = Graph::new(&s);
            let x = g.constant(rand(4, 2, 1));
            let (_, p) = classify(&mut g, x, &head).unwrap();
            for &v in g.value(p).data() {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        *s.value_mut(head.b) = Tensor::column(&[0.0, 0.0, 10.0]);
        let mut g = Graph::new(&s);
        let x = g.constant(rand(4, 1, 1));
        let (_, p) = classify(&mut g, x, &head).unwrap();
        let p = g.value(p);
        assert!(p.get(2, 0) > 0.9999);
    }

    #[test]
    fn loss_examples() {
        let mut g = Graph::detached();
        // near-certain prediction of the gold class
        let z = g.constant(Tensor::from_rows(&[&[800.0], &[0.0], &[0.0]]));
        let l = sentence_loss(&mut g, z, &[0], &LossConfig { lambda: 0.0 }, &[]).unwrap();
        assert_eq!(g.value(l).item(), 0.0);

        let z = g.constant(Tensor::zeros(3, 2));
        let l = sentence_loss(&mut g, z, &[0, 2], &LossConfig { lambda: 0.0 }, &[]).unwrap();
        assert!((g.value(l).item() - 2.0 * libm::log(3.0)).abs() < 1e-12);

        let theta = g.constant(Tensor::identity(2));
        let l2 = sentence_loss(&mut g, z, &[0, 2], &LossConfig { lambda: 0.01 }, &[theta]).unwrap();
        assert!((g.value(l2).item() - g.value(l).item() - 0.02).abs() < 1e-12);

        let bad = sentence_loss(&mut g, z, &[0, 3], &LossConfig::default(), &[]);
        assert!(matches!(bad, Err(Error::Data(_))));
    }
}
