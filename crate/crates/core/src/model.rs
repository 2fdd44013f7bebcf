//! The full classifier: embeddings → two Bi-LSTMs → bidirectional attention
//! with position weights → GCN over the sentiment graph → softmax head.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::attention::{aspect_to_context, avg_pool_context, context_to_aspect};
use crate::autodiff::{Graph, Var};
use crate::data::{EncodedInstance, Vocabulary, DEFAULT_MAX_ASPECTS};
use crate::encoder::{bilstm_encode, position_weights, LstmParams};
use crate::error::{Error, Result};
use crate::gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
use crate::gcn::{
    classify, gcn_forward, sentence_loss, GcnLayerParams, LossConfig, OutputHead, SentimentGraph,
    Topology,
};
use crate::params::{init_uniform, ParamId, ParamStore};
use crate::rng::{streams, RngStream};
use crate::tensor::Tensor;

/// Largest supported GCN depth.
pub const MAX_GCN_LAYERS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub d_hid: usize,
    pub topology: Topology,
    pub gcn_layers: usize,
    /// Use the GCN at all; without it the attention output feeds the head.
    pub gcn: bool,
    /// Context→aspect attention; without it the aspect is mean-pooled.
    pub c2a: bool,
    /// Position weighting; without it every weight is 1.
    pub position: bool,
    /// Distance beyond which position weights drop to 0.
    pub window: usize,
    /// Sum the position-weighted states in aspect→context attention instead
    /// of the raw context states.
    pub attend_over_weighted_context: bool,
    pub dropout: f64,
    pub dropout_embeddings: bool,
    pub dropout_gcn_input: bool,
    pub lambda: f64,
    /// Half-width of the uniform init for every weight except the head.
    pub init_scale: f64,
    /// Standard deviation of the normal init of the head weights.
    pub head_std: f64,
    pub train_embeddings: bool,
    pub max_aspects: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_hid: 300,
            topology: Topology::Global,
            gcn_layers: 2,
            gcn: true,
            c2a: true,
            position: true,
            window: 20,
            attend_over_weighted_context: false,
            dropout: 0.5,
            dropout_embeddings: true,
            dropout_gcn_input: true,
            lambda: 0.01,
            init_scale: 0.01,
            head_std: 1.0,
            train_embeddings: false,
            max_aspects: DEFAULT_MAX_ASPECTS,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_hid == 0 {
            return Err(Error::Config("d_hid must be positive".into()));
        }
        if self.gcn && !(1..=MAX_GCN_LAYERS).contains(&self.gcn_layers) {
            return Err(Error::Config(format!(
                "gcn_layers must be in 1..={MAX_GCN_LAYERS}, got {}",
                self.gcn_layers
            )));
        }
        if self.window == 0 {
            return Err(Error::Config("position window must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        if self.init_scale <= 0.0 || self.head_std <= 0.0 {
            return Err(Error::Config("init scales must be positive".into()));
        }
        Ok(())
    }

    /// Short name of the ablation variant (`Att`, `BiAtt+GCN`, ...).
    pub fn variant_name(&self) -> &'static str {
        match (self.c2a, self.gcn) {
            (false, false) => "Att",
            (false, true) => "Att+GCN",
            (true, false) => "BiAtt",
            (true, true) => "BiAtt+GCN",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelIds {
    pub embedding: ParamId,
    pub ctx_lstm: LstmParams,
    pub asp_lstm: LstmParams,
    pub w_ca: Option<ParamId>,
    pub w_ac: ParamId,
    pub gcn: Vec<GcnLayerParams>,
    pub head: OutputHead,
}

/// Graph nodes of one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    /// `C × K` logits.
    pub logits: Var,
    /// `C × K` class probabilities.
    pub probs: Var,
    /// Per aspect, `1 × M_i` context→aspect weights (absent without c2a).
    pub betas: Vec<Option<Var>>,
    /// Per aspect, `1 × N` aspect→context weights.
    pub gammas: Vec<Var>,
}

/// Evaluation output for one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub probs: Tensor,
    pub labels: Vec<usize>,
    pub betas: Vec<Option<Vec<f64>>>,
    pub gammas: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct Sdgcn {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub ids: ModelIds,
}

impl Sdgcn {
    /// Builds and initializes a model whose embedding table is a copy of the
    /// vocabulary's.
    pub fn new(config: ModelConfig, vocab: &Vocabulary, seed: u64) -> Result<Self> {
        config.validate()?;
        let d_emb = vocab.dim();
        if d_emb == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        let mut rng = RngStream::with_stream(seed, streams::INIT);
        let mut store = ParamStore::new();
        let h = config.d_hid;
        let two_h = 2 * h;
        let s = config.init_scale;
        let embedding = store.insert("embedding", vocab.embeddings.clone(), config.train_embeddings)?;
        let ctx_lstm = LstmParams::register(&mut store, "ctx_lstm", d_emb, h, s, &mut rng)?;
        let asp_lstm = LstmParams::register(&mut store, "asp_lstm", d_emb, h, s, &mut rng)?;
        let w_ca = if config.c2a {
            Some(store.insert("attn.w_ca", init_uniform(two_h, two_h, -s, s, &mut rng)?, true)?)
        } else {
            None
        };
        let w_ac = store.insert("attn.w_ac", init_uniform(two_h, two_h, -s, s, &mut rng)?, true)?;
        let mut gcn = Vec::new();
        if config.gcn {
            for l in 0..config.gcn_layers {
                gcn.push(GcnLayerParams::register(&mut store, l, two_h, s, &mut rng)?);
            }
        }
        let head = OutputHead::register(&mut store, two_h, config.head_std, &mut rng)?;
        Ok(Self {
            config,
            params: store,
            ids: ModelIds {
                embedding,
                ctx_lstm,
                asp_lstm,
                w_ca,
                w_ac,
                gcn,
                head,
            },
        })
    }

    pub fn num_trainable(&self) -> usize {
        self.params.num_trainable()
    }

    /// Trainable parameter count excluding the embedding table.
    pub fn num_model_params(&self) -> usize {
        self.params
            .entries()
            .iter()
            .filter(|e| e.trainable() && e.name() != "embedding")
            .map(|e| e.value.len())
            .sum()
    }

    fn check_instance(&self, inst: &EncodedInstance) -> Result<()> {
        let n = inst.token_ids.len();
        let k = inst.spans.len();
        if n == 0 || k == 0 {
            return Err(Error::Data(format!("instance {} is empty", inst.id)));
        }
        if k > self.config.max_aspects {
            return Err(Error::Data(format!(
                "instance {} has {k} aspects (max {})",
                inst.id, self.config.max_aspects
            )));
        }
        if inst.labels.len() != k {
            return Err(Error::Data(format!("instance {}: {k} spans but {} labels", inst.id, inst.labels.len())));
        }
        for &(s, e) in &inst.spans {
            if s >= e || e > n {
                return Err(Error::Data(format!("instance {}: bad span {s}..{e}", inst.id)));
            }
        }
        Ok(())
    }

    /// Builds the forward pass for one sentence on `g`. With `dropout_rng`
    /// the pass runs in training mode.
    pub fn forward(
        &self,
        g: &mut Graph<'_>,
        inst: &EncodedInstance,
        mut dropout_rng: Option<&mut RngStream>,
    ) -> Result<Forward> {
        self.check_instance(inst)?;
        let cfg = &self.config;
        let n = inst.token_ids.len();

        let mut emb = g.embed(self.ids.embedding, &inst.token_ids)?;
        if let (Some(rng), true) = (dropout_rng.as_deref_mut(), cfg.dropout_embeddings) {
            emb = g.dropout(emb, cfg.dropout, true, rng)?;
        }
        let context = bilstm_encode(g, emb, &self.ids.ctx_lstm)?;
        let query = avg_pool_context(g, context)?;
        let w_ca = self.ids.w_ca.map(|id| g.param(id));
        let w_ac = g.param(self.ids.w_ac);

        let mut xs = Vec::with_capacity(inst.spans.len());
        let mut betas = Vec::with_capacity(inst.spans.len());
        let mut gammas = Vec::with_capacity(inst.spans.len());
        for &(start, end) in &inst.spans {
            let aspect_emb = g.slice_cols(emb, start, end - start)?;
            let aspect = bilstm_encode(g, aspect_emb, &self.ids.asp_lstm)?;
            let (m, beta) = match w_ca {
                Some(w) => {
                    let s = context_to_aspect(g, query, aspect, w)?;
                    (s.m, Some(s.beta))
                }
                None => (g.mean_cols(aspect)?, None),
            };
            let positioned = if cfg.position {
                g.scale_cols(context, &position_weights(n, start, end, cfg.window))?
            } else {
                context
            };
            let a2c = aspect_to_context(g, m, positioned, context, w_ac, cfg.attend_over_weighted_context)?;
            xs.push(a2c.x);
            betas.push(beta);
            gammas.push(a2c.gamma);
        }

        let mut x = g.concat_cols(&xs)?;
        if let (Some(rng), true) = (dropout_rng.as_deref_mut(), cfg.dropout_gcn_input) {
            x = g.dropout(x, cfg.dropout, true, rng)?;
        }
        if cfg.gcn {
            let graph = SentimentGraph::build(inst.spans.len(), cfg.topology)?;
            x = gcn_forward(g, x, &graph, &self.ids.gcn)?;
        }
        let (logits, probs) = classify(g, x, &self.ids.head)?;
        Ok(Forward {
            logits,
            probs,
            betas,
            gammas,
        })
    }

    /// Sentence loss for a forward pass.
    pub fn loss(&self, g: &mut Graph<'_>, fwd: &Forward, labels: &[usize]) -> Result<Var> {
        let head_w = g.param(self.ids.head.w);
        sentence_loss(
            g,
            fwd.logits,
            labels,
            &LossConfig {
                lambda: self.config.lambda,
            },
            &[head_w],
        )
    }

    /// Forward plus loss in one call; the form the gradient checker wants.
    pub fn loss_graph(
        &self,
        g: &mut Graph<'_>,
        inst: &EncodedInstance,
        dropout_rng: Option<&mut RngStream>,
    ) -> Result<Var> {
        let fwd = self.forward(g, inst, dropout_rng)?;
        self.loss(g, &fwd, &inst.labels)
    }

    /// Deterministic prediction (dropout off).
    pub fn predict(&self, inst: &EncodedInstance) -> Result<Prediction> {
        let mut g = Graph::new(&self.params);
        let fwd = self.forward(&mut g, inst, None)?;
        let probs = g.value(fwd.probs).clone();
        let labels = (0..probs.cols())
            .map(|k| argmax(&probs.col_vec(k)))
            .collect();
        Ok(Prediction {
            labels,
            betas: fwd
                .betas
                .iter()
                .map(|b| b.map(|v| g.value(v).data().to_vec()))
                .collect(),
            gammas: fwd.gammas.iter().map(|&v| g.value(v).data().to_vec()).collect(),
            probs,
        })
    }
}

/// Index of the largest value; the first one on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Builds the tiny reference model (`d_hid = 4`, six tokens, three aspects,
/// two GCN layers, no dropout, trainable embeddings) and checks every
/// parameter group of its sentence loss against finite differences.
pub fn tiny_gradcheck(topology: Topology, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let names: Vec<String> = (0..8).map(|i| format!("w{i}")).collect();
    let mut vocab = Vocabulary::new(names.iter().map(|s| s.as_str()), 5);
    let mut rng = RngStream::new(1);
    for r in 1..vocab.len() {
        for c in 0..vocab.dim() {
            vocab.embeddings.set(r, c, rng.uniform(-1.0, 1.0));
        }
    }
    let config = ModelConfig {
        d_hid: 4,
        topology,
        gcn_layers: 2,
        dropout: 0.0,
        init_scale: 0.5,
        train_embeddings: true,
        ..ModelConfig::default()
    };
    let model = Sdgcn::new(config, &vocab, 7)?;
    let inst = EncodedInstance {
        id: "tiny".into(),
        token_ids: vec![2, 3, 4, 5, 6, 7],
        spans: vec![(0, 1), (2, 4), (5, 6)],
        labels: vec![0, 1, 2],
    };
    grad_check(&model.params, |g| model.loss_graph(g, &inst, None), cfg)
}
