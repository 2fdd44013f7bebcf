//! Fixed experiments shared by the CLI and the acceptance suite.

use std::time::Instant;

use sdgcn_core::data::EncodedInstance;
use sdgcn_core::gcn::Topology;
use sdgcn_core::synthetic::{gen_synthetic, synthetic_vocabulary, SyntheticCorpus, SyntheticSpec};
use sdgcn_core::train::{evaluate, train, TrainConfig};
use sdgcn_core::{ModelConfig, Sdgcn, SentenceInstance, Vocabulary};

use crate::error::Result;

/// Masked-opinion dependency task: a full model against the same model
/// without the GCN.
#[derive(Clone, Debug, PartialEq)]
pub struct DependencySettings {
    pub sentences: usize,
    pub mask_rate: f64,
    /// Sentences used for training; the rest are held out.
    pub train_sentences: usize,
    pub d_emb: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub corpus_seed: u64,
}

impl Default for DependencySettings {
    fn default() -> Self {
        Self {
            sentences: 2000,
            mask_rate: 0.3,
            train_sentences: 1600,
            d_emb: 16,
            model: ModelConfig {
                d_hid: 16,
                topology: Topology::Global,
                gcn_layers: 2,
                dropout: 0.0,
                init_scale: 0.1,
                head_std: 0.1,
                ..ModelConfig::default()
            },
            train: TrainConfig {
                epochs: 15,
                lr: 0.005,
                seed: 7,
                ..TrainConfig::default()
            },
            corpus_seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DependencyArm {
    pub name: String,
    pub overall: f64,
    pub masked_accuracy: f64,
    pub masked_aspects: usize,
    pub unmasked_accuracy: f64,
    pub epoch_losses: Vec<f64>,
    pub runtime_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DependencyResult {
    pub with_gcn: DependencyArm,
    pub without_gcn: DependencyArm,
}

impl DependencyResult {
    /// Masked-aspect accuracy gain of the GCN, in percentage points.
    pub fn masked_gain_pp(&self) -> f64 {
        100.0 * (self.with_gcn.masked_accuracy - self.without_gcn.masked_accuracy)
    }
}

fn run_arm(
    name: &str,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    vocab: &Vocabulary,
    train_set: &[EncodedInstance],
    test_set: &[EncodedInstance],
    held_out: &SyntheticCorpus,
) -> Result<DependencyArm> {
    let t0 = Instant::now();
    let mut model = Sdgcn::new(model_cfg.clone(), vocab, train_cfg.seed)?;
    // no test set during training: the held-out split is scored once at the end
    let outcome = train(&mut model, train_set, &[], train_cfg, |_| {})?;
    let report = evaluate(&model, test_set)?;
    let mut masked = (0, 0);
    let mut unmasked = (0, 0);
    let mut i = 0;
    for (s, flags) in held_out.masked.iter().enumerate() {
        for (k, &m) in flags.iter().enumerate() {
            let p = &report.predictions[i];
            debug_assert_eq!((p.sentence_id.as_str(), p.aspect_index), (held_out.instances[s].id.as_str(), k));
            let bucket = if m { &mut masked } else { &mut unmasked };
            bucket.1 += 1;
            if p.gold == p.predicted {
                bucket.0 += 1;
            }
            i += 1;
        }
    }
    let ratio = |(ok, n): (usize, usize)| if n == 0 { 0.0 } else { ok as f64 / n as f64 };
    Ok(DependencyArm {
        name: name.into(),
        overall: report.accuracy,
        masked_accuracy: ratio(masked),
        masked_aspects: masked.1,
        unmasked_accuracy: ratio(unmasked),
        epoch_losses: outcome.logs.iter().map(|l| l.train_loss).collect(),
        runtime_s: t0.elapsed().as_secs_f64(),
    })
}

pub fn dependency_experiment(s: &DependencySettings) -> Result<DependencyResult> {
    let spec = SyntheticSpec {
        mask_rate: s.mask_rate,
        ..SyntheticSpec::default()
    };
    let corpus = gen_synthetic(&spec, s.sentences, s.corpus_seed)?;
    let vocab = synthetic_vocabulary(&spec, s.d_emb, s.corpus_seed)?;
    let (train_part, held_out) = corpus.split_at(s.train_sentences);
    let train_set: Vec<_> = train_part.instances.iter().map(|i| vocab.encode(i)).collect();
    let test_set: Vec<_> = held_out.instances.iter().map(|i| vocab.encode(i)).collect();
    let with_cfg = ModelConfig {
        gcn: true,
        ..s.model.clone()
    };
    let without_cfg = ModelConfig {
        gcn: false,
        ..s.model.clone()
    };
    let (a, b) = std::thread::scope(|scope| {
        let a = scope.spawn(|| run_arm("SDGCN", &with_cfg, &s.train, &vocab, &train_set, &test_set, &held_out));
        let b = run_arm("BiAtt", &without_cfg, &s.train, &vocab, &train_set, &test_set, &held_out);
        (a.join().expect("worker panicked"), b)
    });
    Ok(DependencyResult {
        with_gcn: a?,
        without_gcn: b?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverfitResult {
    pub sentences: usize,
    pub epochs_run: usize,
    pub train_accuracy: f64,
    pub runtime_s: f64,
}

/// Trains on `instances` until training accuracy reaches `target` or
/// `max_epochs` pass.
pub fn overfit(
    instances: &[SentenceInstance],
    vocab: &Vocabulary,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    max_epochs: usize,
    target: f64,
) -> Result<OverfitResult> {
    let t0 = Instant::now();
    let encoded: Vec<_> = instances.iter().map(|i| vocab.encode(i)).collect();
    let mut model = Sdgcn::new(model_cfg.clone(), vocab, train_cfg.seed)?;
    let cfg = TrainConfig {
        epochs: max_epochs,
        eval_train: true,
        stop_at_train_accuracy: Some(target),
        ..train_cfg.clone()
    };
    let outcome = train(&mut model, &encoded, &[], &cfg, |_| {})?;
    let last = outcome.logs.last();
    Ok(OverfitResult {
        sentences: instances.len(),
        epochs_run: outcome.logs.len(),
        train_accuracy: last.and_then(|l| l.train_accuracy).unwrap_or(0.0),
        runtime_s: t0.elapsed().as_secs_f64(),
    })
}
