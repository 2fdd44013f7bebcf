//! Data preparation and single training runs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use sdgcn_core::data::EncodedInstance;
use sdgcn_core::train::{train, EpochLog, TrainConfig, TrainOutcome};
use sdgcn_core::{ModelConfig, Sdgcn, SentenceInstance, Vocabulary};

use crate::config::RunConfig;
use crate::corpus::ParseReport;
use crate::datasets::{self, load_split, Split, GLOVE_ENV};
use crate::error::{Error, Result};
use crate::glove::{corpus_words, load_glove, random_vocabulary, GloveReport};

/// Parsed splits plus the vocabulary built over both of them.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub train: Vec<SentenceInstance>,
    pub test: Vec<SentenceInstance>,
    pub train_report: ParseReport,
    pub test_report: ParseReport,
    pub vocab: Vocabulary,
    /// `None` when the vocabulary is random (no embedding file).
    pub glove: Option<GloveReport>,
    pub train_encoded: Vec<EncodedInstance>,
    pub test_encoded: Vec<EncodedInstance>,
}

impl Prepared {
    /// Builds a prepared set from in-memory instances.
    pub fn from_instances(train: Vec<SentenceInstance>, test: Vec<SentenceInstance>, vocab: Vocabulary) -> Self {
        let train_encoded = train.iter().map(|i| vocab.encode(i)).collect();
        let test_encoded = test.iter().map(|i| vocab.encode(i)).collect();
        Self {
            train,
            test,
            train_report: ParseReport::default(),
            test_report: ParseReport::default(),
            vocab,
            glove: None,
            train_encoded,
            test_encoded,
        }
    }
}

impl RunConfig {
    /// Fills an unset data directory and embedding file from the
    /// environment.
    pub fn with_env_defaults(mut self) -> Self {
        if self.data.data_dir.is_none() {
            self.data.data_dir = datasets::data_dir_from_env();
        }
        if self.data.embeddings.is_none() {
            self.data.embeddings = std::env::var_os(GLOVE_ENV).map(PathBuf::from);
        }
        self
    }

    /// Train and test XML paths, from explicit paths or the data directory.
    pub fn split_paths(&self) -> Result<(PathBuf, PathBuf)> {
        let find = |explicit: &Option<PathBuf>, split| -> Result<PathBuf> {
            if let Some(p) = explicit {
                return Ok(p.clone());
            }
            let dir = self.data.data_dir.as_ref().ok_or_else(|| {
                Error::Missing(format!(
                    "no data directory: set `data_dir` or {}",
                    datasets::DATA_DIR_ENV
                ))
            })?;
            datasets::locate(dir, self.data.dataset, split)
        };
        Ok((find(&self.data.train_xml, Split::Train)?, find(&self.data.test_xml, Split::Test)?))
    }
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let (train_path, test_path) = cfg.split_paths()?;
    let cache = cfg.data.cache_dir.as_deref();
    let train = load_split(&train_path, cfg.model.max_aspects, cache)?;
    let test = load_split(&test_path, cfg.model.max_aspects, cache)?;
    let words = corpus_words([train.instances.as_slice(), test.instances.as_slice()]);
    let (vocab, glove) = match &cfg.data.embeddings {
        Some(p) => {
            let (v, r) = load_glove(p, &words, None, cfg.train.seed)?;
            (v, Some(r))
        }
        None => (random_vocabulary(&words, cfg.data.d_emb, cfg.train.seed), None),
    };
    let mut prepared = Prepared::from_instances(train.instances, test.instances, vocab);
    prepared.train_report = train.report;
    prepared.test_report = test.report;
    prepared.glove = glove;
    Ok(prepared)
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub model: Sdgcn,
    pub outcome: TrainOutcome,
    pub runtime_s: f64,
}

/// Trains one model on `data` with the given configs.
pub fn run_training(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    data: &Prepared,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<RunSummary> {
    let t0 = Instant::now();
    let mut model = Sdgcn::new(model_cfg.clone(), &data.vocab, train_cfg.seed)?;
    let outcome = train(&mut model, &data.train_encoded, &data.test_encoded, train_cfg, on_epoch)?;
    Ok(RunSummary {
        model,
        outcome,
        runtime_s: t0.elapsed().as_secs_f64(),
    })
}

/// Writes the vocabulary word list, one word per line.
pub fn save_vocab_words(path: &Path, vocab: &Vocabulary) -> Result<()> {
    let mut text = vocab.words().join("\n");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_vocab_words(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}
