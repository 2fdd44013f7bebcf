//! `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default; unknown keys and unparsable values are errors that name the line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sdgcn_core::gcn::Topology;
use sdgcn_core::train::TrainConfig;
use sdgcn_core::ModelConfig;
use sha2::{Digest, Sha256};

use crate::datasets::DatasetName;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub dataset: DatasetName,
    /// Directory searched for the standard SemEval file names.
    pub data_dir: Option<PathBuf>,
    pub train_xml: Option<PathBuf>,
    pub test_xml: Option<PathBuf>,
    /// GloVe text file; without one every row is random.
    pub embeddings: Option<PathBuf>,
    /// Embedding width when no file is given (otherwise taken from the file).
    pub d_emb: usize,
    pub cache_dir: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetName::Restaurant,
            data_dir: None,
            train_xml: None,
            test_xml: None,
            embeddings: None,
            d_emb: 300,
            cache_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

fn path(v: &str) -> Option<PathBuf> {
    (!v.is_empty() && v != "none").then(|| PathBuf::from(v))
}

impl RunConfig {
    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("`{key}`: cannot parse {v:?}"))
        }
        let flag = |v: &str| parse_bool(v).ok_or_else(|| format!("`{key}`: expected true/false, got {v:?}"));
        let m = &mut self.model;
        match key {
            "d_hid" => m.d_hid = num(key, value)?,
            "topology" => {
                m.topology = Topology::parse(value).ok_or_else(|| format!("`topology`: expected adjacent or global, got {value:?}"))?
            }
            "gcn_layers" => m.gcn_layers = num(key, value)?,
            "gcn" => m.gcn = flag(value)?,
            "c2a" => m.c2a = flag(value)?,
            "position" => m.position = flag(value)?,
            "window" => m.window = num(key, value)?,
            "attend_over_weighted_context" => m.attend_over_weighted_context = flag(value)?,
            "dropout" => m.dropout = num(key, value)?,
            "dropout_embeddings" => m.dropout_embeddings = flag(value)?,
            "dropout_gcn_input" => m.dropout_gcn_input = flag(value)?,
            "lambda" => m.lambda = num(key, value)?,
            "init_scale" => m.init_scale = num(key, value)?,
            "head_std" => m.head_std = num(key, value)?,
            "train_embeddings" => m.train_embeddings = flag(value)?,
            "max_aspects" => m.max_aspects = num(key, value)?,
            "epochs" => self.train.epochs = num(key, value)?,
            "batch_size" => self.train.batch_size = num(key, value)?,
            "lr" => self.train.lr = num(key, value)?,
            "seed" => self.train.seed = num(key, value)?,
            "dataset" => {
                self.data.dataset =
                    DatasetName::parse(value).ok_or_else(|| format!("`dataset`: expected restaurant or laptop, got {value:?}"))?
            }
            "data_dir" => self.data.data_dir = path(value),
            "train_xml" => self.data.train_xml = path(value),
            "test_xml" => self.data.test_xml = path(value),
            "embeddings" => self.data.embeddings = path(value),
            "d_emb" => self.data.d_emb = num(key, value)?,
            "cache_dir" => self.data.cache_dir = path(value),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: String| Error::ConfigSyntax { line: i + 1, message };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected `key = value`, got {line:?}")))?;
            cfg.set(k.trim(), v.trim()).map_err(syntax)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.train.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.train.lr >= 0.0) {
            return Err(Error::Config("lr must be non-negative".into()));
        }
        if self.data.d_emb == 0 {
            return Err(Error::Config("d_emb must be positive".into()));
        }
        Ok(())
    }

    /// Canonical `key = value` text; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let p = |p: &Option<PathBuf>| p.as_ref().map_or("none".to_string(), |p| p.display().to_string());
        let mut s = String::new();
        let pairs: Vec<(&str, String)> = vec![
            ("dataset", self.data.dataset.as_str().into()),
            ("data_dir", p(&self.data.data_dir)),
            ("train_xml", p(&self.data.train_xml)),
            ("test_xml", p(&self.data.test_xml)),
            ("embeddings", p(&self.data.embeddings)),
            ("d_emb", self.data.d_emb.to_string()),
            ("cache_dir", p(&self.data.cache_dir)),
            ("d_hid", m.d_hid.to_string()),
            ("topology", m.topology.as_str().into()),
            ("gcn_layers", m.gcn_layers.to_string()),
            ("gcn", m.gcn.to_string()),
            ("c2a", m.c2a.to_string()),
            ("position", m.position.to_string()),
            ("window", m.window.to_string()),
            ("attend_over_weighted_context", m.attend_over_weighted_context.to_string()),
            ("dropout", format!("{:?}", m.dropout)),
            ("dropout_embeddings", m.dropout_embeddings.to_string()),
            ("dropout_gcn_input", m.dropout_gcn_input.to_string()),
            ("lambda", format!("{:?}", m.lambda)),
            ("init_scale", format!("{:?}", m.init_scale)),
            ("head_std", format!("{:?}", m.head_std)),
            ("train_embeddings", m.train_embeddings.to_string()),
            ("max_aspects", m.max_aspects.to_string()),
            ("epochs", self.train.epochs.to_string()),
            ("batch_size", self.train.batch_size.to_string()),
            ("lr", format!("{:?}", self.train.lr)),
            ("seed", self.train.seed.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of [`RunConfig::to_text`].
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_published_setup() {
        let c = RunConfig::default();
        assert_eq!(c.train.batch_size, 32);
        assert_eq!(c.train.lr, 0.001);
        assert_eq!(c.model.d_hid, 300);
        assert_eq!(c.data.d_emb, 300);
        assert_eq!(c.model.dropout, 0.5);
        assert_eq!(c.model.lambda, 0.01);
        assert_eq!(c.model.gcn_layers, 2);
        assert_eq!(c.model.init_scale, 0.01);
    }

    #[test]
    fn parse_overrides_and_comments() {
        let c = RunConfig::parse("# run\n\ntopology = adjacent\ngcn_layers=3\nlr = 0.01\ndataset = laptop\n").unwrap();
        assert_eq!(c.model.topology, Topology::Adjacent);
        assert_eq!(c.model.gcn_layers, 3);
        assert_eq!(c.train.lr, 0.01);
        assert_eq!(c.data.dataset, DatasetName::Laptop);
    }

    #[test]
    fn unknown_key_names_the_line() {
        match RunConfig::parse("d_hid = 4\nwidth = 3\n") {
            Err(Error::ConfigSyntax { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("width"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(RunConfig::parse("gcn = maybe").is_err());
        assert!(RunConfig::parse("dropout = 1.0").is_err());
        assert!(RunConfig::parse("gcn_layers = 9").is_err());
        assert!(RunConfig::parse("no equals sign").is_err());
    }

    #[test]
    fn text_round_trip_and_hash() {
        let mut c = RunConfig::default();
        c.model.topology = Topology::Adjacent;
        c.train.lr = 0.1 + 0.2;
        c.data.embeddings = Some("glove.txt".into());
        let back = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(RunConfig::default().hash(), c.hash());
        assert_eq!(c.hash().len(), 16);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(RunConfig::load(Path::new("/nonexistent/x.cfg")), Err(Error::Io { .. })));
    }
}
