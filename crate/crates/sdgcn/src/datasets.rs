//! Locating and loading the Restaurant and Laptop corpora.

use std::path::{Path, PathBuf};

use sdgcn_core::stats::DatasetStats;
use sdgcn_core::SentenceInstance;

use crate::cache;
use crate::corpus::{parse_semeval, ParseReport};
use crate::error::{Error, Result};

/// Environment variable naming the directory with the SemEval XML files.
pub const DATA_DIR_ENV: &str = "SDGCN_DATA_DIR";
/// Environment variable naming a GloVe text file.
pub const GLOVE_ENV: &str = "SDGCN_GLOVE";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DatasetName {
    Restaurant,
    Laptop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl DatasetName {
    pub const ALL: [DatasetName; 2] = [DatasetName::Restaurant, DatasetName::Laptop];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::Restaurant => "restaurant",
            DatasetName::Laptop => "laptop",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "restaurant" | "restaurants" | "rest" | "rest14" => Some(DatasetName::Restaurant),
            "laptop" | "laptops" | "lap14" => Some(DatasetName::Laptop),
            _ => None,
        }
    }

    /// File names tried, in order, inside the data directory.
    pub fn candidates(self, split: Split) -> &'static [&'static str] {
        match (self, split) {
            (DatasetName::Restaurant, Split::Train) => &[
                "Restaurants_Train_v2.xml",
                "Restaurants_Train.xml",
                "restaurant_train.xml",
            ],
            (DatasetName::Restaurant, Split::Test) => &[
                "Restaurants_Test_Gold.xml",
                "Restaurants_Test.xml",
                "restaurant_test.xml",
            ],
            (DatasetName::Laptop, Split::Train) => &[
                "Laptop_Train_v2.xml",
                "Laptops_Train_v2.xml",
                "Laptop_Train.xml",
                "Laptops_Train.xml",
                "laptop_train.xml",
            ],
            (DatasetName::Laptop, Split::Test) => &[
                "Laptops_Test_Gold.xml",
                "Laptop_Test_Gold.xml",
                "Laptops_Test.xml",
                "laptop_test.xml",
            ],
        }
    }

    /// Published per-class aspect counts `[positive, negative, neutral]`
    /// after dropping `conflict` aspects.
    pub fn reference_counts(self, split: Split) -> [usize; 3] {
        match (self, split) {
            (DatasetName::Restaurant, Split::Train) => [2164, 807, 637],
            (DatasetName::Restaurant, Split::Test) => [728, 196, 196],
            (DatasetName::Laptop, Split::Train) => [994, 870, 464],
            (DatasetName::Laptop, Split::Test) => [341, 128, 169],
        }
    }
}

/// Finds the XML file for `(name, split)` in `dir`.
pub fn locate(dir: &Path, name: DatasetName, split: Split) -> Result<PathBuf> {
    for c in name.candidates(split) {
        let p = dir.join(c);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::Missing(format!(
        "no {} {} file in {} (tried {})",
        name.as_str(),
        split.as_str(),
        dir.display(),
        name.candidates(split).join(", ")
    )))
}

/// The data directory from the environment, if set.
pub fn data_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)
}

#[derive(Clone, Debug)]
pub struct LoadedSplit {
    pub path: PathBuf,
    pub instances: Vec<SentenceInstance>,
    pub report: ParseReport,
    pub from_cache: bool,
}

impl LoadedSplit {
    pub fn stats(&self) -> DatasetStats {
        DatasetStats::compute(&self.instances)
    }
}

/// Parses `path`, going through an instance cache in `cache_dir` when given.
/// A cache hit carries no parse report counters beyond the kept totals.
pub fn load_split(path: &Path, max_aspects: usize, cache_dir: Option<&Path>) -> Result<LoadedSplit> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fp = cache::fingerprint(&bytes);
    let cache_path = cache_dir.map(|d| {
        let stem = path.file_stem().map_or("corpus".into(), |s| s.to_string_lossy().into_owned());
        d.join(format!("{stem}.{max_aspects}.instances"))
    });
    if let Some(cp) = &cache_path {
        if let Some(instances) = cache::load_if_fresh(cp, &fp)? {
            let report = ParseReport {
                sentences_kept: instances.len(),
                aspects_kept: instances.iter().map(|i| i.aspects.len()).sum(),
                ..ParseReport::default()
            };
            return Ok(LoadedSplit {
                path: path.to_path_buf(),
                instances,
                report,
                from_cache: true,
            });
        }
    }
    let (instances, report) = parse_semeval(&bytes, max_aspects).map_err(|e| match e {
        Error::Xml { offset, message } => Error::Xml {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })?;
    if let Some(cp) = &cache_path {
        std::fs::create_dir_all(cp.parent().unwrap()).map_err(|e| Error::io(cp, e))?;
        cache::save(cp, &fp, &instances)?;
    }
    Ok(LoadedSplit {
        path: path.to_path_buf(),
        instances,
        report,
        from_cache: false,
    })
}
