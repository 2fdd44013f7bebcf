//! GloVe text-format embeddings: one `word v1 v2 ... vd` line per word.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use sdgcn_core::rng::streams;
use sdgcn_core::{RngStream, SentenceInstance, Vocabulary};

use crate::error::{Error, Result};

/// Range of the rows given to words the embedding file does not cover.
pub const OOV_INIT: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct GloveReport {
    pub dim: usize,
    /// Corpus words (specials excluded).
    pub words: usize,
    pub found: usize,
    pub lines: usize,
}

impl GloveReport {
    pub fn coverage(&self) -> f64 {
        if self.words == 0 {
            1.0
        } else {
            self.found as f64 / self.words as f64
        }
    }
}

/// Sorted, deduplicated token list of all given instances.
pub fn corpus_words<'a>(sets: impl IntoIterator<Item = &'a [SentenceInstance]>) -> Vec<String> {
    let mut words = BTreeSet::new();
    for set in sets {
        for inst in set {
            for t in &inst.tokens {
                words.insert(t.clone());
            }
        }
    }
    words.into_iter().collect()
}

/// Vocabulary over `words` with every row but padding drawn from
/// `U(-0.01, 0.01)` on the OOV stream of `seed`.
pub fn random_vocabulary(words: &[String], dim: usize, seed: u64) -> Vocabulary {
    let mut v = Vocabulary::new(words.iter().map(|s| s.as_str()), dim);
    let mut rng = RngStream::with_stream(seed, streams::OOV);
    for r in 1..v.len() {
        for c in 0..dim {
            v.embeddings.set(r, c, rng.uniform(-OOV_INIT, OOV_INIT));
        }
    }
    v
}

/// Splits a line into `(word, values)`. Tokens that contain spaces (a few
/// exist in the large Common Crawl files) are accepted when the extra leading
/// fields are not numbers.
fn split_line(line: &str, dim: Option<usize>) -> std::result::Result<(String, Vec<&str>), String> {
    let fields: Vec<&str> = line.split(' ').filter(|f| !f.is_empty()).collect();
    if fields.len() < 2 {
        return Err(format!("expected a word and values, found {} field(s)", fields.len()));
    }
    let dim = dim.unwrap_or(fields.len() - 1);
    if fields.len() < dim + 1 {
        return Err(format!("expected {dim} values, found {}", fields.len() - 1));
    }
    let word_fields = fields.len() - dim;
    if word_fields > 1 && fields[1..word_fields].iter().any(|f| f.parse::<f64>().is_ok()) {
        return Err(format!("expected {dim} values, found {}", fields.len() - 1));
    }
    Ok((fields[..word_fields].join(" "), fields[word_fields..].to_vec()))
}

/// Reads embeddings for `words` from `reader`. The dimension is taken from
/// `dim` or, if `None`, from the first line; every line must agree. Words the
/// file lacks keep their seeded random rows; the first occurrence of a word in
/// the file wins.
pub fn read_glove<R: BufRead>(reader: R, words: &[String], dim: Option<usize>, seed: u64) -> Result<(Vocabulary, GloveReport)> {
    let mut dim = dim;
    let mut rows: HashMap<String, Vec<f64>> = HashMap::new();
    let wanted: BTreeSet<&str> = words.iter().map(|s| s.as_str()).collect();
    let mut lines = 0;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::EmbeddingFormat {
            line: lineno,
            message: e.to_string(),
        })?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        lines += 1;
        let fmt = |message: String| Error::EmbeddingFormat { line: lineno, message };
        let (word, fields) = split_line(line, dim).map_err(fmt)?;
        let d = *dim.get_or_insert(fields.len());
        if fields.len() != d {
            return Err(fmt(format!("expected {d} values, found {}", fields.len())));
        }
        let mut values = Vec::with_capacity(d);
        for f in fields {
            values.push(f.parse::<f64>().map_err(|_| fmt(format!("`{f}` is not a number")))?);
        }
        if wanted.contains(word.as_str()) && !rows.contains_key(&word) {
            rows.insert(word, values);
        }
    }
    let dim = dim.ok_or(Error::EmbeddingFormat {
        line: 0,
        message: "embedding file is empty".into(),
    })?;
    let mut vocab = random_vocabulary(words, dim, seed);
    let mut found = 0;
    for (r, w) in vocab.words().to_vec().iter().enumerate().skip(2) {
        if let Some(values) = rows.get(w) {
            found += 1;
            for (c, &v) in values.iter().enumerate() {
                vocab.embeddings.set(r, c, v);
            }
        }
    }
    let report = GloveReport {
        dim,
        words: vocab.len() - 2,
        found,
        lines,
    };
    Ok((vocab, report))
}

pub fn load_glove(path: &Path, words: &[String], dim: Option<usize>, seed: u64) -> Result<(Vocabulary, GloveReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_glove(BufReader::new(file), words, dim, seed)
}
