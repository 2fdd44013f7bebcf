//! Sentences, aspect spans and the vocabulary.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Number of sentiment classes.
pub const NUM_CLASSES: usize = 3;

/// Default upper bound on aspects per sentence.
pub const DEFAULT_MAX_ASPECTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

impl Polarity {
    pub const ALL: [Polarity; NUM_CLASSES] =
        [Polarity::Positive, Polarity::Negative, Polarity::Neutral];

    pub fn index(self) -> usize {
        match self {
            Polarity::Positive => 0,
            Polarity::Negative => 1,
            Polarity::Neutral => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
        }
    }

    /// Parses a label; `conflict` and anything unknown yield `None`.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "positive" => Some(Polarity::Positive),
            "negative" => Some(Polarity::Negative),
            "neutral" => Some(Polarity::Neutral),
            _ => None,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
            Polarity::Neutral => Polarity::Neutral,
        }
    }
}

/// One aspect term: tokens `start..end` of its sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AspectSpan {
    pub start: usize,
    pub end: usize,
    pub polarity: Polarity,
    pub surface: String,
}

impl AspectSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentenceInstance {
    pub id: String,
    pub tokens: Vec<String>,
    pub aspects: Vec<AspectSpan>,
}

impl SentenceInstance {
    /// Checks the structural invariants: at least one token, between one and
    /// `max_aspects` aspects, every span non-empty and inside the sentence.
    pub fn validate(&self, max_aspects: usize) -> Result<()> {
        let n = self.tokens.len();
        if n == 0 {
            return Err(Error::Data(format!("sentence {} has no tokens", self.id)));
        }
        if self.aspects.is_empty() {
            return Err(Error::Data(format!("sentence {} has no aspects", self.id)));
        }
        if self.aspects.len() > max_aspects {
            return Err(Error::Data(format!(
                "sentence {} has {} aspects, more than the configured maximum {max_aspects}",
                self.id,
                self.aspects.len()
            )));
        }
        for (i, a) in self.aspects.iter().enumerate() {
            if a.is_empty() || a.end > n {
                return Err(Error::Data(format!(
                    "sentence {}: aspect {i} span {}..{} invalid for {n} tokens",
                    self.id, a.start, a.end
                )));
            }
        }
        Ok(())
    }
}

/// A sentence mapped to vocabulary indices, ready for the model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedInstance {
    pub id: String,
    pub token_ids: Vec<usize>,
    pub spans: Vec<(usize, usize)>,
    pub labels: Vec<usize>,
}

impl EncodedInstance {
    pub fn num_aspects(&self) -> usize {
        self.spans.len()
    }
}

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Word index plus the `V × d_emb` embedding table. Index 0 is padding (a
/// zero row), index 1 stands for unknown words.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: BTreeMap<String, usize>,
    pub embeddings: Tensor,
}

impl Vocabulary {
    /// Vocabulary over `words` (deduplicated, first occurrence wins) with an
    /// all-zero embedding table of width `dim`.
    pub fn new<'a>(words: impl IntoIterator<Item = &'a str>, dim: usize) -> Self {
        let mut v = Self {
            words: Vec::new(),
            index: BTreeMap::new(),
            embeddings: Tensor::zeros(0, 0),
        };
        v.push(PAD_TOKEN);
        v.push(UNK_TOKEN);
        for w in words {
            v.push(w);
        }
        v.embeddings = Tensor::zeros(v.words.len(), dim);
        v
    }

    /// Vocabulary from an explicit word list and table; `words[0]` and
    /// `words[1]` must be the padding and unknown tokens.
    pub fn from_parts(words: Vec<String>, embeddings: Tensor) -> Result<Self> {
        if words.len() < 2 || words[PAD] != PAD_TOKEN || words[UNK] != UNK_TOKEN {
            return Err(Error::Data("vocabulary must start with <pad>, <unk>".into()));
        }
        if embeddings.rows() != words.len() {
            return Err(Error::Shape {
                op: "vocabulary",
                lhs: (words.len(), embeddings.cols()),
                rhs: embeddings.shape(),
            });
        }
        let mut index = BTreeMap::new();
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary word `{w}`")));
            }
        }
        Ok(Self {
            words,
            index,
            embeddings,
        })
    }

    fn push(&mut self, w: &str) {
        if !self.index.contains_key(w) {
            self.index.insert(w.to_string(), self.words.len());
            self.words.push(w.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn lookup(&self, word: &str) -> usize {
        self.get(word).unwrap_or(UNK)
    }

    pub fn encode(&self, inst: &SentenceInstance) -> EncodedInstance {
        EncodedInstance {
            id: inst.id.clone(),
            token_ids: inst.tokens.iter().map(|t| self.lookup(t)).collect(),
            spans: inst.aspects.iter().map(|a| (a.start, a.end)).collect(),
            labels: inst.aspects.iter().map(|a| a.polarity.index()).collect(),
        }
    }
}
