//! Per-split dataset statistics: class counts and aspects per sentence.

use alloc::collections::BTreeMap;

use crate::data::{SentenceInstance, NUM_CLASSES};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetStats {
    /// Aspect counts indexed by [`crate::Polarity::index`].
    pub class_counts: [usize; NUM_CLASSES],
    /// Number of sentences with exactly `k` aspects.
    pub aspects_per_sentence: BTreeMap<usize, usize>,
    pub sentences: usize,
    pub aspects: usize,
}

impl DatasetStats {
    pub fn compute(instances: &[SentenceInstance]) -> Self {
        let mut s = Self::default();
        for inst in instances {
            s.sentences += 1;
            s.aspects += inst.aspects.len();
            *s.aspects_per_sentence.entry(inst.aspects.len()).or_insert(0) += 1;
            for a in &inst.aspects {
                s.class_counts[a.polarity.index()] += 1;
            }
        }
        s
    }

    pub fn merge(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for c in 0..NUM_CLASSES {
            out.class_counts[c] += other.class_counts[c];
        }
        for (&k, &n) in &other.aspects_per_sentence {
            *out.aspects_per_sentence.entry(k).or_insert(0) += n;
        }
        out.sentences += other.sentences;
        out.aspects += other.aspects;
        out
    }

    /// Fraction of sentences with two or more aspects.
    pub fn multi_aspect_sentence_fraction(&self) -> f64 {
        if self.sentences == 0 {
            return 0.0;
        }
        let multi: usize = self.aspects_per_sentence.range(2..).map(|(_, n)| n).sum();
        multi as f64 / self.sentences as f64
    }

    /// Fraction of aspects that share their sentence with another aspect.
    pub fn multi_aspect_aspect_fraction(&self) -> f64 {
        if self.aspects == 0 {
            return 0.0;
        }
        let multi: usize = self.aspects_per_sentence.range(2..).map(|(k, n)| k * n).sum();
        multi as f64 / self.aspects as f64
    }

    pub fn max_aspects(&self) -> usize {
        self.aspects_per_sentence.keys().next_back().copied().unwrap_or(0)
    }
}
