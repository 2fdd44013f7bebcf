//! Synthetic multi-aspect corpus with controlled sentiment dependencies.
//!
//! Every sentence is a chain of clauses `the <aspect> is <opinion>` joined by
//! conjunctions. A "same" conjunction (`and`, `,`) means the next aspect has
//! the same polarity as the previous one; an "opposite" conjunction (`but`)
//! flips it. With probability `mask_rate` a sentence has the opinion word of
//! one aspect replaced by a mask token; that aspect's label then follows only
//! from a neighbouring aspect's opinion and the conjunction between them.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::data::{AspectSpan, Polarity, SentenceInstance, Vocabulary};
use crate::params::init_normal;
use crate::rng::{streams, RngStream};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub aspects: Vec<String>,
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    pub same_conjunctions: Vec<String>,
    pub opposite_conjunctions: Vec<String>,
    pub fillers: Vec<String>,
    pub mask_token: String,
    pub mask_rate: f64,
    pub min_aspects: usize,
    pub max_aspects: usize,
    /// Upper bound on filler words inserted before each opinion word.
    pub max_fillers: usize,
}

fn words(ws: &[&str]) -> Vec<String> {
    ws.iter().map(|w| w.to_string()).collect()
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            aspects: words(&[
                "food", "service", "staff", "price", "ambience", "wine", "menu", "dessert",
                "pizza", "decor", "music", "portions", "sushi", "coffee", "waiter", "location",
            ]),
            positive: words(&["good", "great", "excellent", "delicious", "lovely", "friendly", "superb", "fantastic"]),
            negative: words(&["bad", "awful", "terrible", "horrible", "rude", "bland", "poor", "disappointing"]),
            same_conjunctions: words(&["and", ","]),
            opposite_conjunctions: words(&["but"]),
            fillers: words(&["really", "quite", "very", "honestly", "truly", "rather"]),
            mask_token: "[mask]".into(),
            mask_rate: 0.3,
            min_aspects: 2,
            max_aspects: 3,
            max_fillers: 2,
        }
    }
}

impl SyntheticSpec {
    /// Every word the generator can emit, in a fixed order.
    pub fn vocabulary_words(&self) -> Vec<&str> {
        let mut out: Vec<&str> = ["the", "is", "."].into();
        for list in [
            &self.aspects,
            &self.positive,
            &self.negative,
            &self.same_conjunctions,
            &self.opposite_conjunctions,
            &self.fillers,
        ] {
            out.extend(list.iter().map(|s| s.as_str()));
        }
        out.push(&self.mask_token);
        out
    }

    fn validate(&self) -> Result<(), crate::Error> {
        let empty = [
            &self.aspects,
            &self.positive,
            &self.negative,
            &self.same_conjunctions,
            &self.opposite_conjunctions,
        ]
        .iter()
        .any(|l| l.is_empty());
        if empty {
            return Err(crate::Error::Config("synthetic spec needs non-empty word lists".into()));
        }
        if self.min_aspects < 2 || self.max_aspects < self.min_aspects {
            return Err(crate::Error::Config("synthetic sentences need 2..=max aspects".into()));
        }
        if self.max_aspects > self.aspects.len() {
            return Err(crate::Error::Config("not enough distinct aspect words".into()));
        }
        if !(0.0..=1.0).contains(&self.mask_rate) {
            return Err(crate::Error::Config("mask rate outside [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub instances: Vec<SentenceInstance>,
    /// `masked[s][k]`: the opinion word of aspect `k` in sentence `s` is masked.
    pub masked: Vec<Vec<bool>>,
}

impl SyntheticCorpus {
    pub fn masked_aspect_count(&self) -> usize {
        self.masked.iter().flatten().filter(|&&m| m).count()
    }

    /// Splits into the first `n` sentences and the rest.
    pub fn split_at(&self, n: usize) -> (SyntheticCorpus, SyntheticCorpus) {
        let n = n.min(self.instances.len());
        (
            SyntheticCorpus {
                instances: self.instances[..n].to_vec(),
                masked: self.masked[..n].to_vec(),
            },
            SyntheticCorpus {
                instances: self.instances[n..].to_vec(),
                masked: self.masked[n..].to_vec(),
            },
        )
    }
}

fn pick<'a>(list: &'a [String], rng: &mut RngStream) -> &'a str {
    &list[rng.below(list.len())]
}

/// Generates `count` sentences; identical `(spec, count, seed)` give an
/// identical corpus.
pub fn gen_synthetic(spec: &SyntheticSpec, count: usize, seed: u64) -> Result<SyntheticCorpus, crate::Error> {
    spec.validate()?;
    let mut rng = RngStream::with_stream(seed, streams::SYNTHETIC);
    let mut instances = Vec::with_capacity(count);
    let mut masked = Vec::with_capacity(count);
    for s in 0..count {
        let k = spec.min_aspects + rng.below(spec.max_aspects - spec.min_aspects + 1);
        let mut names: Vec<usize> = (0..spec.aspects.len()).collect();
        rng.shuffle(&mut names);

        let mut polarity = if rng.bernoulli(0.5) { Polarity::Positive } else { Polarity::Negative };
        let mask_idx = if rng.bernoulli(spec.mask_rate) { Some(rng.below(k)) } else { None };

        let mut tokens: Vec<String> = Vec::new();
        let mut aspects = Vec::with_capacity(k);
        for i in 0..k {
            if i > 0 {
                let flip = rng.bernoulli(0.5);
                let conj = if flip {
                    pick(&spec.opposite_conjunctions, &mut rng)
                } else {
                    pick(&spec.same_conjunctions, &mut rng)
                };
                tokens.push(conj.to_string());
                if flip {
                    polarity = polarity.opposite();
                }
            }
            tokens.push("the".into());
            let aspect = spec.aspects[names[i]].clone();
            let start = tokens.len();
            tokens.push(aspect.clone());
            tokens.push("is".into());
            let fillers = if spec.fillers.is_empty() { 0 } else { rng.below(spec.max_fillers + 1) };
            for _ in 0..fillers {
                tokens.push(pick(&spec.fillers, &mut rng).to_string());
            }
            let opinion = match polarity {
                Polarity::Positive => pick(&spec.positive, &mut rng),
                _ => pick(&spec.negative, &mut rng),
            };
            if mask_idx == Some(i) {
                tokens.push(spec.mask_token.clone());
            } else {
                tokens.push(opinion.to_string());
            }
            aspects.push(AspectSpan {
                start,
                end: start + 1,
                polarity,
                surface: aspect,
            });
        }
        tokens.push(".".into());
        masked.push((0..k).map(|i| mask_idx == Some(i)).collect());
        instances.push(SentenceInstance {
            id: format!("syn-{s}"),
            tokens,
            aspects,
        });
    }
    Ok(SyntheticCorpus { instances, masked })
}

/// Vocabulary over the spec's words with `N(0, 1/dim)` embeddings.
pub fn synthetic_vocabulary(spec: &SyntheticSpec, dim: usize, seed: u64) -> Result<Vocabulary, crate::Error> {
    let mut v = Vocabulary::new(spec.vocabulary_words(), dim);
    let mut rng = RngStream::with_stream(seed, streams::OOV);
    let std = 1.0 / libm::sqrt(dim as f64);
    let table = init_normal(v.len(), dim, 0.0, std, &mut rng)?;
    for r in 1..v.len() {
        for c in 0..dim {
            v.embeddings.set(r, c, table.get(r, c));
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let spec = SyntheticSpec::default();
        assert_eq!(gen_synthetic(&spec, 1000, 9).unwrap(), gen_synthetic(&spec, 1000, 9).unwrap());
    }

    #[test]
    fn labels_follow_conjunctions() {
        let spec = SyntheticSpec::default();
        let c = gen_synthetic(&spec, 500, 1).unwrap();
        for inst in &c.instances {
            inst.validate(16).unwrap();
            for w in inst.aspects.windows(2) {
                // conjunction is the token right before "the <aspect>"
                let conj = &inst.tokens[w[1].start - 2];
                if spec.opposite_conjunctions.contains(conj) {
                    assert_eq!(w[1].polarity, w[0].polarity.opposite());
                } else {
                    assert!(spec.same_conjunctions.contains(conj));
                    assert_eq!(w[1].polarity, w[0].polarity);
                }
            }
        }
    }

    #[test]
    fn but_rule() {
        // find a two-aspect sentence "... good but ... [mask]" and check the label
        let spec = SyntheticSpec {
            mask_rate: 1.0,
            max_aspects: 2,
            ..SyntheticSpec::default()
        };
        let c = gen_synthetic(&spec, 200, 3).unwrap();
        let mut seen = 0;
        for (inst, m) in c.instances.iter().zip(&c.masked) {
            if m[1] && inst.tokens.contains(&"but".to_string()) {
                let first_opinion = &inst.tokens[inst.aspects[1].start - 3];
                if spec.positive.contains(first_opinion) {
                    assert_eq!(inst.aspects[1].polarity, Polarity::Negative);
                    seen += 1;
                }
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn mask_rate_zero_means_no_masks() {
        let spec = SyntheticSpec {
            mask_rate: 0.0,
            ..SyntheticSpec::default()
        };
        let c = gen_synthetic(&spec, 300, 4).unwrap();
        assert_eq!(c.masked_aspect_count(), 0);
        for inst in &c.instances {
            assert!(!inst.tokens.contains(&spec.mask_token));
        }
    }

    #[test]
    fn mask_rate_is_respected() {
        let c = gen_synthetic(&SyntheticSpec::default(), 2000, 5).unwrap();
        let frac = c.masked.iter().filter(|m| m.iter().any(|&x| x)).count() as f64 / 2000.0;
        assert!((frac - 0.3).abs() < 0.04, "{frac}");
    }
}
