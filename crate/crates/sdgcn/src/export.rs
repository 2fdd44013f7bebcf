//! Line-oriented text outputs: attention weights, dataset statistics, epoch
//! logs and run results.
//!
//! Every record is one line of tab-separated `key=value` fields. Values never
//! contain tabs or newlines; ids are escaped with `\t`, `\n` and `\\`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::Path;

use sdgcn_core::attention::AttentionRecord;
use sdgcn_core::model::Prediction;
use sdgcn_core::stats::DatasetStats;
use sdgcn_core::train::EpochLog;
use sdgcn_core::{Polarity, SentenceInstance};

use crate::error::{Error, Result};

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut it = s.chars();
    while let Some(c) = it.next() {
        if c == '\\' {
            match it.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some(o) => out.push(o),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Splits a record line into its fields.
pub fn parse_fields(line: &str) -> std::result::Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for field in line.split('\t') {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| format!("field {field:?} is not key=value"))?;
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

fn weights_text(ws: &[f64]) -> String {
    ws.iter().map(|w| format!("{w:.6}")).collect::<Vec<_>>().join(" ")
}

fn tokens_text(ts: &[String]) -> String {
    ts.iter().map(|t| escape(t)).collect::<Vec<_>>().join(" ")
}

/// Attention records for one predicted sentence.
pub fn attention_records(inst: &SentenceInstance, pred: &Prediction) -> Vec<AttentionRecord> {
    inst.aspects
        .iter()
        .enumerate()
        .map(|(k, a)| AttentionRecord {
            sentence_id: inst.id.clone(),
            aspect_index: k,
            tokens: inst.tokens.clone(),
            weights: pred.gammas[k].clone(),
            aspect_tokens: inst.tokens[a.start..a.end].to_vec(),
            aspect_weights: pred.betas[k].clone().unwrap_or_default(),
        })
        .collect()
}

/// One line per record; weights at 6 decimals.
pub fn format_attention(records: &[AttentionRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(
            s,
            "sentence={}\taspect={}\ttokens={}\tweights={}\taspect_tokens={}\taspect_weights={}",
            escape(&r.sentence_id),
            r.aspect_index,
            tokens_text(&r.tokens),
            weights_text(&r.weights),
            tokens_text(&r.aspect_tokens),
            weights_text(&r.aspect_weights),
        );
    }
    s
}

pub fn parse_attention(text: &str) -> Result<Vec<AttentionRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| Error::AttentionFormat { line: i + 1, message };
        let f = parse_fields(line).map_err(bad)?;
        let get = |k: &str| f.get(k).map(String::as_str).ok_or_else(|| bad(format!("missing `{k}`")));
        let words = |s: &str| -> Vec<String> { s.split(' ').filter(|t| !t.is_empty()).map(unescape).collect() };
        let nums = |s: &str| -> Result<Vec<f64>> {
            s.split(' ')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse().map_err(|_| bad(format!("`{t}` is not a weight"))))
                .collect()
        };
        let rec = AttentionRecord {
            sentence_id: unescape(get("sentence")?),
            aspect_index: get("aspect")?.parse().map_err(|_| bad("bad aspect index".into()))?,
            tokens: words(get("tokens")?),
            weights: nums(get("weights")?)?,
            aspect_tokens: words(get("aspect_tokens")?),
            aspect_weights: nums(get("aspect_weights")?)?,
        };
        if rec.tokens.len() != rec.weights.len() || rec.aspect_tokens.len() != rec.aspect_weights.len() {
            return Err(bad("token and weight counts differ".into()));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Statistics of one split as `key=value` lines, with the difference to
/// `reference` class counts when given.
pub fn stats_kv(dataset: &str, split: &str, stats: &DatasetStats, reference: Option<[usize; 3]>) -> String {
    let mut s = String::new();
    let p = format!("{dataset}.{split}");
    let _ = writeln!(s, "{p}.sentences={}", stats.sentences);
    let _ = writeln!(s, "{p}.aspects={}", stats.aspects);
    for c in 0..3 {
        let name = Polarity::from_index(c).unwrap().as_str();
        let _ = writeln!(s, "{p}.{name}={}", stats.class_counts[c]);
        if let Some(r) = reference {
            let diff = stats.class_counts[c] as i64 - r[c] as i64;
            let _ = writeln!(s, "{p}.{name}.expected={}", r[c]);
            let _ = writeln!(s, "{p}.{name}.deviation={diff}");
        }
    }
    if let Some(r) = reference {
        let _ = writeln!(s, "{p}.matches_reference={}", r == stats.class_counts);
    }
    for (k, n) in &stats.aspects_per_sentence {
        let _ = writeln!(s, "{p}.k{k}={n}");
    }
    let _ = writeln!(s, "{p}.max_k={}", stats.max_aspects());
    let _ = writeln!(s, "{p}.multi_aspect_sentence_fraction={:.6}", stats.multi_aspect_sentence_fraction());
    let _ = writeln!(s, "{p}.multi_aspect_aspect_fraction={:.6}", stats.multi_aspect_aspect_fraction());
    s
}

fn opt(v: Option<f64>) -> String {
    v.map_or("none".into(), |x| format!("{x:?}"))
}

/// One epoch as a record line. Losses are written with full precision.
pub fn epoch_line(run: &str, log: &EpochLog) -> String {
    format!(
        "run={}\tepoch={}\ttrain_loss={:?}\ttrain_accuracy={}\ttest_accuracy={}\ttest_macro_f1={}",
        escape(run),
        log.epoch,
        log.train_loss,
        opt(log.train_accuracy),
        opt(log.test_accuracy),
        opt(log.test_macro_f1),
    )
}

/// A summary record of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRecord {
    pub command: String,
    pub run: String,
    pub config_hash: String,
    pub fields: Vec<(String, String)>,
    pub runtime_s: f64,
}

impl ResultRecord {
    pub fn new(command: &str, run: &str, config_hash: &str) -> Self {
        Self {
            command: command.into(),
            run: run.into(),
            config_hash: config_hash.into(),
            fields: Vec::new(),
            runtime_s: 0.0,
        }
    }

    pub fn field(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.fields.push((key.into(), value.to_string()));
        self
    }

    pub fn to_line(&self) -> String {
        let mut s = format!(
            "command={}\trun={}\tconfig_hash={}",
            escape(&self.command),
            escape(&self.run),
            self.config_hash
        );
        for (k, v) in &self.fields {
            let _ = write!(s, "\t{k}={}", escape(v));
        }
        let _ = write!(s, "\truntime_s={:.3}", self.runtime_s);
        s
    }
}

/// Appends `line` (plus a newline) to `path`, creating it if needed.
pub fn append_line(path: &Path, line: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> AttentionRecord {
        AttentionRecord {
            sentence_id: "12\tb".into(),
            aspect_index: 1,
            tokens: vec!["the".into(), "food".into(), "was".into()],
            weights: vec![0.1234567, 0.5, 0.3765433],
            aspect_tokens: vec!["food".into()],
            aspect_weights: vec![1.0],
        }
    }

    #[test]
    fn attention_round_trip_is_stable() {
        let text = format_attention(&[record()]);
        assert!(text.contains("weights=0.123457 0.500000 0.376543\t"));
        let back = parse_attention(&text).unwrap();
        assert_eq!(back[0].sentence_id, "12\tb");
        assert_eq!(back[0].tokens, record().tokens);
        assert_eq!(back[0].weights, vec![0.123457, 0.5, 0.376543]);
        let again = parse_attention(&format_attention(&back)).unwrap();
        let bits = |r: &AttentionRecord| r.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&again[0]), bits(&back[0]));
        assert_eq!(format_attention(&again), text);
    }

    #[test]
    fn attention_format_errors_name_the_line() {
        let mut text = format_attention(&[record()]);
        text.push_str("sentence=x\taspect=0\ttokens=a b\tweights=0.5\taspect_tokens=a\taspect_weights=1.000000\n");
        match parse_attention(&text) {
            Err(Error::AttentionFormat { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stats_report_deviation() {
        let mut st = DatasetStats::default();
        st.class_counts = [10, 5, 2];
        st.sentences = 3;
        st.aspects = 17;
        st.aspects_per_sentence.insert(1, 1);
        let text = stats_kv("restaurant", "train", &st, Some([10, 4, 2]));
        assert!(text.contains("restaurant.train.negative.deviation=1\n"));
        assert!(text.contains("restaurant.train.matches_reference=false\n"));
        assert!(text.contains("restaurant.train.k1=1\n"));
    }

    #[test]
    fn result_line_fields() {
        let mut r = ResultRecord::new("train", "sdgcn-g", "00ff");
        r.field("accuracy", 0.5).field("note", "a\tb");
        r.runtime_s = 1.25;
        let f = parse_fields(&r.to_line()).unwrap();
        assert_eq!(f["accuracy"], "0.5");
        assert_eq!(unescape(&f["note"]), "a\tb");
        assert_eq!(f["runtime_s"], "1.250");
        assert_eq!(f["config_hash"], "00ff");
    }

    #[test]
    fn epoch_line_keeps_full_precision() {
        let log = EpochLog {
            epoch: 3,
            train_loss: 0.1 + 0.2,
            train_accuracy: None,
            test_accuracy: Some(0.75),
            test_macro_f1: Some(0.5),
        };
        let f = parse_fields(&epoch_line("r", &log)).unwrap();
        assert_eq!(f["train_loss"].parse::<f64>().unwrap(), 0.1 + 0.2);
        assert_eq!(f["train_accuracy"], "none");
    }
}
