//! SemEval-2014 Task 4 XML reader.
//!
//! ```xml
//! <sentences>
//!   <sentence id="813">
//!     <text>All the appetizers and salads were fabulous.</text>
//!     <aspectTerms>
//!       <aspectTerm term="appetizers" polarity="positive" from="8" to="18"/>
//!     </aspectTerms>
//!   </sentence>
//! </sentences>
//! ```

use std::path::Path;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use sdgcn_core::text::{char_span_to_tokens, tokenize};
use sdgcn_core::{AspectSpan, Polarity, SentenceInstance};

use crate::error::{Error, Result};

/// An aspect whose character offsets did not fall on token boundaries and
/// was widened to the covering tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnapWarning {
    pub sentence_id: String,
    pub term: String,
    pub from: usize,
    pub to: usize,
    pub token_start: usize,
    pub token_end: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub sentences_read: usize,
    pub sentences_kept: usize,
    pub aspects_read: usize,
    pub aspects_kept: usize,
    pub conflict_dropped: usize,
    /// Sentences without any usable aspect (none annotated, or all dropped).
    pub zero_aspect_dropped: usize,
    /// Aspects whose offsets overlap no token at all.
    pub unresolved_dropped: usize,
    /// Ids of sentences with more aspects than the configured maximum.
    pub overflow_dropped: Vec<String>,
    pub snapped: Vec<SnapWarning>,
    /// Aspects whose `term` attribute does not match the text at its offsets.
    pub surface_mismatches: usize,
}

impl ParseReport {
    pub fn merge(&mut self, other: &ParseReport) {
        self.sentences_read += other.sentences_read;
        self.sentences_kept += other.sentences_kept;
        self.aspects_read += other.aspects_read;
        self.aspects_kept += other.aspects_kept;
        self.conflict_dropped += other.conflict_dropped;
        self.zero_aspect_dropped += other.zero_aspect_dropped;
        self.unresolved_dropped += other.unresolved_dropped;
        self.overflow_dropped.extend(other.overflow_dropped.iter().cloned());
        self.snapped.extend(other.snapped.iter().cloned());
        self.surface_mismatches += other.surface_mismatches;
    }

    /// `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        kv("sentences_read", self.sentences_read.to_string());
        kv("sentences_kept", self.sentences_kept.to_string());
        kv("aspects_read", self.aspects_read.to_string());
        kv("aspects_kept", self.aspects_kept.to_string());
        kv("conflict_dropped", self.conflict_dropped.to_string());
        kv("zero_aspect_dropped", self.zero_aspect_dropped.to_string());
        kv("unresolved_dropped", self.unresolved_dropped.to_string());
        kv("overflow_dropped", self.overflow_dropped.len().to_string());
        kv("snapped", self.snapped.len().to_string());
        kv("surface_mismatches", self.surface_mismatches.to_string());
        s
    }
}

struct RawAspect {
    term: String,
    polarity: String,
    from: usize,
    to: usize,
}

#[derive(Default)]
struct RawSentence {
    id: String,
    text: String,
    aspects: Vec<RawAspect>,
}

fn xml_err(offset: u64, message: impl Into<String>) -> Error {
    Error::Xml {
        offset,
        message: message.into(),
    }
}

fn attr(e: &BytesStart<'_>, name: &str, offset: u64) -> Result<Option<String>> {
    match e.try_get_attribute(name) {
        Ok(Some(a)) => a
            .unescape_value()
            .map(|v| Some(v.into_owned()))
            .map_err(|err| xml_err(offset, err.to_string())),
        Ok(None) => Ok(None),
        Err(err) => Err(xml_err(offset, err.to_string())),
    }
}

fn required(e: &BytesStart<'_>, name: &str, offset: u64) -> Result<String> {
    attr(e, name, offset)?.ok_or_else(|| {
        xml_err(
            offset,
            format!("<{}> lacks `{name}`", String::from_utf8_lossy(e.name().as_ref())),
        )
    })
}

fn offset_attr(e: &BytesStart<'_>, name: &str, offset: u64) -> Result<usize> {
    let v = required(e, name, offset)?;
    v.trim()
        .parse()
        .map_err(|_| xml_err(offset, format!("`{name}` is not a character offset: {v:?}")))
}

fn raw_aspect(e: &BytesStart<'_>, offset: u64) -> Result<RawAspect> {
    Ok(RawAspect {
        term: required(e, "term", offset)?,
        polarity: required(e, "polarity", offset)?,
        from: offset_attr(e, "from", offset)?,
        to: offset_attr(e, "to", offset)?,
    })
}

fn read_sentences(xml: &[u8]) -> Result<Vec<RawSentence>> {
    let mut reader = Reader::from_reader(xml);
    let mut buf = Vec::new();
    let mut out = Vec::new();
    let mut current: Option<RawSentence> = None;
    let mut in_text = false;
    let mut depth = 0usize;
    loop {
        let at = reader.buffer_position();
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| xml_err(reader.error_position(), e.to_string()))?;
        match event {
            Event::Start(e) => {
                depth += 1;
                match e.name().as_ref() {
                    b"sentence" => {
                        current = Some(RawSentence {
                            id: attr(&e, "id", at)?.unwrap_or_default(),
                            ..RawSentence::default()
                        });
                    }
                    b"text" => in_text = true,
                    b"aspectTerm" => {
                        if let Some(s) = current.as_mut() {
                            s.aspects.push(raw_aspect(&e, at)?);
                        }
                    }
                    _ => {}
                }
            }
            Event::Empty(e) => {
                if e.name().as_ref() == b"aspectTerm" {
                    match current.as_mut() {
                        Some(s) => s.aspects.push(raw_aspect(&e, at)?),
                        None => return Err(xml_err(at, "<aspectTerm> outside <sentence>")),
                    }
                }
            }
            Event::Text(t) if in_text => {
                let text = t.unescape().map_err(|e| xml_err(at, e.to_string()))?;
                if let Some(s) = current.as_mut() {
                    s.text.push_str(&text);
                }
            }
            Event::CData(t) if in_text => {
                if let Some(s) = current.as_mut() {
                    s.text.push_str(&String::from_utf8_lossy(&t));
                }
            }
            Event::End(e) => {
                depth = depth.saturating_sub(1);
                match e.name().as_ref() {
                    b"text" => in_text = false,
                    b"sentence" => {
                        if let Some(s) = current.take() {
                            out.push(s);
                        }
                    }
                    _ => {}
                }
            }
            Event::Eof => {
                if depth != 0 {
                    return Err(xml_err(reader.buffer_position(), "unexpected end of input inside an element"));
                }
                break;
            }
            _ => {}
        }
        buf.clear();
    }
    Ok(out)
}

/// Parses a Task-4 XML document. Sentences with more than `max_aspects`
/// usable aspects are dropped and listed in the report.
pub fn parse_semeval(xml: &[u8], max_aspects: usize) -> Result<(Vec<SentenceInstance>, ParseReport)> {
    let raw = read_sentences(xml)?;
    let mut report = ParseReport::default();
    let mut instances = Vec::new();
    for (n, s) in raw.into_iter().enumerate() {
        report.sentences_read += 1;
        report.aspects_read += s.aspects.len();
        let id = if s.id.is_empty() { format!("#{n}") } else { s.id };
        let tokens = tokenize(&s.text);
        let mut aspects = Vec::new();
        for a in s.aspects {
            let polarity = if a.polarity == "conflict" {
                report.conflict_dropped += 1;
                continue;
            } else {
                Polarity::parse(&a.polarity).ok_or_else(|| {
                    Error::Model(sdgcn_core::Error::Data(format!(
                        "sentence {id}: unknown polarity {:?}",
                        a.polarity
                    )))
                })?
            };
            let Some((start, end, exact)) = char_span_to_tokens(&tokens, a.from, a.to) else {
                report.unresolved_dropped += 1;
                continue;
            };
            if !exact {
                report.snapped.push(SnapWarning {
                    sentence_id: id.clone(),
                    term: a.term.clone(),
                    from: a.from,
                    to: a.to,
                    token_start: start,
                    token_end: end,
                });
            }
            let covered: Vec<&str> = tokens[start..end].iter().map(|t| t.text.as_str()).collect();
            let expected: Vec<String> = tokenize(&a.term).into_iter().map(|t| t.text).collect();
            if exact && covered != expected {
                report.surface_mismatches += 1;
            }
            aspects.push(AspectSpan {
                start,
                end,
                polarity,
                surface: a.term,
            });
        }
        if aspects.is_empty() || tokens.is_empty() {
            report.zero_aspect_dropped += 1;
            continue;
        }
        if aspects.len() > max_aspects {
            report.overflow_dropped.push(id);
            continue;
        }
        aspects.sort_by_key(|a| (a.start, a.end));
        report.sentences_kept += 1;
        report.aspects_kept += aspects.len();
        instances.push(SentenceInstance {
            id,
            tokens: tokens.into_iter().map(|t| t.text).collect(),
            aspects,
        });
    }
    Ok((instances, report))
}

pub fn parse_semeval_file(path: &Path, max_aspects: usize) -> Result<(Vec<SentenceInstance>, ParseReport)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_semeval(&bytes, max_aspects)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(body: &str) -> String {
        format!("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<sentences>{body}</sentences>")
    }

    #[test]
    fn two_aspect_sentence() {
        let xml = doc(r#"<sentence id="1"><text>The price is reasonable although the service is poor</text>
            <aspectTerms>
              <aspectTerm term="price" polarity="positive" from="4" to="9"/>
              <aspectTerm term="service" polarity="negative" from="37" to="44"/>
            </aspectTerms></sentence>"#);
        let (inst, report) = parse_semeval(xml.as_bytes(), 16).unwrap();
        assert_eq!(inst.len(), 1);
        let s = &inst[0];
        assert_eq!(s.aspects.len(), 2);
        assert_eq!((s.aspects[0].start, s.aspects[0].end), (1, 2));
        assert_eq!(s.aspects[0].polarity, Polarity::Positive);
        assert_eq!(s.tokens[s.aspects[1].start], "service");
        assert_eq!(s.aspects[1].polarity, Polarity::Negative);
        assert_eq!(report.aspects_kept, 2);
        assert!(report.snapped.is_empty());
        assert_eq!(report.surface_mismatches, 0);
    }

    #[test]
    fn conflict_only_sentence_is_dropped_and_counted() {
        let xml = doc(r#"<sentence id="9"><text>Food was ok.</text><aspectTerms>
            <aspectTerm term="Food" polarity="conflict" from="0" to="4"/></aspectTerms></sentence>
            <sentence id="10"><text>No aspects here.</text></sentence>"#);
        let (inst, report) = parse_semeval(xml.as_bytes(), 16).unwrap();
        assert!(inst.is_empty());
        assert_eq!(report.conflict_dropped, 1);
        assert_eq!(report.zero_aspect_dropped, 2);
        assert_eq!(report.sentences_read, 2);
    }

    #[test]
    fn misaligned_offsets_snap_outward() {
        // "sushi" inside "sushi-bar"
        let xml = doc(r#"<sentence id="3"><text>Great sushi-bar!</text><aspectTerms>
            <aspectTerm term="sushi" polarity="positive" from="6" to="11"/></aspectTerms></sentence>"#);
        let (inst, report) = parse_semeval(xml.as_bytes(), 16).unwrap();
        assert_eq!(inst[0].tokens, vec!["great", "sushi-bar", "!"]);
        assert_eq!((inst[0].aspects[0].start, inst[0].aspects[0].end), (1, 2));
        assert_eq!(report.snapped.len(), 1);
        assert_eq!(report.snapped[0].sentence_id, "3");
    }

    #[test]
    fn aspects_are_ordered_by_position() {
        let xml = doc(r#"<sentence id="4"><text>wine and food</text><aspectTerms>
            <aspectTerm term="food" polarity="neutral" from="9" to="13"/>
            <aspectTerm term="wine" polarity="negative" from="0" to="4"/></aspectTerms></sentence>"#);
        let (inst, _) = parse_semeval(xml.as_bytes(), 16).unwrap();
        assert_eq!(inst[0].aspects[0].surface, "wine");
        assert_eq!(inst[0].aspects[1].surface, "food");
    }

    #[test]
    fn entities_are_unescaped_before_offsets() {
        let xml = doc(r#"<sentence id="5"><text>Fish &amp; chips were great</text><aspectTerms>
            <aspectTerm term="Fish &amp; chips" polarity="positive" from="0" to="12"/></aspectTerms></sentence>"#);
        let (inst, report) = parse_semeval(xml.as_bytes(), 16).unwrap();
        assert_eq!(inst[0].aspects[0].end, 3);
        assert!(report.snapped.is_empty());
        assert_eq!(report.surface_mismatches, 0);
    }

    #[test]
    fn overflow_is_reported() {
        let mut terms = String::new();
        for i in 0..3 {
            terms.push_str(&format!(r#"<aspectTerm term="a" polarity="positive" from="{}" to="{}"/>"#, 2 * i, 2 * i + 1));
        }
        let xml = doc(&format!(r#"<sentence id="7"><text>a a a</text><aspectTerms>{terms}</aspectTerms></sentence>"#));
        let (inst, report) = parse_semeval(xml.as_bytes(), 2).unwrap();
        assert!(inst.is_empty());
        assert_eq!(report.overflow_dropped, vec!["7".to_string()]);
    }

    #[test]
    fn malformed_xml_reports_byte_offset() {
        let xml = "<sentences><sentence id=\"1\"><text>hi</txt></sentence></sentences>";
        match parse_semeval(xml.as_bytes(), 16) {
            Err(Error::Xml { offset, .. }) => assert!(offset > 0 && offset <= xml.len() as u64, "{offset}"),
            other => panic!("{other:?}"),
        }
        let truncated = "<sentences><sentence id=\"1\"><text>hi</text>";
        assert!(matches!(parse_semeval(truncated.as_bytes(), 16), Err(Error::Xml { .. })));
    }

    #[test]
    fn bad_offsets_are_errors() {
        let xml = doc(r#"<sentence id="1"><text>x</text><aspectTerms>
            <aspectTerm term="x" polarity="positive" from="zero" to="1"/></aspectTerms></sentence>"#);
        let err = parse_semeval(xml.as_bytes(), 16).unwrap_err();
        assert!(err.to_string().contains("from"), "{err}");
    }
}
