#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use sdgcn_core::SentenceInstance;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders instances as Task-4 XML with tokens joined by single spaces.
pub fn to_semeval_xml(instances: &[SentenceInstance]) -> String {
    let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<sentences>\n");
    for inst in instances {
        let mut offsets = Vec::new();
        let mut pos = 0;
        for t in &inst.tokens {
            offsets.push(pos);
            pos += t.chars().count() + 1;
        }
        let text = inst.tokens.join(" ");
        let _ = writeln!(s, "  <sentence id=\"{}\">\n    <text>{}</text>\n    <aspectTerms>", esc(&inst.id), esc(&text));
        for a in &inst.aspects {
            let from = offsets[a.start];
            let to = offsets[a.end - 1] + inst.tokens[a.end - 1].chars().count();
            let term = inst.tokens[a.start..a.end].join(" ");
            let _ = writeln!(
                s,
                "      <aspectTerm term=\"{}\" polarity=\"{}\" from=\"{from}\" to=\"{to}\"/>",
                esc(&term),
                a.polarity.as_str()
            );
        }
        s.push_str("    </aspectTerms>\n  </sentence>\n");
    }
    s.push_str("</sentences>\n");
    s
}

/// Writes a train/test pair in `dir` under the standard Restaurant names.
pub fn write_restaurant_pair(dir: &Path, train: &[SentenceInstance], test: &[SentenceInstance]) {
    std::fs::write(dir.join("Restaurants_Train_v2.xml"), to_semeval_xml(train)).unwrap();
    std::fs::write(dir.join("Restaurants_Test_Gold.xml"), to_semeval_xml(test)).unwrap();
}
