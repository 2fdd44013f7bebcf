//! Binary cache of parsed instances, so the XML only needs to be read once.
//!
//! Layout: `magic "SDGCNINS"`, `u32 version`, `u64 instance count`, the
//! source fingerprint as a length-prefixed string, then per instance: id,
//! `u64` token count and the tokens, `u64` aspect count and per aspect
//! `u64 start`, `u64 end`, `u8` polarity index and the surface string.
//! Strings are `u32` length + UTF-8; integers little-endian.

use std::path::Path;

use sdgcn_core::{AspectSpan, Polarity, SentenceInstance};
use sha2::{Digest, Sha256};

use crate::container::{Reader, Writer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SDGCNINS";
pub const CACHE_VERSION: u32 = 1;

/// Hex SHA-256 of the source bytes.
pub fn fingerprint(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode(fingerprint: &str, instances: &[SentenceInstance]) -> Vec<u8> {
    let mut w = Writer::with_header(MAGIC, CACHE_VERSION, instances.len());
    w.str(fingerprint);
    for inst in instances {
        w.str(&inst.id);
        w.u64(inst.tokens.len() as u64);
        for t in &inst.tokens {
            w.str(t);
        }
        w.u64(inst.aspects.len() as u64);
        for a in &inst.aspects {
            w.u64(a.start as u64);
            w.u64(a.end as u64);
            w.u8(a.polarity.index() as u8);
            w.str(&a.surface);
        }
    }
    w.buf
}

/// Returns the stored fingerprint and the instances.
pub fn decode(bytes: &[u8]) -> Result<(String, Vec<SentenceInstance>)> {
    let err = Error::Cache;
    let mut r = Reader::new(bytes);
    let (version, count) = r.header(MAGIC).map_err(err)?;
    if version != CACHE_VERSION {
        return Err(Error::Cache(format!("unsupported version {version} (expected {CACHE_VERSION})")));
    }
    let fp = r.str().map_err(err)?;
    let mut out = Vec::new();
    for _ in 0..count {
        let id = r.str().map_err(err)?;
        let n = r.usize().map_err(err)?;
        let mut tokens = Vec::new();
        for _ in 0..n {
            tokens.push(r.str().map_err(err)?);
        }
        let k = r.usize().map_err(err)?;
        let mut aspects = Vec::new();
        for _ in 0..k {
            let start = r.usize().map_err(err)?;
            let end = r.usize().map_err(err)?;
            let p = r.u8().map_err(err)?;
            let polarity = Polarity::from_index(p as usize)
                .ok_or_else(|| Error::Cache(format!("instance {id}: bad polarity index {p}")))?;
            aspects.push(AspectSpan {
                start,
                end,
                polarity,
                surface: r.str().map_err(err)?,
            });
        }
        out.push(SentenceInstance { id, tokens, aspects });
    }
    if !r.at_end() {
        return Err(Error::Cache(format!("trailing bytes after offset {}", r.offset())));
    }
    Ok((fp, out))
}

pub fn save(path: &Path, fingerprint: &str, instances: &[SentenceInstance]) -> Result<()> {
    std::fs::write(path, encode(fingerprint, instances)).map_err(|e| Error::io(path, e))
}

/// Loads the cache at `path` if it exists and was built from a source with
/// the given fingerprint.
pub fn load_if_fresh(path: &Path, fingerprint: &str) -> Result<Option<Vec<SentenceInstance>>> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(path, e)),
    };
    let (fp, instances) = decode(&bytes)?;
    Ok((fp == fingerprint).then_some(instances))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<SentenceInstance> {
        vec![SentenceInstance {
            id: "s1".into(),
            tokens: ["the", "crème", "brûlée", "was", "good"].iter().map(|s| s.to_string()).collect(),
            aspects: vec![AspectSpan {
                start: 1,
                end: 3,
                polarity: Polarity::Neutral,
                surface: "Crème brûlée".into(),
            }],
        }]
    }

    #[test]
    fn round_trip() {
        let bytes = encode("abc", &sample());
        let (fp, back) = decode(&bytes).unwrap();
        assert_eq!(fp, "abc");
        assert_eq!(back, sample());
    }

    #[test]
    fn stale_cache_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        assert_eq!(load_if_fresh(&path, "x").unwrap(), None);
        save(&path, &fingerprint(b"v1"), &sample()).unwrap();
        assert_eq!(load_if_fresh(&path, &fingerprint(b"v1")).unwrap(), Some(sample()));
        assert_eq!(load_if_fresh(&path, &fingerprint(b"v2")).unwrap(), None);
    }

    #[test]
    fn fingerprint_is_sha256() {
        assert_eq!(
            fingerprint(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn corrupt_cache_is_an_error() {
        let bytes = encode("f", &sample());
        assert!(matches!(decode(&bytes[..bytes.len() - 2]), Err(Error::Cache(_))));
    }
}
