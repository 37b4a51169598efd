//! Embedding matrices: magic, `u64` vocabulary size, `u64` dimension,
//! `u64` metadata length, metadata JSON, then row-major `f32` rows.

use std::fmt::Write as _;
use std::path::Path;

use layerwalk_core::sgns::{EmbeddingMatrix, EmbeddingMeta};

use super::{f32_bytes, Magic, Reader};
use crate::error::Result;
use crate::io::{atomic_write, read_bytes};

pub const MAGIC: Magic = *b"LWEMB001";

pub fn to_bytes(emb: &EmbeddingMatrix) -> Vec<u8> {
    let meta = serde_json::to_vec(&emb.meta).expect("in-memory JSON serialization");
    let mut out = Vec::with_capacity(32 + meta.len() + 4 * emb.vectors().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(emb.vocab_size() as u64).to_le_bytes());
    out.extend_from_slice(&(emb.dim() as u64).to_le_bytes());
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    out.extend_from_slice(&f32_bytes(emb.vectors()));
    out
}

pub fn write(path: &Path, emb: &EmbeddingMatrix) -> Result<()> {
    atomic_write(path, &to_bytes(emb))
}

pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<EmbeddingMatrix> {
    let mut r = Reader::new(path, bytes, &MAGIC)?;
    let vocab = r.len("vocabulary")?;
    let dim = r.len("dimension")?;
    let meta: EmbeddingMeta = r.json()?;
    let count = vocab.checked_mul(dim).ok_or_else(|| r.error("shape overflow"))?;
    let vectors = r.f32s(count)?;
    r.finish()?;
    EmbeddingMatrix::from_vectors(vocab, dim, vectors, meta).map_err(|e| r.error(e.to_string()))
}

pub fn read(path: &Path) -> Result<EmbeddingMatrix> {
    from_bytes(path, &read_bytes(path)?)
}

/// `token_id v1 ... vd` per line, preceded by a `vocab dim` line.
pub fn to_text(emb: &EmbeddingMatrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", emb.vocab_size(), emb.dim());
    for t in 0..emb.vocab_size() {
        let _ = write!(out, "{t}");
        for v in emb.row(t) {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, emb: &EmbeddingMatrix) -> Result<()> {
    atomic_write(path, to_text(emb).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn round_trip_and_bad_magic() {
        let meta = EmbeddingMeta { year: 2010, num_nodes: 2, num_layers: 1, absent: vec![1], ..Default::default() };
        let emb = EmbeddingMatrix::from_vectors(3, 2, vec![0.5, -1.0, 2.0, 0.0, 1e-7, 3.25], meta).unwrap();
        let bytes = to_bytes(&emb);
        let p = Path::new("e.emb");
        assert_eq!(from_bytes(p, &bytes).unwrap(), emb);
        let err = from_bytes(Path::new("broken.emb"), b"NOTANEMBxxxxxxxxxxxxxxxx").unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        assert!(err.to_string().contains("broken.emb"));
        assert!(from_bytes(p, &bytes[..bytes.len() - 1]).is_err());
        let text = to_text(&emb);
        assert_eq!(text.lines().next(), Some("3 2"));
        assert_eq!(text.lines().nth(3), Some("2 0.0000001 3.25"));
    }
}
