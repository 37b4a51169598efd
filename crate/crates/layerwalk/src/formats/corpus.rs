//! Walk corpora: header JSON, then `u32` length-prefixed token sequences.

use std::path::Path;

use layerwalk_core::walker::{WalkConfig, WalkCorpus};
use serde::{Deserialize, Serialize};

use super::{encode, Magic, Reader};
use crate::error::Result;
use crate::io::{atomic_write, read_bytes};

pub const MAGIC: Magic = *b"LWCORP01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusHeader {
    pub num_nodes: u32,
    pub num_layers: u16,
    /// Person tokens are `[0, num_nodes)`, hub tokens follow in layer order.
    pub vocab_size: usize,
    pub year: i32,
    pub config: WalkConfig,
    pub num_walks: usize,
    pub num_tokens: usize,
    pub fingerprint: String,
}

pub fn to_bytes(corpus: &WalkCorpus) -> Vec<u8> {
    let header = CorpusHeader {
        num_nodes: corpus.num_nodes(),
        num_layers: corpus.num_layers(),
        vocab_size: corpus.vocab_size(),
        year: corpus.year(),
        config: corpus.config().clone(),
        num_walks: corpus.num_walks(),
        num_tokens: corpus.num_tokens(),
        fingerprint: crate::io::hex(corpus.fingerprint()),
    };
    let mut payload = Vec::with_capacity(4 * (corpus.num_tokens() + corpus.num_walks()));
    for w in corpus.walks() {
        payload.extend_from_slice(&(w.len() as u32).to_le_bytes());
        payload.extend(w.iter().flat_map(|t| t.to_le_bytes()));
    }
    encode(&MAGIC, &header, &payload)
}

pub fn write(path: &Path, corpus: &WalkCorpus) -> Result<()> {
    atomic_write(path, &to_bytes(corpus))
}

pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<WalkCorpus> {
    let mut r = Reader::new(path, bytes, &MAGIC)?;
    let header: CorpusHeader = r.json()?;
    let mut walks = Vec::with_capacity(header.num_walks.min(bytes.len() / 4));
    for _ in 0..header.num_walks {
        let len = r.u32()? as usize;
        walks.push(r.u32s(len)?);
    }
    r.finish()?;
    let corpus = WalkCorpus::from_parts(header.num_nodes, header.num_layers, header.config, header.year, walks)
        .map_err(|e| r.error(e.to_string()))?;
    if corpus.num_tokens() != header.num_tokens || crate::io::hex(corpus.fingerprint()) != header.fingerprint {
        return Err(r.error("content does not match the header fingerprint"));
    }
    Ok(corpus)
}

pub fn read(path: &Path) -> Result<WalkCorpus> {
    from_bytes(path, &read_bytes(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use layerwalk_core::synth::{generate_synthetic, SyntheticPopulationConfig};
    use layerwalk_core::walker::generate_walks;

    #[test]
    fn round_trip_and_corruption() {
        let cfg = SyntheticPopulationConfig { num_nodes: 200, num_years: 1, ..Default::default() };
        let (graphs, _) = generate_synthetic(&cfg, 1).unwrap();
        let corpus = generate_walks(&graphs[0], &WalkConfig { walk_length: 6, walks_per_node: 2, ..Default::default() }).unwrap();
        let bytes = to_bytes(&corpus);
        let p = Path::new("c.bin");
        assert_eq!(from_bytes(p, &bytes).unwrap(), corpus);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(from_bytes(p, &bad), Err(Error::Format { .. })));
        let mut flipped = bytes.clone();
        let last = flipped.len() - 1;
        flipped[last] ^= 1;
        assert!(from_bytes(p, &flipped).is_err());
        assert!(from_bytes(p, &bytes[..bytes.len() - 2]).is_err());
    }
}
