use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Written next to every command's outputs so reruns can be checked by
/// digest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub tool_version: String,
    pub outputs: Vec<String>,
    /// SHA-256 over every output file's bytes, in `outputs` order, each
    /// prefixed by its length as a little-endian u64.
    pub output_digest: String,
}

pub fn digest_outputs<'a>(outputs: impl IntoIterator<Item = &'a [u8]>) -> String {
    let mut h = Sha256::new();
    for bytes in outputs {
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    hex::encode(h.finalize())
}
