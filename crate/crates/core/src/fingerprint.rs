//! SHA-256 fingerprints over length-prefixed fields.

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Default)]
pub struct Fingerprinter {
    hasher: Sha256,
}

impl Fingerprinter {
    pub fn new(domain: &str) -> Self {
        let mut fp = Fingerprinter::default();
        fp.field(domain.as_bytes());
        fp
    }

    /// Length-prefixed so that field boundaries cannot be forged by concatenation.
    pub fn field(&mut self, bytes: &[u8]) -> &mut Self {
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(bytes);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.field(s.as_bytes())
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.field(&v.to_le_bytes())
    }

    pub fn json<T: Serialize>(&mut self, value: &T) -> &mut Self {
        let bytes = serde_json::to_vec(value).expect("fingerprinted values serialize");
        self.field(&bytes)
    }

    pub fn hex(self) -> String {
        hex::encode(self.hasher.finalize())
    }

    /// First eight digest bytes as a little-endian integer.
    pub fn seed(self) -> u64 {
        let digest = self.hasher.finalize();
        let mut buf = [0u8; 8];
        buf.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(buf)
    }
}
