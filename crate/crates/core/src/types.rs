//! Addresses, transaction hashes, and canonical encoding helpers shared by
//! the ledger, VM and MPC engine.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Account address. The simulator derives contract addresses from
/// `hash(creator ‖ nonce)` and assigns EOA addresses at genesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Address(pub u64);

impl Address {
    /// Reserved address of the built-in MPC transaction manager.
    pub const MPC_TX_MGR: Address = Address(0x0888_0000_0000_0008);

    pub fn fresh(creator: Address, nonce: u64) -> Address {
        let mut h = Sha256::new();
        h.update(b"contract-address");
        h.update(creator.0.to_le_bytes());
        h.update(nonce.to_le_bytes());
        let d = h.finalize();
        Address(u64::from_le_bytes(d[..8].try_into().unwrap()))
    }
}

impl std::fmt::Display for Address {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "0x{:016x}", self.0)
    }
}

/// Transaction hash: digest of the canonical transaction encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TxHash(pub [u8; 32]);

impl TxHash {
    pub fn short(&self) -> String {
        self.0[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl std::fmt::Display for TxHash {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Incremental writer for the length-prefixed binary encoding used for
/// transaction and state hashing.
#[derive(Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Encoder {
        Encoder::default()
    }

    pub fn tag(&mut self, t: u8) -> &mut Self {
        self.buf.push(t);
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.u64(b.len() as u64);
        self.buf.extend_from_slice(b);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    pub fn u64_slice(&mut self, vs: &[u64]) -> &mut Self {
        self.u64(vs.len() as u64);
        for v in vs {
            self.u64(*v);
        }
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    pub fn digest(self) -> [u8; 32] {
        Sha256::digest(&self.buf).into()
    }
}

pub fn sha256(data: &[u8]) -> [u8; 32] {
    Sha256::digest(data).into()
}
