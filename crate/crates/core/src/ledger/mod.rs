//! Append-only hash-chained metadata ledger.
//!
//! Only metadata goes on chain: the meta-key record for each stored file and
//! a hash-only record for each share. Blocks are hashed over a canonical
//! binary encoding (big-endian fixed-width integers, raw byte fields,
//! length-prefixed lists and variable byte strings); the JSON export is a
//! view and is never hashed.

mod codec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{hash, Digest};
use crate::netsim::NodeId;

pub use codec::DecodeError;

/// On-chain meta-key record for one stored file.
///
/// The storage location is not stored in the clear: it travels inside
/// `wrapped_key` together with the file key, so only the owner learns it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub file_id: Digest,
    pub owner_id: NodeId,
    pub content_hash: Digest,
    #[serde(with = "hex_bytes")]
    pub wrapped_key: Vec<u8>,
    pub created_at: u64,
}

/// Log entry for a share. Holds a hash of the grant, never the grant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareRecord {
    pub file_id: Digest,
    pub owner_id: NodeId,
    pub grant_hash: Digest,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Metadata(MetadataRecord),
    Share(ShareRecord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Metadata,
    Share,
}

impl Record {
    pub fn kind(&self) -> RecordKind {
        match self {
            Record::Metadata(_) => RecordKind::Metadata,
            Record::Share(_) => RecordKind::Share,
        }
    }

    pub fn file_id(&self) -> &Digest {
        match self {
            Record::Metadata(r) => &r.file_id,
            Record::Share(r) => &r.file_id,
        }
    }

    pub fn owner_id(&self) -> NodeId {
        match self {
            Record::Metadata(r) => r.owner_id,
            Record::Share(r) => r.owner_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerBlock {
    pub height: u64,
    pub prev_hash: Digest,
    pub timestamp: u64,
    pub records: Vec<Record>,
    pub block_hash: Digest,
}

impl LedgerBlock {
    fn seal(height: u64, prev_hash: Digest, timestamp: u64, records: Vec<Record>) -> Self {
        let mut block = LedgerBlock {
            height,
            prev_hash,
            timestamp,
            records,
            block_hash: Digest::ZERO,
        };
        block.block_hash = block.compute_hash();
        block
    }

    /// Canonical encoding of `(height, prev_hash, timestamp, records)`.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        codec::encode_body(self, &mut out);
        out
    }

    pub fn compute_hash(&self) -> Digest {
        hash(&self.canonical_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailureReason {
    Empty,
    HeightMismatch { expected: u64, found: u64 },
    GenesisNotEmpty,
    PrevHashMismatch,
    BlockHashMismatch,
    Decode(String),
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FailureReason::Empty => f.write_str("chain has no blocks"),
            FailureReason::HeightMismatch { expected, found } => {
                write!(f, "height {found} where {expected} was expected")
            }
            FailureReason::GenesisNotEmpty => f.write_str("genesis block is not canonical"),
            FailureReason::PrevHashMismatch => f.write_str("prev_hash does not match predecessor"),
            FailureReason::BlockHashMismatch => f.write_str("block_hash does not match contents"),
            FailureReason::Decode(msg) => write!(f, "undecodable block: {msg}"),
        }
    }
}

/// First failing block found by [`Chain::verify`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("chain verification failed at height {height}: {reason}")]
pub struct VerifyError {
    pub height: u64,
    pub reason: FailureReason,
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Verification(#[from] VerifyError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("chain JSON line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Which records [`Chain::find_records`] returns. Unset fields match anything.
#[derive(Debug, Clone, Default)]
pub struct RecordFilter {
    pub owner_id: Option<NodeId>,
    pub file_id: Option<Digest>,
    pub kind: Option<RecordKind>,
}

impl RecordFilter {
    pub fn file(file_id: Digest) -> Self {
        Self {
            file_id: Some(file_id),
            ..Self::default()
        }
    }

    pub fn owner(owner_id: NodeId) -> Self {
        Self {
            owner_id: Some(owner_id),
            ..Self::default()
        }
    }

    pub fn kind(mut self, kind: RecordKind) -> Self {
        self.kind = Some(kind);
        self
    }

    fn matches(&self, r: &Record) -> bool {
        self.owner_id.is_none_or(|o| r.owner_id() == o)
            && self.file_id.as_ref().is_none_or(|f| r.file_id() == f)
            && self.kind.is_none_or(|k| r.kind() == k)
    }
}

/// The ledger. Chains built through [`Chain::genesis`] and [`Chain::append`]
/// are valid by construction; decoded chains are verified before the next
/// append.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    blocks: Vec<LedgerBlock>,
    verified: bool,
}

impl Default for Chain {
    fn default() -> Self {
        Self::genesis()
    }
}

impl Chain {
    pub fn genesis() -> Self {
        Self {
            blocks: vec![LedgerBlock::seal(0, Digest::ZERO, 0, Vec::new())],
            verified: true,
        }
    }

    pub fn blocks(&self) -> &[LedgerBlock] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip(&self) -> &LedgerBlock {
        self.blocks.last().expect("chain always has genesis")
    }

    /// Seals `records` into a new tip block.
    pub fn append(&mut self, records: Vec<Record>, timestamp: u64) -> Result<&LedgerBlock, LedgerError> {
        if records.is_empty() {
            return Err(LedgerError::InvalidArgument("a block needs at least one record".into()));
        }
        if !self.verified {
            self.verify()?;
            self.verified = true;
        }
        let tip = self.tip();
        if timestamp < tip.timestamp {
            return Err(LedgerError::InvalidArgument(format!(
                "timestamp {timestamp} precedes tip timestamp {}",
                tip.timestamp
            )));
        }
        let block = LedgerBlock::seal(tip.height + 1, tip.block_hash, timestamp, records);
        self.blocks.push(block);
        Ok(self.tip())
    }

    /// Checks heights, links and every block hash; reports the first failure.
    pub fn verify(&self) -> Result<(), VerifyError> {
        verify_blocks(&self.blocks)
    }

    pub fn find_records(&self, filter: &RecordFilter) -> Vec<&Record> {
        self.blocks
            .iter()
            .flat_map(|b| b.records.iter())
            .filter(|r| filter.matches(r))
            .collect()
    }

    pub fn metadata_for(&self, file_id: &Digest) -> Option<&MetadataRecord> {
        self.blocks.iter().flat_map(|b| b.records.iter()).find_map(|r| match r {
            Record::Metadata(m) if &m.file_id == file_id => Some(m),
            _ => None,
        })
    }

    /// Concatenated `canonical block bytes | block_hash` for every block.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for b in &self.blocks {
            codec::encode_body(b, &mut out);
            out.extend_from_slice(b.block_hash.as_bytes());
        }
        out
    }

    /// Decodes without verifying; call [`Chain::verify`] before trusting it.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        Ok(Self {
            blocks: codec::decode_chain(bytes)?,
            verified: false,
        })
    }

    /// Decode and verify in one step, mapping decode failures onto the
    /// height at which decoding stopped.
    pub fn verify_bytes(bytes: &[u8]) -> Result<Self, VerifyError> {
        let chain = Self::from_bytes(bytes).map_err(|e| VerifyError {
            height: e.height,
            reason: FailureReason::Decode(e.reason.to_string()),
        })?;
        chain.verify()?;
        Ok(Self {
            verified: true,
            ..chain
        })
    }

    /// One JSON object per block, one block per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            out.push_str(&serde_json::to_string(b).expect("ledger blocks always serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, LedgerError> {
        let blocks = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| serde_json::from_str(l).map_err(|source| LedgerError::Json { line: n + 1, source }))
            .collect::<Result<Vec<LedgerBlock>, _>>()?;
        Ok(Self {
            blocks,
            verified: false,
        })
    }
}

fn verify_blocks(blocks: &[LedgerBlock]) -> Result<(), VerifyError> {
    let Some(genesis) = blocks.first() else {
        return Err(VerifyError {
            height: 0,
            reason: FailureReason::Empty,
        });
    };
    for (idx, block) in blocks.iter().enumerate() {
        let expected = idx as u64;
        let fail = |reason| VerifyError {
            height: expected,
            reason,
        };
        if block.height != expected {
            return Err(fail(FailureReason::HeightMismatch {
                expected,
                found: block.height,
            }));
        }
        if block.compute_hash() != block.block_hash {
            return Err(fail(FailureReason::BlockHashMismatch));
        }
        if idx == 0 {
            if genesis.prev_hash != Digest::ZERO || !genesis.records.is_empty() {
                return Err(fail(FailureReason::GenesisNotEmpty));
            }
        } else if block.prev_hash != blocks[idx - 1].block_hash {
            return Err(fail(FailureReason::PrevHashMismatch));
        }
    }
    Ok(())
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}
