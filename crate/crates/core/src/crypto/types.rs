use std::collections::BTreeSet;
use std::fmt;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::CryptoError;

/// Width of every block handled by the scheme.
pub const BLOCK_LEN: usize = 16;

pub type Block = [u8; BLOCK_LEN];

pub(crate) fn xor_block(a: &Block, b: &Block) -> Block {
    let mut out = [0u8; BLOCK_LEN];
    for (o, (x, y)) in out.iter_mut().zip(a.iter().zip(b)) {
        *o = x ^ y;
    }
    out
}

pub(crate) fn xor_in_place(dst: &mut Block, src: &Block) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

/// 128-bit symmetric file key.
///
/// `Debug` is redacted so keys do not leak through logs or panics.
#[derive(Clone, PartialEq, Eq)]
pub struct SymKey([u8; BLOCK_LEN]);

impl SymKey {
    pub const fn from_bytes(bytes: [u8; BLOCK_LEN]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; BLOCK_LEN] = bytes.try_into().map_err(|_| CryptoError::Size {
            what: "symmetric key",
            expected: BLOCK_LEN,
            actual: bytes.len(),
        })?;
        Ok(Self(arr))
    }

    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; BLOCK_LEN];
        rng.fill_bytes(&mut bytes);
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; BLOCK_LEN] {
        &self.0
    }
}

impl fmt::Debug for SymKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SymKey(<redacted>)")
    }
}

/// Per-ciphertext counter base for the designated-block keystream.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Nonce([u8; BLOCK_LEN]);

impl Nonce {
    pub const fn from_bytes(bytes: [u8; BLOCK_LEN]) -> Self {
        Self(bytes)
    }

    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; BLOCK_LEN];
        rng.fill_bytes(&mut bytes);
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; BLOCK_LEN] {
        &self.0
    }

    /// `nonce + i mod 2^128`, big-endian.
    pub fn offset(&self, i: u64) -> Block {
        u128::from_be_bytes(self.0).wrapping_add(u128::from(i)).to_be_bytes()
    }
}

impl fmt::Debug for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonce({})", hex::encode(self.0))
    }
}

/// SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).map_err(|_| CryptoError::Format("digest is not 64 hex characters"))?;
        Ok(Digest(out))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Sorted, duplicate-free set of 1-based pseudoblock indices that carry
/// the file-key keystream.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockSet(BTreeSet<u32>);

impl BlockSet {
    /// Builds a set valid for a pseudomessage of `block_count` blocks.
    pub fn new<I: IntoIterator<Item = u32>>(indices: I, block_count: u32) -> Result<Self, CryptoError> {
        let set: BTreeSet<u32> = indices.into_iter().collect();
        if set.is_empty() {
            return Err(CryptoError::InvalidArgument("designated block set is empty".into()));
        }
        if let Some(&bad) = set.iter().find(|&&i| i == 0 || i > block_count) {
            return Err(CryptoError::InvalidArgument(format!(
                "designated index {bad} outside [1, {block_count}]"
            )));
        }
        Ok(Self(set))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: u32) -> bool {
        self.0.contains(&i)
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }

    pub fn max(&self) -> u32 {
        *self.0.iter().next_back().expect("block set is never empty")
    }
}

/// Which pseudoblocks are keystream-encrypted under the file key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignationPolicy {
    /// Only the masked-key block `s+1`.
    #[default]
    Last,
    /// Blocks `1` and `s+1`.
    FirstLast,
    /// Every pseudoblock.
    All,
}

impl DesignationPolicy {
    pub fn designate(self, block_count: u32) -> Result<BlockSet, CryptoError> {
        match self {
            DesignationPolicy::Last => BlockSet::new([block_count], block_count),
            DesignationPolicy::FirstLast => BlockSet::new([1, block_count], block_count),
            DesignationPolicy::All => BlockSet::new(1..=block_count, block_count),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            DesignationPolicy::Last => 0,
            DesignationPolicy::FirstLast => 1,
            DesignationPolicy::All => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, CryptoError> {
        match code {
            0 => Ok(DesignationPolicy::Last),
            1 => Ok(DesignationPolicy::FirstLast),
            2 => Ok(DesignationPolicy::All),
            _ => Err(CryptoError::Format("unknown designation policy code")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DesignationPolicy::Last => "last",
            DesignationPolicy::FirstLast => "first-last",
            DesignationPolicy::All => "all",
        }
    }
}

impl std::str::FromStr for DesignationPolicy {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last" => Ok(DesignationPolicy::Last),
            "first-last" => Ok(DesignationPolicy::FirstLast),
            "all" => Ok(DesignationPolicy::All),
            other => Err(CryptoError::InvalidArgument(format!(
                "unknown designation policy {other:?}"
            ))),
        }
    }
}
