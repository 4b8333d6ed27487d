//! Package transform (all-or-nothing transform) over 16-byte blocks.
//!
//! For message blocks `m_1..m_s` and a random inner key `k_r`:
//!
//! ```text
//! m'_i     = m_i ^ E(k_r, i)                 i = 1..s
//! h_i      = E(K_0, m'_i ^ i)
//! m'_{s+1} = k_r ^ h_1 ^ ... ^ h_s
//! ```
//!
//! `K_0` is the all-zero public key and counters are 1-based big-endian.
//! Without every pseudoblock the inner key, and therefore any message
//! block, cannot be recovered.

use super::block::BlockCipher;
use super::types::{xor_block, xor_in_place, Block, SymKey};
use super::CryptoError;

/// Public key of the hashing step.
pub const AONT_PUBLIC_KEY: SymKey = SymKey::from_bytes([0u8; 16]);

fn counter(i: usize) -> Block {
    (i as u128).to_be_bytes()
}

/// Output of the forward transform: `s` masked blocks plus the key block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pseudomessage(Vec<Block>);

impl Pseudomessage {
    pub fn from_blocks(blocks: Vec<Block>) -> Result<Self, CryptoError> {
        if blocks.len() < 2 {
            return Err(CryptoError::Size {
                what: "pseudomessage blocks",
                expected: 2,
                actual: blocks.len(),
            });
        }
        Ok(Self(blocks))
    }

    pub fn blocks(&self) -> &[Block] {
        &self.0
    }

    pub fn blocks_mut(&mut self) -> &mut [Block] {
        &mut self.0
    }

    pub fn into_blocks(self) -> Vec<Block> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn masked_sum(public: &BlockCipher, masked: &[Block]) -> Block {
    masked.iter().enumerate().fold([0u8; 16], |mut acc, (idx, m)| {
        let h = public.encrypt(&xor_block(m, &counter(idx + 1)));
        xor_in_place(&mut acc, &h);
        acc
    })
}

pub fn aont_forward(blocks: &[Block], inner_key: &SymKey) -> Result<Pseudomessage, CryptoError> {
    if blocks.is_empty() {
        return Err(CryptoError::Size {
            what: "message blocks",
            expected: 1,
            actual: 0,
        });
    }
    let inner = BlockCipher::new(inner_key);
    let public = BlockCipher::new(&AONT_PUBLIC_KEY);

    let mut out: Vec<Block> = Vec::with_capacity(blocks.len() + 1);
    out.extend(
        blocks
            .iter()
            .enumerate()
            .map(|(idx, m)| xor_block(m, &inner.encrypt(&counter(idx + 1)))),
    );
    let key_block = xor_block(inner_key.as_bytes(), &masked_sum(&public, &out));
    out.push(key_block);
    Ok(Pseudomessage(out))
}

/// Recovers the inner key from a complete pseudomessage.
pub fn recover_inner_key(p: &Pseudomessage) -> SymKey {
    let public = BlockCipher::new(&AONT_PUBLIC_KEY);
    let (key_block, masked) = p.0.split_last().expect("pseudomessage has >= 2 blocks");
    SymKey::from_bytes(xor_block(key_block, &masked_sum(&public, masked)))
}

pub fn aont_inverse(p: &Pseudomessage) -> Vec<Block> {
    let inner = BlockCipher::new(&recover_inner_key(p));
    let masked = &p.0[..p.0.len() - 1];
    masked
        .iter()
        .enumerate()
        .map(|(idx, m)| xor_block(m, &inner.encrypt(&counter(idx + 1))))
        .collect()
}
