//! AES-128 block primitive and the counter-mode pad used on designated blocks.

use aes::cipher::{BlockDecrypt, BlockEncrypt, KeyInit};
use aes::Aes128;

use super::types::{Block, Nonce, SymKey, BLOCK_LEN};
use super::CryptoError;

/// Keyed AES-128 instance. Reuse it when encrypting many blocks under one key.
#[derive(Clone)]
pub struct BlockCipher(Aes128);

impl BlockCipher {
    pub fn new(key: &SymKey) -> Self {
        Self(Aes128::new(key.as_bytes().into()))
    }

    pub fn encrypt(&self, block: &Block) -> Block {
        let mut b = (*block).into();
        self.0.encrypt_block(&mut b);
        b.into()
    }

    pub fn decrypt(&self, block: &Block) -> Block {
        let mut b = (*block).into();
        self.0.decrypt_block(&mut b);
        b.into()
    }

    /// `E_key(nonce + i)`.
    pub fn keystream(&self, nonce: &Nonce, i: u64) -> Block {
        self.encrypt(&nonce.offset(i))
    }
}

fn as_block(bytes: &[u8]) -> Result<Block, CryptoError> {
    bytes.try_into().map_err(|_| CryptoError::Size {
        what: "block",
        expected: BLOCK_LEN,
        actual: bytes.len(),
    })
}

pub fn block_encrypt(key: &SymKey, block: &[u8]) -> Result<Block, CryptoError> {
    Ok(BlockCipher::new(key).encrypt(&as_block(block)?))
}

pub fn block_decrypt(key: &SymKey, block: &[u8]) -> Result<Block, CryptoError> {
    Ok(BlockCipher::new(key).decrypt(&as_block(block)?))
}

/// Counter-mode pad for pseudoblock `i` (1-based).
pub fn keystream(key: &SymKey, nonce: &Nonce, i: u32) -> Result<Block, CryptoError> {
    if i == 0 {
        return Err(CryptoError::InvalidArgument("keystream index is 1-based".into()));
    }
    Ok(BlockCipher::new(key).keystream(nonce, u64::from(i)))
}
