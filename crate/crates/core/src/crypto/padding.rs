//! Mandatory fill-byte padding to whole 16-byte blocks.

use super::types::{Block, BLOCK_LEN};
use super::CryptoError;

/// Largest plaintext accepted by [`pad`].
pub const MAX_MESSAGE_LEN: usize = 16 * 1024 * 1024;

pub fn pad(message: &[u8]) -> Result<Vec<Block>, CryptoError> {
    pad_with_limit(message, MAX_MESSAGE_LEN)
}

pub fn pad_with_limit(message: &[u8], limit: usize) -> Result<Vec<Block>, CryptoError> {
    if message.len() > limit {
        return Err(CryptoError::Oversize {
            len: message.len(),
            limit,
        });
    }
    let fill = BLOCK_LEN - message.len() % BLOCK_LEN;
    let mut blocks = Vec::with_capacity(message.len() / BLOCK_LEN + 1);
    let mut chunks = message.chunks_exact(BLOCK_LEN);
    for chunk in &mut chunks {
        blocks.push(chunk.try_into().expect("exact chunk"));
    }
    let mut last = [fill as u8; BLOCK_LEN];
    let rest = chunks.remainder();
    last[..rest.len()].copy_from_slice(rest);
    blocks.push(last);
    Ok(blocks)
}

pub fn unpad(blocks: &[Block]) -> Result<Vec<u8>, CryptoError> {
    let last = blocks.last().ok_or(CryptoError::Padding)?;
    let fill = last[BLOCK_LEN - 1];
    if fill == 0 || usize::from(fill) > BLOCK_LEN {
        return Err(CryptoError::Padding);
    }
    if last[BLOCK_LEN - usize::from(fill)..].iter().any(|&b| b != fill) {
        return Err(CryptoError::Padding);
    }
    let total = blocks.len() * BLOCK_LEN - usize::from(fill);
    let mut out: Vec<u8> = blocks.iter().flatten().copied().collect();
    out.truncate(total);
    Ok(out)
}
