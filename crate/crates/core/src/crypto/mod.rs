//! Cryptographic layer: AES-128 and SHA-256 primitives, the package
//! transform, symmetric proxy re-encryption, and the public-key envelope
//! that wraps meta-keys.

mod aont;
mod block;
mod envelope;
mod hash;
mod padding;
mod pre;
mod types;

use thiserror::Error;

pub use aont::{aont_forward, aont_inverse, recover_inner_key, Pseudomessage, AONT_PUBLIC_KEY};
pub use block::{block_decrypt, block_encrypt, keystream, BlockCipher};
pub use envelope::{
    envelope_unwrap, envelope_wrap, KeyPair, PrivateKey, PublicKey, ENVELOPE_OVERHEAD, MAX_ENVELOPE_PAYLOAD,
};
pub use hash::{hash, hash_parts};
pub use padding::{pad, pad_with_limit, unpad, MAX_MESSAGE_LEN};
pub use pre::{
    pre_decrypt, pre_encrypt, pre_encrypt_with_limit, reencrypt, rekey, rekey_with_nonce, FileCiphertext,
    ReEncryptionKey, BLOB_MAGIC, BLOB_VERSION,
};
pub use types::{Block, BlockSet, DesignationPolicy, Digest, Nonce, SymKey, BLOCK_LEN};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("{what}: expected {expected} bytes, got {actual}")]
    Size {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("input of {len} bytes exceeds limit of {limit}")]
    Oversize { len: usize, limit: usize },
    #[error("invalid padding (wrong key or corrupted ciphertext)")]
    Padding,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed encoding: {0}")]
    Format(&'static str),
    #[error("envelope integrity check failed")]
    Envelope,
}
