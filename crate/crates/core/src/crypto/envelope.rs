//! Hybrid public-key envelope used for meta-keys and share grants.
//!
//! X25519 ephemeral agreement, SHA-256 key derivation, AES-128 counter mode
//! and an HMAC-SHA256 tag over the ephemeral key and ciphertext.
//!
//! Blob layout: `ephemeral_public (32) | ciphertext | tag (32)`.

use std::fmt;

use hmac::{Hmac, Mac};
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::Sha256;
use x25519_dalek::{PublicKey as XPublic, StaticSecret};

use super::block::BlockCipher;
use super::hash::hash_parts;
use super::types::{Nonce, SymKey};
use super::CryptoError;

pub const MAX_ENVELOPE_PAYLOAD: usize = 4096;
const TAG_LEN: usize = 32;
const EPHEMERAL_LEN: usize = 32;
pub const ENVELOPE_OVERHEAD: usize = EPHEMERAL_LEN + TAG_LEN;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PublicKey([u8; 32]);

impl PublicKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", hex::encode(self.0))
    }
}

#[derive(Clone)]
pub struct PrivateKey(StaticSecret);

impl PrivateKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(StaticSecret::from(bytes))
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(XPublic::from(&self.0).to_bytes())
    }
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PrivateKey(<redacted>)")
    }
}

#[derive(Debug, Clone)]
pub struct KeyPair {
    pub public: PublicKey,
    pub private: PrivateKey,
}

impl KeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        Self::from_private(PrivateKey::from_bytes(bytes))
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::generate(&mut ChaCha20Rng::seed_from_u64(seed))
    }

    pub fn from_private(private: PrivateKey) -> Self {
        Self {
            public: private.public_key(),
            private,
        }
    }
}

struct Keys {
    enc: SymKey,
    mac: [u8; 32],
}

fn derive(shared: &[u8; 32], ephemeral: &[u8; 32], recipient: &[u8; 32]) -> Keys {
    let enc = hash_parts(&[b"metakey-envelope-enc", shared, ephemeral, recipient]);
    let mac = hash_parts(&[b"metakey-envelope-mac", shared, ephemeral, recipient]);
    Keys {
        enc: SymKey::from_slice(&enc.as_bytes()[..16]).expect("16 bytes"),
        mac: mac.0,
    }
}

fn ctr_xor(key: &SymKey, data: &mut [u8]) {
    let cipher = BlockCipher::new(key);
    let base = Nonce::from_bytes([0u8; 16]);
    for (i, chunk) in data.chunks_mut(16).enumerate() {
        let ks = cipher.keystream(&base, i as u64 + 1);
        for (d, k) in chunk.iter_mut().zip(ks) {
            *d ^= k;
        }
    }
}

fn tag(mac_key: &[u8; 32], ephemeral: &[u8], ciphertext: &[u8]) -> Hmac<Sha256> {
    let mut mac = Hmac::<Sha256>::new_from_slice(mac_key).expect("hmac takes any key length");
    mac.update(ephemeral);
    mac.update(ciphertext);
    mac
}

pub fn envelope_wrap<R: RngCore + CryptoRng>(
    recipient: &PublicKey,
    payload: &[u8],
    rng: &mut R,
) -> Result<Vec<u8>, CryptoError> {
    if payload.len() > MAX_ENVELOPE_PAYLOAD {
        return Err(CryptoError::Oversize {
            len: payload.len(),
            limit: MAX_ENVELOPE_PAYLOAD,
        });
    }
    let ephemeral = KeyPair::generate(rng);
    let shared = ephemeral.private.0.diffie_hellman(&XPublic::from(recipient.0));
    let keys = derive(shared.as_bytes(), &ephemeral.public.0, &recipient.0);

    let mut out = Vec::with_capacity(payload.len() + ENVELOPE_OVERHEAD);
    out.extend_from_slice(&ephemeral.public.0);
    out.extend_from_slice(payload);
    ctr_xor(&keys.enc, &mut out[EPHEMERAL_LEN..]);
    let t = tag(&keys.mac, &out[..EPHEMERAL_LEN], &out[EPHEMERAL_LEN..])
        .finalize()
        .into_bytes();
    out.extend_from_slice(&t);
    Ok(out)
}

pub fn envelope_unwrap(private: &PrivateKey, blob: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if blob.len() < ENVELOPE_OVERHEAD {
        return Err(CryptoError::Envelope);
    }
    let (ephemeral, rest) = blob.split_at(EPHEMERAL_LEN);
    let (ciphertext, received_tag) = rest.split_at(rest.len() - TAG_LEN);
    let ephemeral: [u8; 32] = ephemeral.try_into().expect("32 bytes");
    let shared = private.0.diffie_hellman(&XPublic::from(ephemeral));
    let keys = derive(shared.as_bytes(), &ephemeral, &private.public_key().0);
    tag(&keys.mac, &ephemeral, ciphertext)
        .verify_slice(received_tag)
        .map_err(|_| CryptoError::Envelope)?;
    let mut payload = ciphertext.to_vec();
    ctr_xor(&keys.enc, &mut payload);
    Ok(payload)
}
