//! A deliberately weak cipher small enough to search exhaustively: 16-bit
//! keys, 8-bit blocks, three rounds of a seeded S-box. Test use only.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::AttackError;
use crate::crypto::{BlockSet, DesignationPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ToyKey(pub u16);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyCipher {
    sbox: [u8; 256],
}

impl ToyCipher {
    pub fn from_seed(seed: u64) -> Self {
        let mut sbox = [0u8; 256];
        for (i, b) in sbox.iter_mut().enumerate() {
            *b = i as u8;
        }
        sbox.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
        Self { sbox }
    }

    pub fn encrypt(&self, key: ToyKey, x: u8) -> u8 {
        let [lo, hi] = key.0.to_le_bytes();
        let mut x = x;
        for rk in [lo, hi, lo ^ hi.rotate_left(3)] {
            x = self.sbox[(x ^ rk) as usize];
        }
        x
    }

    /// Counter-mode keystream byte for 1-based index `i`.
    pub fn keystream(&self, key: ToyKey, nonce: u8, i: u32) -> u8 {
        self.encrypt(key, nonce.wrapping_add(i as u8))
    }
}

/// Which cipher an analysis runs against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CipherConfig {
    Toy(Box<ToyCipher>),
    Aes128,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyCiphertext {
    pub nonce: u8,
    pub dset: BlockSet,
    pub blocks: Vec<u8>,
}

impl ToyCiphertext {
    /// XORs the designated blocks with the keystream; its own inverse.
    pub fn seal(cipher: &ToyCipher, key: ToyKey, nonce: u8, dset: BlockSet, mut blocks: Vec<u8>) -> Self {
        for i in dset.iter() {
            blocks[i as usize - 1] ^= cipher.keystream(key, nonce, i);
        }
        Self { nonce, dset, blocks }
    }

    pub fn open(&self, cipher: &ToyCipher, key: ToyKey) -> Vec<u8> {
        Self::seal(cipher, key, self.nonce, self.dset.clone(), self.blocks.clone()).blocks
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyReKey {
    pub new_nonce: u8,
    pub pads: BTreeMap<u32, u8>,
}

pub fn toy_rekey(
    cipher: &ToyCipher,
    old: ToyKey,
    old_nonce: u8,
    new: ToyKey,
    new_nonce: u8,
    dset: &BlockSet,
) -> ToyReKey {
    let pads = dset
        .iter()
        .map(|i| {
            (
                i,
                cipher.keystream(old, old_nonce, i) ^ cipher.keystream(new, new_nonce, i),
            )
        })
        .collect();
    ToyReKey { new_nonce, pads }
}

pub fn toy_reencrypt(rk: &ToyReKey, c: &ToyCiphertext) -> Result<ToyCiphertext, AttackError> {
    if !rk.pads.keys().copied().eq(c.dset.iter()) {
        return Err(AttackError::InvalidArgument(
            "pads do not match designated blocks".into(),
        ));
    }
    let mut blocks = c.blocks.clone();
    for (&i, &pad) in &rk.pads {
        blocks[i as usize - 1] ^= pad;
    }
    Ok(ToyCiphertext {
        nonce: rk.new_nonce,
        dset: c.dset.clone(),
        blocks,
    })
}

/// Every key `k` whose keystream under the original nonce equals
/// `pad ^ keystream(S', new_nonce)` on all designated blocks.
pub fn toy_key_search(
    config: &CipherConfig,
    c: &ToyCiphertext,
    c_shared: &ToyCiphertext,
    rk: &ToyReKey,
    s_prime: ToyKey,
) -> Result<Vec<ToyKey>, AttackError> {
    let cipher = match config {
        CipherConfig::Toy(t) => t,
        CipherConfig::Aes128 => return Err(AttackError::NonToyCipher),
    };
    if c_shared.nonce != rk.new_nonce || c.blocks.len() != c_shared.blocks.len() {
        return Err(AttackError::InvalidArgument(
            "shared ciphertext does not match the rekey".into(),
        ));
    }
    let mut targets = Vec::with_capacity(rk.pads.len());
    for (&i, &pad) in &rk.pads {
        let idx = i as usize - 1;
        if idx >= c.blocks.len() || c.blocks[idx] ^ c_shared.blocks[idx] != pad {
            return Err(AttackError::InvalidArgument(format!(
                "pad {i} inconsistent with ciphertexts"
            )));
        }
        targets.push((i, pad ^ cipher.keystream(s_prime, c_shared.nonce, i)));
    }
    Ok((0..=u16::MAX)
        .map(ToyKey)
        .filter(|&k| targets.iter().all(|&(i, t)| cipher.keystream(k, c.nonce, i) == t))
        .collect())
}

/// A complete random sharing instance under the toy cipher.
#[derive(Debug, Clone)]
pub struct ToyInstance {
    pub cipher: ToyCipher,
    pub s: ToyKey,
    pub s_prime: ToyKey,
    pub plaintext: Vec<u8>,
    pub c: ToyCiphertext,
    pub c_shared: ToyCiphertext,
    pub rk: ToyReKey,
}

impl ToyInstance {
    pub fn random<R: Rng>(rng: &mut R, block_count: u32, policy: DesignationPolicy) -> Result<Self, AttackError> {
        let dset = policy
            .designate(block_count)
            .map_err(|e| AttackError::InvalidArgument(e.to_string()))?;
        let cipher = ToyCipher::from_seed(rng.gen());
        let s = ToyKey(rng.gen());
        let s_prime = ToyKey(rng.gen());
        let (n, n_prime) = (rng.gen(), rng.gen());
        let plaintext: Vec<u8> = (0..block_count).map(|_| rng.gen()).collect();
        let c = ToyCiphertext::seal(&cipher, s, n, dset.clone(), plaintext.clone());
        let rk = toy_rekey(&cipher, s, n, s_prime, n_prime, &dset);
        let c_shared = toy_reencrypt(&rk, &c)?;
        Ok(Self {
            cipher,
            s,
            s_prime,
            plaintext,
            c,
            c_shared,
            rk,
        })
    }

    pub fn search(&self) -> Result<Vec<ToyKey>, AttackError> {
        toy_key_search(
            &CipherConfig::Toy(Box::new(self.cipher.clone())),
            &self.c,
            &self.c_shared,
            &self.rk,
            self.s_prime,
        )
    }
}
