//! Symmetric proxy re-encryption.
//!
//! A file is padded, run through the package transform, and only the
//! designated pseudoblocks are XORed with a counter-mode pad under the file
//! key. Moving the ciphertext to a new key only touches those blocks: the
//! re-encryption key carries one XOR pad per designated block that cancels
//! the old pad and applies the new one. The proxy never sees the
//! pseudomessage in the clear for designated blocks, and without them the
//! transform cannot be inverted.

use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore};

use super::aont::{aont_forward, aont_inverse, Pseudomessage};
use super::block::BlockCipher;
use super::padding::{pad_with_limit, unpad, MAX_MESSAGE_LEN};
use super::types::{xor_block, xor_in_place, Block, BlockSet, DesignationPolicy, Nonce, SymKey, BLOCK_LEN};
use super::CryptoError;

pub const BLOB_MAGIC: &[u8; 4] = b"MKC1";
pub const BLOB_VERSION: u8 = 1;

/// Fixed part of the blob header, before the designated indices.
const FIXED_HEADER_LEN: usize = 4 + 1 + 16 + 4 + 2;

/// On-node ciphertext of one file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileCiphertext {
    nonce: Nonce,
    dset: BlockSet,
    blocks: Vec<Block>,
}

impl FileCiphertext {
    pub fn new(nonce: Nonce, dset: BlockSet, blocks: Vec<Block>) -> Result<Self, CryptoError> {
        if blocks.len() < 2 {
            return Err(CryptoError::Format("ciphertext needs at least two blocks"));
        }
        let count = u32::try_from(blocks.len()).map_err(|_| CryptoError::Format("too many blocks"))?;
        if dset.max() > count {
            return Err(CryptoError::Format("designated index past the last block"));
        }
        Ok(Self { nonce, dset, blocks })
    }

    pub fn version(&self) -> u8 {
        BLOB_VERSION
    }

    pub fn nonce(&self) -> &Nonce {
        &self.nonce
    }

    pub fn dset(&self) -> &BlockSet {
        &self.dset
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block_count(&self) -> u32 {
        self.blocks.len() as u32
    }

    pub fn header_len(&self) -> usize {
        FIXED_HEADER_LEN + 4 * self.dset.len()
    }

    /// Bit-exact blob: `"MKC1" | version | nonce | block_count u32 | |D| u16 | D (u32 each) | blocks`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.header_len() + BLOCK_LEN * self.blocks.len());
        out.extend_from_slice(BLOB_MAGIC);
        out.push(BLOB_VERSION);
        out.extend_from_slice(self.nonce.as_bytes());
        out.extend_from_slice(&self.block_count().to_be_bytes());
        out.extend_from_slice(&(self.dset.len() as u16).to_be_bytes());
        for i in self.dset.iter() {
            out.extend_from_slice(&i.to_be_bytes());
        }
        for b in &self.blocks {
            out.extend_from_slice(b);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() < FIXED_HEADER_LEN {
            return Err(CryptoError::Format("blob shorter than header"));
        }
        if &bytes[..4] != BLOB_MAGIC {
            return Err(CryptoError::Format("bad magic"));
        }
        if bytes[4] != BLOB_VERSION {
            return Err(CryptoError::Format("unsupported version"));
        }
        let nonce = Nonce::from_bytes(bytes[5..21].try_into().expect("16 bytes"));
        let block_count = u32::from_be_bytes(bytes[21..25].try_into().expect("4 bytes"));
        let dcount = usize::from(u16::from_be_bytes(bytes[25..27].try_into().expect("2 bytes")));
        let header_len = FIXED_HEADER_LEN + 4 * dcount;
        let body_len = (block_count as usize)
            .checked_mul(BLOCK_LEN)
            .ok_or(CryptoError::Format("block count overflow"))?;
        if bytes.len() != header_len + body_len {
            return Err(CryptoError::Format("blob length disagrees with header"));
        }
        let indices: Vec<u32> = bytes[FIXED_HEADER_LEN..header_len]
            .chunks_exact(4)
            .map(|c| u32::from_be_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CryptoError::Format("designated indices not strictly ascending"));
        }
        let dset = BlockSet::new(indices, block_count).map_err(|_| CryptoError::Format("invalid designated set"))?;
        let blocks = bytes[header_len..]
            .chunks_exact(BLOCK_LEN)
            .map(|c| c.try_into().expect("16 bytes"))
            .collect();
        Self::new(nonce, dset, blocks)
    }

    /// Block section of the serialized blob.
    pub fn body_bytes(&self) -> Vec<u8> {
        self.blocks.iter().flatten().copied().collect()
    }
}

/// Transformation rule handed to the proxy: a fresh nonce and one XOR pad
/// per designated block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReEncryptionKey {
    new_nonce: Nonce,
    pads: BTreeMap<u32, Block>,
}

impl ReEncryptionKey {
    pub fn new_nonce(&self) -> &Nonce {
        &self.new_nonce
    }

    pub fn pads(&self) -> &BTreeMap<u32, Block> {
        &self.pads
    }

    /// `new_nonce | count u16 | (index u32 | pad)*`
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(18 + 20 * self.pads.len());
        out.extend_from_slice(self.new_nonce.as_bytes());
        out.extend_from_slice(&(self.pads.len() as u16).to_be_bytes());
        for (i, pad) in &self.pads {
            out.extend_from_slice(&i.to_be_bytes());
            out.extend_from_slice(pad);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() < 18 {
            return Err(CryptoError::Format("re-encryption key too short"));
        }
        let new_nonce = Nonce::from_bytes(bytes[..16].try_into().expect("16 bytes"));
        let count = usize::from(u16::from_be_bytes([bytes[16], bytes[17]]));
        let rest = &bytes[18..];
        if rest.len() != count * 20 {
            return Err(CryptoError::Format("re-encryption key length mismatch"));
        }
        let mut pads = BTreeMap::new();
        for chunk in rest.chunks_exact(20) {
            let i = u32::from_be_bytes(chunk[..4].try_into().expect("4 bytes"));
            if pads.insert(i, chunk[4..].try_into().expect("16 bytes")).is_some() {
                return Err(CryptoError::Format("duplicate pad index"));
            }
        }
        if pads.is_empty() {
            return Err(CryptoError::Format("re-encryption key without pads"));
        }
        Ok(Self { new_nonce, pads })
    }

    fn matches(&self, dset: &BlockSet) -> bool {
        self.pads.len() == dset.len() && dset.iter().all(|i| self.pads.contains_key(&i))
    }
}

fn apply_keystream(blocks: &mut [Block], cipher: &BlockCipher, nonce: &Nonce, dset: &BlockSet) {
    for i in dset.iter() {
        let ks = cipher.keystream(nonce, u64::from(i));
        xor_in_place(&mut blocks[i as usize - 1], &ks);
    }
}

pub fn pre_encrypt<R: RngCore + CryptoRng>(
    key: &SymKey,
    plaintext: &[u8],
    policy: DesignationPolicy,
    rng: &mut R,
) -> Result<FileCiphertext, CryptoError> {
    pre_encrypt_with_limit(key, plaintext, policy, MAX_MESSAGE_LEN, rng)
}

pub fn pre_encrypt_with_limit<R: RngCore + CryptoRng>(
    key: &SymKey,
    plaintext: &[u8],
    policy: DesignationPolicy,
    limit: usize,
    rng: &mut R,
) -> Result<FileCiphertext, CryptoError> {
    let padded = pad_with_limit(plaintext, limit.min(MAX_MESSAGE_LEN))?;
    let inner_key = SymKey::generate(rng);
    let nonce = Nonce::generate(rng);
    let pseudo = aont_forward(&padded, &inner_key)?;
    let block_count = u32::try_from(pseudo.len()).map_err(|_| CryptoError::Format("too many blocks"))?;
    let dset = policy.designate(block_count)?;
    let mut blocks = pseudo.into_blocks();
    apply_keystream(&mut blocks, &BlockCipher::new(key), &nonce, &dset);
    FileCiphertext::new(nonce, dset, blocks)
}

pub fn pre_decrypt(key: &SymKey, c: &FileCiphertext) -> Result<Vec<u8>, CryptoError> {
    let mut blocks = c.blocks.clone();
    apply_keystream(&mut blocks, &BlockCipher::new(key), &c.nonce, &c.dset);
    let pseudo = Pseudomessage::from_blocks(blocks)?;
    unpad(&aont_inverse(&pseudo))
}

/// Builds the rule that moves a ciphertext from `old_key` to `new_key`.
pub fn rekey<R: RngCore + CryptoRng>(
    old_key: &SymKey,
    old_nonce: &Nonce,
    new_key: &SymKey,
    dset: &BlockSet,
    rng: &mut R,
) -> Result<ReEncryptionKey, CryptoError> {
    rekey_with_nonce(old_key, old_nonce, new_key, Nonce::generate(rng), dset)
}

/// [`rekey`] with the new nonce supplied by the caller.
pub fn rekey_with_nonce(
    old_key: &SymKey,
    old_nonce: &Nonce,
    new_key: &SymKey,
    new_nonce: Nonce,
    dset: &BlockSet,
) -> Result<ReEncryptionKey, CryptoError> {
    if dset.is_empty() {
        return Err(CryptoError::InvalidArgument("designated block set is empty".into()));
    }
    let old = BlockCipher::new(old_key);
    let new = BlockCipher::new(new_key);
    let pads = dset
        .iter()
        .map(|i| {
            let i64 = u64::from(i);
            (
                i,
                xor_block(&old.keystream(old_nonce, i64), &new.keystream(&new_nonce, i64)),
            )
        })
        .collect();
    Ok(ReEncryptionKey { new_nonce, pads })
}

pub fn reencrypt(rk: &ReEncryptionKey, c: &FileCiphertext) -> Result<FileCiphertext, CryptoError> {
    if !rk.matches(&c.dset) {
        return Err(CryptoError::InvalidArgument(
            "re-encryption key does not cover exactly the designated blocks".into(),
        ));
    }
    let mut blocks = c.blocks.clone();
    for (&i, pad) in &rk.pads {
        xor_in_place(&mut blocks[i as usize - 1], pad);
    }
    Ok(FileCiphertext {
        nonce: rk.new_nonce,
        dset: c.dset.clone(),
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::padding::unpad;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    const POLICIES: [DesignationPolicy; 3] = [
        DesignationPolicy::Last,
        DesignationPolicy::FirstLast,
        DesignationPolicy::All,
    ];

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn twenty_byte_layout() {
        let mut r = rng(1);
        let c = pre_encrypt(&SymKey::generate(&mut r), &[0u8; 20], DesignationPolicy::Last, &mut r).unwrap();
        assert_eq!(c.block_count(), 3);
        assert_eq!(c.dset().iter().collect::<Vec<_>>(), vec![3]);
        assert_eq!(c.header_len(), 31);
        assert_eq!(c.to_bytes().len(), 79);
        assert_eq!(&c.to_bytes()[..5], b"MKC1\x01");
    }

    #[test]
    fn round_trip_under_each_policy() {
        let mut r = rng(2);
        for policy in POLICIES {
            for _ in 0..333 {
                let k = SymKey::generate(&mut r);
                let len = r.gen_range(0..300);
                let m: Vec<u8> = (0..len).map(|_| r.gen()).collect();
                let c = pre_encrypt(&k, &m, policy, &mut r).unwrap();
                assert_eq!(pre_decrypt(&k, &c).unwrap(), m);
            }
        }
    }

    #[test]
    fn encryption_is_randomized() {
        let mut r = rng(3);
        let k = SymKey::generate(&mut r);
        let a = pre_encrypt(&k, b"same", DesignationPolicy::Last, &mut r).unwrap();
        let b = pre_encrypt(&k, b"same", DesignationPolicy::Last, &mut r).unwrap();
        assert_ne!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn wrong_key_mostly_padding_error() {
        let mut r = rng(4);
        let trials = 20_000;
        let mut padding_errors = 0;
        for _ in 0..trials {
            let c = pre_encrypt(&SymKey::generate(&mut r), b"payload", DesignationPolicy::Last, &mut r).unwrap();
            match pre_decrypt(&SymKey::generate(&mut r), &c) {
                Err(CryptoError::Padding) => padding_errors += 1,
                Ok(m) => assert_ne!(m, b"payload"),
                Err(e) => panic!("unexpected {e}"),
            }
        }
        let expected = 1.0 - (1..=16).map(|p| 256f64.powi(-p)).sum::<f64>();
        let rate = padding_errors as f64 / trials as f64;
        // sd ~ 4.4e-4
        assert!((rate - expected).abs() < 2.5e-3, "rate {rate}");
    }

    #[test]
    fn identity_rekey_has_zero_pads() {
        let mut r = rng(5);
        let k = SymKey::generate(&mut r);
        let n = Nonce::generate(&mut r);
        let dset = BlockSet::new([1, 4], 4).unwrap();
        let rk = rekey_with_nonce(&k, &n, &k, n, &dset).unwrap();
        assert!(rk.pads().values().all(|p| *p == [0; 16]));
    }

    #[test]
    fn rekey_size_is_constant() {
        let mut r = rng(6);
        let k = SymKey::generate(&mut r);
        for len in [0usize, 100, 10_000] {
            let c = pre_encrypt(&k, &vec![1u8; len], DesignationPolicy::Last, &mut r).unwrap();
            let rk = rekey(&k, c.nonce(), &SymKey::generate(&mut r), c.dset(), &mut r).unwrap();
            assert_eq!(rk.pads().len(), 1);
            assert_eq!(rk.to_bytes().len(), 38);
        }
    }

    // Oracle: decrypt both sides directly and compare plaintexts.
    #[test]
    fn reencrypt_round_trip() {
        let mut r = rng(7);
        for policy in POLICIES {
            for _ in 0..333 {
                let s = SymKey::generate(&mut r);
                let s2 = SymKey::generate(&mut r);
                let m: Vec<u8> = (0..r.gen_range(0..200)).map(|_| r.gen()).collect();
                let c = pre_encrypt(&s, &m, policy, &mut r).unwrap();
                let rk = rekey(&s, c.nonce(), &s2, c.dset(), &mut r).unwrap();
                let c2 = reencrypt(&rk, &c).unwrap();
                assert_eq!(pre_decrypt(&s2, &c2).unwrap(), m);
                for (idx, (a, b)) in c.blocks().iter().zip(c2.blocks()).enumerate() {
                    let i = idx as u32 + 1;
                    if c.dset().contains(i) {
                        assert_eq!(xor_block(a, b), rk.pads()[&i]);
                    } else {
                        assert_eq!(a, b);
                    }
                }
            }
        }
    }

    #[test]
    fn reencrypt_rejects_mismatched_key() {
        let mut r = rng(8);
        let s = SymKey::generate(&mut r);
        let c = pre_encrypt(&s, &[0u8; 40], DesignationPolicy::Last, &mut r).unwrap();
        let other = BlockSet::new([1], c.block_count()).unwrap();
        let rk = rekey(&s, c.nonce(), &s, &other, &mut r).unwrap();
        assert!(matches!(reencrypt(&rk, &c), Err(CryptoError::InvalidArgument(_))));
    }

    #[test]
    fn blob_parse_rejects_malformed() {
        let mut r = rng(9);
        let c = pre_encrypt(&SymKey::generate(&mut r), b"x", DesignationPolicy::FirstLast, &mut r).unwrap();
        let good = c.to_bytes();
        assert_eq!(FileCiphertext::from_bytes(&good).unwrap(), c);

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(FileCiphertext::from_bytes(&bad).is_err());
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(FileCiphertext::from_bytes(&bad).is_err());
        assert!(FileCiphertext::from_bytes(&good[..good.len() - 1]).is_err());
        // descending indices
        let mut bad = good.clone();
        bad[27..31].copy_from_slice(&2u32.to_be_bytes());
        bad[31..35].copy_from_slice(&1u32.to_be_bytes());
        assert!(FileCiphertext::from_bytes(&bad).is_err());
        // index past block_count
        let mut bad = good;
        bad[31..35].copy_from_slice(&9u32.to_be_bytes());
        assert!(FileCiphertext::from_bytes(&bad).is_err());
    }

    #[test]
    fn rekey_bytes_round_trip() {
        let mut r = rng(10);
        let k = SymKey::generate(&mut r);
        let dset = BlockSet::new([1, 2, 7], 7).unwrap();
        let rk = rekey(&k, &Nonce::generate(&mut r), &k, &dset, &mut r).unwrap();
        assert_eq!(ReEncryptionKey::from_bytes(&rk.to_bytes()).unwrap(), rk);
        assert!(ReEncryptionKey::from_bytes(&rk.to_bytes()[..20]).is_err());
    }

    #[test]
    fn stripping_keystream_recovers_pseudomessage() {
        let mut r = rng(11);
        let k = SymKey::generate(&mut r);
        let c = pre_encrypt(&k, b"abc", DesignationPolicy::Last, &mut r).unwrap();
        let mut blocks = c.blocks().to_vec();
        let i = c.block_count();
        xor_in_place(
            &mut blocks[i as usize - 1],
            &crate::crypto::keystream(&k, c.nonce(), i).unwrap(),
        );
        let inv = aont_inverse(&Pseudomessage::from_blocks(blocks).unwrap());
        assert_eq!(unpad(&inv).unwrap(), b"abc");
    }
}
