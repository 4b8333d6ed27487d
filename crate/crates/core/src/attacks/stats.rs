use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::AttackError;
use crate::crypto::FileCiphertext;

pub const MIN_UNIFORMITY_LEN: usize = 64 * 1024;

/// Upper-tail p-value of Pearson's chi-square statistic for the byte
/// histogram of `bytes` against the uniform distribution (255 d.o.f.).
pub fn ciphertext_uniformity(bytes: &[u8]) -> Result<f64, AttackError> {
    if bytes.len() < MIN_UNIFORMITY_LEN {
        return Err(AttackError::Size {
            min: MIN_UNIFORMITY_LEN,
            actual: bytes.len(),
        });
    }
    let mut counts = [0u64; 256];
    for &b in bytes {
        counts[b as usize] += 1;
    }
    let expected = bytes.len() as f64 / 256.0;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new(255.0).expect("positive degrees of freedom");
    Ok(dist.sf(stat))
}

/// Uniformity of the block section of a ciphertext, header excluded.
pub fn blob_uniformity(c: &FileCiphertext) -> Result<f64, AttackError> {
    ciphertext_uniformity(&c.body_bytes())
}
