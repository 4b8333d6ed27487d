//! Chi-square test of ciphertext byte frequencies, with a constant-byte
//! control.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use metakey::attacks::{blob_uniformity, ciphertext_uniformity};
use metakey::crypto::{pre_encrypt, reencrypt, rekey, DesignationPolicy, SymKey};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let zeros = vec![0u8; 1 << 20];
    let s = SymKey::generate(&mut rng);
    let c = pre_encrypt(&s, &zeros, DesignationPolicy::Last, &mut rng)?;
    let rk = rekey(&s, c.nonce(), &SymKey::generate(&mut rng), c.dset(), &mut rng)?;
    let moved = reencrypt(&rk, &c)?;

    println!("original ciphertext    p = {:.4}", blob_uniformity(&c)?);
    println!("re-encrypted copy      p = {:.4}", blob_uniformity(&moved)?);
    println!(
        "plaintext 'A' * 1 MiB  p = {:.3e}",
        ciphertext_uniformity(&vec![b'A'; 1 << 20])?
    );
    Ok(())
}
