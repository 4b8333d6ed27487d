//! Encrypt under one key, move the ciphertext to another key without
//! decrypting it, then open it with the new key.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use metakey::crypto::{pre_decrypt, pre_encrypt, reencrypt, rekey, DesignationPolicy, SymKey};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let message = b"meet at the usual place, bring the ledger";

    let s = SymKey::generate(&mut rng);
    let s_new = SymKey::generate(&mut rng);
    let c = pre_encrypt(&s, message, DesignationPolicy::Last, &mut rng)?;
    println!(
        "ciphertext: {} blocks, {} bytes serialized",
        c.block_count(),
        c.to_bytes().len()
    );

    let rk = rekey(&s, c.nonce(), &s_new, c.dset(), &mut rng)?;
    println!(
        "re-encryption key: {} pad(s), {} bytes",
        rk.pads().len(),
        rk.to_bytes().len()
    );

    let moved = reencrypt(&rk, &c)?;
    let changed = c.blocks().iter().zip(moved.blocks()).filter(|(a, b)| a != b).count();
    println!("blocks changed by re-encryption: {changed}");

    let opened = pre_decrypt(&s_new, &moved)?;
    assert_eq!(opened, message);
    println!("new key opens it: {}", String::from_utf8_lossy(&opened));

    match pre_decrypt(&s, &moved) {
        Ok(_) => println!("old key happened to unpad (rare)"),
        Err(e) => println!("old key on moved copy: {e}"),
    }
    Ok(())
}
