//! With a 16-bit toy cipher the whole key space can be searched. The
//! re-encryption key fixes far fewer bits than the key has, so many
//! candidate keys remain.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use metakey::attacks::{toy_key_search, CipherConfig, ToyInstance};
use metakey::crypto::DesignationPolicy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for policy in [DesignationPolicy::Last, DesignationPolicy::All] {
        let inst = ToyInstance::random(&mut rng, 4, policy)?;
        let found = inst.search()?;
        println!(
            "{:<5} {} pad(s): {} consistent keys, true key among them: {}",
            policy.name(),
            inst.rk.pads.len(),
            found.len(),
            found.contains(&inst.s)
        );
    }
    let inst = ToyInstance::random(&mut rng, 4, DesignationPolicy::Last)?;
    let err = toy_key_search(&CipherConfig::Aes128, &inst.c, &inst.c_shared, &inst.rk, inst.s_prime).unwrap_err();
    println!("AES-128: {err}");
    Ok(())
}
