//! Build a small ledger, serialize it, flip one bit and watch verification
//! point at the damaged block.

use metakey::crypto::hash;
use metakey::ledger::{Chain, MetadataRecord, Record};
use metakey::netsim::NodeId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut chain = Chain::genesis();
    for h in 1..=5u64 {
        let id = hash(&h.to_be_bytes());
        chain.append(
            vec![Record::Metadata(MetadataRecord {
                file_id: id,
                owner_id: NodeId(0),
                content_hash: id,
                wrapped_key: vec![0xab; 100],
                created_at: h,
            })],
            h,
        )?;
    }
    chain.verify()?;
    println!("{} blocks, tip {}", chain.len(), chain.tip().block_hash);

    let mut bytes = chain.to_bytes();
    let offset: usize = chain.blocks()[..3].iter().map(|b| b.canonical_bytes().len() + 32).sum();
    bytes[offset + 60] ^= 0x01;
    match Chain::verify_bytes(&bytes) {
        Ok(_) => println!("tampering went unnoticed"),
        Err(e) => println!("{e}"),
    }
    Ok(())
}
