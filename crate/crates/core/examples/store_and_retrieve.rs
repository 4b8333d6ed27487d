//! Store a file on a random node; only the owner's private key can find
//! and open it again.

use metakey::ledger::RecordFilter;
use metakey::netsim::NodeId;
use metakey::protocol::{Config, Deployment};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut d = Deployment::new(&Config {
        seed: 7,
        ..Config::default()
    })?;
    let alice = d.new_agent(NodeId(0))?;
    let mallory = d.new_agent(NodeId(1))?;

    let file_id = d.store_file(&alice, b"draft contract v3")?;
    println!("file id   {file_id}");
    println!(
        "stored on node {} (known only to the owner)",
        d.locate(&alice, &file_id)?
    );

    let records = d.chain.find_records(&RecordFilter::file(file_id));
    println!("ledger records for the file: {}", records.len());

    let back = d.retrieve_file(&alice, &file_id)?;
    println!("owner reads back: {}", String::from_utf8_lossy(&back));

    match d.retrieve_file(&mallory, &file_id) {
        Ok(_) => unreachable!(),
        Err(e) => println!("another user: {e}"),
    }
    Ok(())
}
