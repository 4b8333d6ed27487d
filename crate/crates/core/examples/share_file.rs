//! Full sharing flow: the storage node re-encrypts its copy and relays it
//! anonymously to a fresh node; the receiver gets the new key and location
//! in a sealed grant.

use metakey::protocol::{run_sharing_scenario, Config};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let run = run_sharing_scenario(
        &Config {
            seed: 42,
            ..Config::default()
        },
        2048,
    )?;
    let r = &run.roles;
    println!(
        "owner {}  receiver {}  storage {}  sharing {}",
        r.owner, r.receiver, r.n1, r.n2
    );

    let trace = run.deployment.network.trace();
    for d in trace.deliveries() {
        let from = d
            .message
            .from_visible
            .map_or("anonymous".to_string(), |n| n.to_string());
        println!("#{:<2} {:<22} {:>9} -> {}", d.seq, d.kind().as_str(), from, d.to());
    }
    assert_eq!(run.recovered, run.plaintext);
    println!("receiver recovered {} bytes", run.recovered.len());
    Ok(())
}
