//! Inspect what each party actually observed during a share.

use metakey::attacks::{initial_facts, Role};
use metakey::protocol::{run_sharing_scenario, Config};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let run = run_sharing_scenario(
        &Config {
            seed: 3,
            ..Config::default()
        },
        100,
    )?;
    let trace = run.deployment.network.trace();
    for role in [Role::N1, Role::N2, Role::Receiver, Role::Owner] {
        let node = role.node(&run.roles);
        let k = trace.knowledge_of(node);
        let facts: Vec<_> = initial_facts(trace, &run.roles, role)
            .into_iter()
            .map(|f| f.atom)
            .collect();
        println!("{role:<8} node {node}: knows nodes {:?}", k.nodes);
        println!("         facts {facts:?}");
    }
    println!("{}", trace.to_jsonl());
    Ok(())
}
