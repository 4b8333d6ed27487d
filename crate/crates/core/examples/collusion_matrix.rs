//! What each coalition of untrusted parties could compute, and whether it
//! could form in the first place.

use metakey::attacks::matrix_table;
use metakey::protocol::{run_sharing_scenario, Config};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let run = run_sharing_scenario(&Config::default(), 512)?;
    let table = matrix_table(run.deployment.network.trace(), &run.roles);
    println!(
        "{:<24} {:>7} {:>7} {:>9}  missing",
        "coalition", "S", "plain", "feasible"
    );
    for row in table.as_array().unwrap() {
        let names: Vec<&str> = row["coalition"]
            .as_array()
            .unwrap()
            .iter()
            .filter_map(|v| v.as_str())
            .collect();
        println!(
            "{:<24} {:>7} {:>7} {:>9}  {}",
            names.join("+"),
            row["s_derivable"],
            row["plain_derivable"],
            row["feasible"],
            row["missing_link"].as_str().unwrap_or("-"),
        );
    }
    Ok(())
}
