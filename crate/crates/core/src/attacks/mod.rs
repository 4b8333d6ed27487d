//! Collusion analysis over protocol traces, plus statistical sanity checks.
//!
//! Two separate questions are answered here: what a coalition could
//! compute if it pooled its knowledge ([`collusion_matrix`]), and whether
//! its members could find each other at all ([`coalition_feasibility`]).

mod closure;
mod stats;
mod toy;

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub use closure::{closure, standard_rules, Atom, Fact, Rule};
pub use stats::{blob_uniformity, ciphertext_uniformity, MIN_UNIFORMITY_LEN};
pub use toy::{
    toy_key_search, toy_reencrypt, toy_rekey, CipherConfig, ToyCipher, ToyCiphertext, ToyInstance, ToyKey, ToyReKey,
};

use crate::netsim::{NodeId, Trace};
use crate::protocol::Roles;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("input too small: need at least {min} bytes, got {actual}")]
    Size { min: usize, actual: usize },
    #[error("key search needs the toy cipher")]
    NonToyCipher,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Role {
    N1,
    N2,
    Receiver,
    Owner,
}

impl Role {
    pub fn node(self, roles: &Roles) -> NodeId {
        match self {
            Role::N1 => roles.n1,
            Role::N2 => roles.n2,
            Role::Receiver => roles.receiver,
            Role::Owner => roles.owner,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::N1 => "N1",
            Role::N2 => "N2",
            Role::Receiver => "Receiver",
            Role::Owner => "Owner",
        };
        f.write_str(s)
    }
}

/// The seven non-empty coalitions over the untrusted roles, in report order.
pub fn coalitions() -> Vec<BTreeSet<Role>> {
    use Role::*;
    [
        &[N1][..],
        &[N2],
        &[Receiver],
        &[N1, N2],
        &[N1, Receiver],
        &[N2, Receiver],
        &[N1, N2, Receiver],
    ]
    .iter()
    .map(|c| c.iter().copied().collect())
    .collect()
}

/// Facts `role` holds about the shared file, read off the trace.
pub fn initial_facts(trace: &Trace, roles: &Roles, role: Role) -> BTreeSet<Fact> {
    let node = role.node(roles);
    let k = trace.knowledge_of(node);
    let file = roles.file_id;
    let knows = |n: NodeId| n == node || k.nodes.contains(&n);

    let mut atoms = Vec::new();
    if k.blobs.contains(&file) {
        atoms.push(Atom::HasBlobOrig);
    }
    if k.blobs.contains(&roles.shared_blob_id) {
        atoms.push(Atom::HasBlobShared);
    }
    if k.rekeys_for.contains(&file) {
        atoms.push(Atom::HasRK);
    }
    if knows(roles.n1) {
        atoms.push(Atom::HasLocN1);
    }
    if knows(roles.n2) {
        atoms.push(Atom::HasLocN2);
    }
    if k.original_keys.contains(&file) {
        atoms.push(Atom::HasKeyS);
    }
    if k.shared_keys.contains(&file) {
        atoms.push(Atom::HasKeySPrime);
    }
    atoms.into_iter().map(|a| Fact::new(a, file)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CollusionReport {
    pub coalition: BTreeSet<Role>,
    pub closure: BTreeSet<Atom>,
    pub s_derivable: bool,
    pub plain_derivable: bool,
}

impl CollusionReport {
    pub fn analyse(trace: &Trace, roles: &Roles, coalition: &BTreeSet<Role>) -> Self {
        let pooled: BTreeSet<Fact> = coalition.iter().flat_map(|&r| initial_facts(trace, roles, r)).collect();
        let closed = closure(&pooled, &standard_rules());
        let atoms: BTreeSet<Atom> = closed
            .iter()
            .filter(|f| f.file_id == roles.file_id)
            .map(|f| f.atom)
            .collect();
        Self {
            coalition: coalition.clone(),
            s_derivable: atoms.contains(&Atom::HasKeyS),
            plain_derivable: atoms.contains(&Atom::KnowsPlain),
            closure: atoms,
        }
    }
}

pub fn collusion_matrix(trace: &Trace, roles: &Roles) -> Vec<CollusionReport> {
    coalitions()
        .iter()
        .map(|c| CollusionReport::analyse(trace, roles, c))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    Blocked { missing_link: String },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }

    pub fn missing_link(&self) -> Option<&str> {
        match self {
            Feasibility::Feasible => None,
            Feasibility::Blocked { missing_link } => Some(missing_link),
        }
    }
}

/// A coalition can form only if each member can name every other member
/// from its own deliveries and annotations.
pub fn coalition_feasibility(trace: &Trace, roles: &Roles, coalition: &BTreeSet<Role>) -> Feasibility {
    for &target in coalition {
        let target_node = target.node(roles);
        for &member in coalition.iter().filter(|&&m| m != target) {
            let node = member.node(roles);
            if node != target_node && !trace.knowledge_of(node).nodes.contains(&target_node) {
                return Feasibility::Blocked {
                    missing_link: format!("{target} location"),
                };
            }
        }
    }
    Feasibility::Feasible
}

fn coalition_label(c: &BTreeSet<Role>) -> Vec<String> {
    c.iter().map(|r| r.to_string()).collect()
}

/// One row per coalition: closure verdicts joined with feasibility.
pub fn matrix_table(trace: &Trace, roles: &Roles) -> Value {
    let rows: Vec<Value> = collusion_matrix(trace, roles)
        .into_iter()
        .map(|r| {
            let f = coalition_feasibility(trace, roles, &r.coalition);
            json!({
                "coalition": coalition_label(&r.coalition),
                "s_derivable": r.s_derivable,
                "plain_derivable": r.plain_derivable,
                "feasible": f.is_feasible(),
                "missing_link": f.missing_link(),
            })
        })
        .collect();
    Value::Array(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{run_sharing_scenario, Config};
    use Atom::*;

    fn atoms(list: &[Atom]) -> BTreeSet<Atom> {
        list.iter().copied().collect()
    }

    #[test]
    fn facts_come_from_trace() {
        let run = run_sharing_scenario(&Config::default(), 100).unwrap();
        let t = run.deployment.network.trace();
        let fact_atoms = |r| -> BTreeSet<Atom> { initial_facts(t, &run.roles, r).iter().map(|f| f.atom).collect() };
        assert_eq!(fact_atoms(Role::N1), atoms(&[HasBlobOrig, HasRK, HasLocN1, HasLocN2]));
        assert_eq!(fact_atoms(Role::N2), atoms(&[HasBlobShared, HasLocN2]));
        assert_eq!(
            fact_atoms(Role::Receiver),
            atoms(&[HasKeySPrime, HasLocN2, HasBlobShared])
        );
        assert!(fact_atoms(Role::Owner).is_superset(&atoms(&[HasKeyS, HasKeySPrime, HasLocN1, HasLocN2])));
    }

    #[test]
    fn matrix_and_feasibility() {
        let run = run_sharing_scenario(
            &Config {
                seed: 3,
                ..Config::default()
            },
            64,
        )
        .unwrap();
        let t = run.deployment.network.trace();
        let m = collusion_matrix(t, &run.roles);
        let plain: Vec<bool> = m.iter().map(|r| r.plain_derivable).collect();
        assert_eq!(plain, [false, false, true, false, true, true, true]);
        assert!(m.iter().all(|r| !r.s_derivable));

        let feas: Vec<Option<String>> = coalitions()
            .iter()
            .map(|c| coalition_feasibility(t, &run.roles, c).missing_link().map(String::from))
            .collect();
        assert_eq!(feas[4].as_deref(), Some("N1 location"));
        assert_eq!(feas[5], None);
        assert_eq!(feas[6].as_deref(), Some("N1 location"));

        let table = matrix_table(t, &run.roles);
        assert_eq!(table.as_array().unwrap().len(), 7);
        assert_eq!(table[4]["coalition"], json!(["N1", "Receiver"]));
    }
}
