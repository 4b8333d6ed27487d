use std::collections::BTreeSet;

use serde::Serialize;

use crate::crypto::Digest;

/// Knowledge atoms about one file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Atom {
    HasBlobOrig,
    HasBlobShared,
    HasKeyS,
    HasKeySPrime,
    HasRK,
    HasLocN1,
    HasLocN2,
    HasPadsOverD,
    KnowsPlain,
}

impl Atom {
    pub const ALL: [Atom; 9] = [
        Atom::HasBlobOrig,
        Atom::HasBlobShared,
        Atom::HasKeyS,
        Atom::HasKeySPrime,
        Atom::HasRK,
        Atom::HasLocN1,
        Atom::HasLocN2,
        Atom::HasPadsOverD,
        Atom::KnowsPlain,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub atom: Atom,
    pub file_id: Digest,
}

impl Fact {
    pub fn new(atom: Atom, file_id: Digest) -> Self {
        Self { atom, file_id }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: &'static str,
    pub premises: Vec<Atom>,
    pub conclusion: Atom,
}

impl Rule {
    fn new(name: &'static str, premises: &[Atom], conclusion: Atom) -> Self {
        Self {
            name,
            premises: premises.to_vec(),
            conclusion,
        }
    }
}

/// Derivation rules for the open-fetch storage model. No rule concludes
/// [`Atom::HasKeyS`].
///
/// R5 and R6 encode that anyone knowing a location can fetch from it; a
/// change to the storage model belongs here.
pub fn standard_rules() -> Vec<Rule> {
    use Atom::*;
    vec![
        Rule::new("R1", &[HasBlobOrig, HasKeyS], KnowsPlain),
        Rule::new("R2", &[HasBlobShared, HasKeySPrime], KnowsPlain),
        Rule::new("R3", &[HasBlobOrig, HasRK], HasBlobShared),
        Rule::new("R4", &[HasBlobShared, HasRK], HasBlobOrig),
        Rule::new("R5", &[HasLocN1], HasBlobOrig),
        Rule::new("R6", &[HasLocN2], HasBlobShared),
        Rule::new("R7", &[HasBlobOrig, HasBlobShared, HasKeySPrime], HasPadsOverD),
        Rule::new("R8", &[HasBlobOrig, HasPadsOverD], KnowsPlain),
    ]
}

/// Least fixed point of `rules` over `initial`, per file.
pub fn closure(initial: &BTreeSet<Fact>, rules: &[Rule]) -> BTreeSet<Fact> {
    let mut known = initial.clone();
    let files: BTreeSet<Digest> = initial.iter().map(|f| f.file_id).collect();
    loop {
        let mut added = false;
        for file_id in &files {
            for rule in rules {
                let fires = rule.premises.iter().all(|&a| known.contains(&Fact::new(a, *file_id)));
                if fires {
                    added |= known.insert(Fact::new(rule.conclusion, *file_id));
                }
            }
        }
        if !added {
            return known;
        }
    }
}
