pub mod attacks;
pub mod cli;
pub mod crypto;
pub mod ledger;
pub mod netsim;
pub mod protocol;
