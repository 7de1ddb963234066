pub mod crypto;
pub mod harness;
pub mod hospital_store;
pub mod ledger;
pub mod record_exchange;
pub mod registry;
pub mod wire;

/// Seconds since the Unix epoch.
pub type Timestamp = u64;
