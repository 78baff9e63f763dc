//! Named random sub-streams.
//!
//! A master `u64` seed expands into independent ChaCha20 streams keyed by
//! `SHA-256(seed_be || label || index_be)`, so any component (wealth draw,
//! one Monte Carlo trial, ...) can be replayed in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::crypto::{digest_concat, Digest32};

pub const WEALTH: &str = "wealth";
pub const GENESIS: &str = "genesis";
pub const KEYS: &str = "keys";
pub const TRIAL: &str = "trial";
pub const ATTACKER: &str = "attacker";

pub fn stream_seed(master: u64, label: &str, index: u64) -> Digest32 {
    digest_concat(&[&master.to_be_bytes(), label.as_bytes(), &index.to_be_bytes()])
}

pub fn stream(master: u64, label: &str, index: u64) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(stream_seed(master, label, index).0)
}
