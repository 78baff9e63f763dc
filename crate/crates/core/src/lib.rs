//! Interactive proof-of-stake: consensus rules, a round-based honest-network
//! simulator, and Monte Carlo private-fork attack estimates against both the
//! ticket lottery and an Nxt-style forging baseline.

pub mod attack;
pub mod crypto;
pub mod export;
pub mod lottery;
pub mod netsim;
pub mod nxt;
pub mod protocol;
pub mod rng;
