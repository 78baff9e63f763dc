//! Consensus rules: tickets, seeds, blocks, fork choice and rewards.

mod block;
mod params;
mod ticket;
mod tree;
mod validate;

use std::collections::HashMap;

use crate::crypto::{KeyPair, PublicKey};

pub use block::{
    assemble_block, block_header_bytes, compute_block_seed, genesis_seed, reward_split, AssembleError, Block,
    GENESIS_COUNT,
};
pub use params::{ParamsError, ProtocolParams, TICKETS_PER_BLOCK};
pub use ticket::{
    derive_ticket_bytes, ticket_score, ticket_signed_bytes, ScoreMode, Ticket, TicketType, TICKET_SIGNED_LEN,
    TICKET_WIRE_LEN,
};
pub(crate) use ticket::{log2_balance, score_with_log};
pub use tree::{is_eligible, BlockTree, TreeError};
pub use validate::{validate_block, Violation};

/// A lottery participant: signing keys and a static balance.
#[derive(Clone, Debug)]
pub struct Account {
    pub key: KeyPair,
    pub balance: u64,
}

impl Account {
    pub fn new(key: KeyPair, balance: u64) -> Self {
        Account { key, balance }
    }

    pub fn public_key(&self) -> PublicKey {
        self.key.public_key()
    }
}

/// Balance lookup by public key.
#[derive(Clone, Debug, Default)]
pub struct Ledger(HashMap<PublicKey, u64>);

impl Ledger {
    pub fn balance(&self, pk: &PublicKey) -> Option<u64> {
        self.0.get(pk).copied()
    }

    pub fn insert(&mut self, pk: PublicKey, balance: u64) {
        self.0.insert(pk, balance);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<'a> FromIterator<&'a Account> for Ledger {
    fn from_iter<I: IntoIterator<Item = &'a Account>>(iter: I) -> Self {
        Ledger(iter.into_iter().map(|a| (a.public_key(), a.balance)).collect())
    }
}

/// The ticket of `ticket_type` that `account` draws from `tip`'s seed.
///
/// Ticket3 targets `tip.height + 1`, Ticket2 `+ 2` and Ticket1 `+ 3`.
/// Returns `None` when the score is zero.
pub fn generate_ticket(
    account: &Account,
    tip: &Block,
    ticket_type: TicketType,
    params: &ProtocolParams,
    mode: ScoreMode,
) -> Option<Ticket> {
    let target = tip.height + ticket_type.seed_offset();
    Ticket::issue(&account.key, account.balance, ticket_type, target, tip.seed, params, mode)
}

#[cfg(test)]
mod tests;
