use std::fmt;

use serde::Serialize;

use crate::crypto::PublicKey;

use super::block::{compute_block_seed, Block};
use super::params::ProtocolParams;
use super::ticket::{derive_ticket_bytes, ticket_score, ScoreMode, Ticket, TicketType};
use super::tree::{is_eligible, BlockTree};
use super::Ledger;

/// A broken block rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(into = "&'static str")]
pub enum Violation {
    /// Block seed does not recompute from the parent seed and ticket keys.
    SeedMismatch,
    /// A ticket key was already included in the last `l - 1` blocks.
    IneligibleKey,
    /// A ticket or block score does not recompute, or is not positive.
    BadScore,
    BadSignature,
    /// Two tickets in the block share a key.
    DuplicateKey,
    /// A ticket's source seed is not the chain seed it must derive from.
    BadSeedChain,
    /// Tickets are missing or not of types 1, 2, 3 in order.
    BadTicketTypes,
    BadTargetHeight,
    UnknownParent,
    BadHeight,
    BadBlockId,
    UnknownAccount,
}

impl Violation {
    pub fn rule_id(self) -> &'static str {
        match self {
            Violation::SeedMismatch => "seed-mismatch",
            Violation::IneligibleKey => "ineligible-key",
            Violation::BadScore => "bad-score",
            Violation::BadSignature => "bad-signature",
            Violation::DuplicateKey => "duplicate-key",
            Violation::BadSeedChain => "bad-seed-chain",
            Violation::BadTicketTypes => "bad-ticket-types",
            Violation::BadTargetHeight => "bad-target-height",
            Violation::UnknownParent => "unknown-parent",
            Violation::BadHeight => "bad-height",
            Violation::BadBlockId => "bad-block-id",
            Violation::UnknownAccount => "unknown-account",
        }
    }
}

impl From<Violation> for &'static str {
    fn from(v: Violation) -> Self {
        v.rule_id()
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.rule_id())
    }
}

/// False for NaN as well as for non-positive scores.
fn positive(x: f64) -> bool {
    x > 0.0
}

fn push(out: &mut Vec<Violation>, v: Violation) {
    if !out.contains(&v) {
        out.push(v);
    }
}

/// Ticket checks that need the chain but not balances.
pub(crate) fn check_tickets(
    tree: &BlockTree,
    parent: &Block,
    tickets: &[Ticket],
    params: &ProtocolParams,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let height = parent.height + 1;
    if tickets.len() != 3 || tickets.iter().zip(TicketType::ALL).any(|(t, ty)| t.ticket_type != ty) {
        push(&mut out, Violation::BadTicketTypes);
    }
    for t in tickets {
        if t.target_height != height {
            push(&mut out, Violation::BadTargetHeight);
        }
        let source_height = height.checked_sub(t.ticket_type.seed_offset());
        let expected = source_height.and_then(|h| tree.ancestor_at(&parent.block_id, h)).map(|b| b.seed);
        if expected != Some(t.source_seed) {
            push(&mut out, Violation::BadSeedChain);
        }
        if !positive(t.score) {
            push(&mut out, Violation::BadScore);
        }
    }
    for (i, a) in tickets.iter().enumerate() {
        if tickets[i + 1..].iter().any(|b| b.public_key == a.public_key) {
            push(&mut out, Violation::DuplicateKey);
        }
    }
    let window = tree.suffix(&parent.block_id, params.exclusion_window - 1);
    if tickets.iter().any(|t| !is_eligible(&t.public_key, window.iter().copied())) {
        push(&mut out, Violation::IneligibleKey);
    }
    out
}

fn expected_ticket_score(
    t: &Ticket,
    ledger: &Ledger,
    params: &ProtocolParams,
    mode: ScoreMode,
) -> Result<(u8, f64), Violation> {
    let balance = ledger.balance(&t.public_key).ok_or(Violation::UnknownAccount)?;
    let m = derive_ticket_bytes(&t.source_seed, &t.public_key)[t.ticket_type.byte_index()];
    Ok((m, ticket_score(m, balance, params, mode)))
}

/// Checks every block rule against the tree and the account ledger.
pub fn validate_block(
    block: &Block,
    tree: &BlockTree,
    params: &ProtocolParams,
    ledger: &Ledger,
) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let Some(parent) = tree.get(&block.parent_id) else {
        return Err(vec![Violation::UnknownParent]);
    };
    if block.height != parent.height + 1 {
        push(&mut out, Violation::BadHeight);
    }
    for v in check_tickets(tree, parent, &block.tickets, params) {
        push(&mut out, v);
    }
    let mode = if block.fallback { ScoreMode::Fallback } else { ScoreMode::Normal };
    for t in &block.tickets {
        match expected_ticket_score(t, ledger, params, mode) {
            Ok((m, score)) => {
                if m != t.lottery_byte || score != t.score || !positive(score) {
                    push(&mut out, Violation::BadScore);
                }
            }
            Err(v) => push(&mut out, v),
        }
        if !t.verify_signature() {
            push(&mut out, Violation::BadSignature);
        }
    }
    if block.tickets.len() == 3 {
        let k: Vec<&PublicKey> = block.ticket_keys().collect();
        if compute_block_seed(&parent.seed, k[0], k[1], k[2]) != block.seed {
            push(&mut out, Violation::SeedMismatch);
        }
    }
    let sum: f64 = block.tickets.iter().map(|t| t.score).sum();
    if sum != block.block_score {
        push(&mut out, Violation::BadScore);
    }
    if block.compute_id() != block.block_id {
        push(&mut out, Violation::BadBlockId);
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
