use serde::Serialize;

use crate::crypto::{self, Digest32, PublicKey};

use super::params::ProtocolParams;
use super::ticket::{ScoreMode, Ticket, TicketType};
use super::tree::BlockTree;
use super::validate::{check_tickets, Violation};

/// Heights 0, 1 and 2 are genesis blocks.
pub const GENESIS_COUNT: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Block {
    pub height: u64,
    pub parent_id: Digest32,
    /// Empty for genesis blocks, otherwise Ticket1, Ticket2, Ticket3 in order.
    pub tickets: Vec<Ticket>,
    pub seed: Digest32,
    pub block_id: Digest32,
    pub block_score: f64,
    /// Scores were computed under the hanging fallback rule.
    pub fallback: bool,
}

pub fn compute_block_seed(parent_seed: &Digest32, pk1: &PublicKey, pk2: &PublicKey, pk3: &PublicKey) -> Digest32 {
    crypto::digest_concat(&[parent_seed.as_bytes(), pk1.as_bytes(), pk2.as_bytes(), pk3.as_bytes()])
}

/// `height(8, BE) || parent_id(32) || seed(32) || tickets (137 bytes each)`.
pub fn block_header_bytes(height: u64, parent_id: &Digest32, seed: &Digest32, tickets: &[Ticket]) -> Vec<u8> {
    let mut out = Vec::with_capacity(72 + tickets.len() * super::ticket::TICKET_WIRE_LEN);
    out.extend_from_slice(&height.to_be_bytes());
    out.extend_from_slice(parent_id.as_bytes());
    out.extend_from_slice(seed.as_bytes());
    for t in tickets {
        out.extend_from_slice(&t.to_bytes());
    }
    out
}

pub fn genesis_seed(label: &[u8], index: u8) -> Digest32 {
    crypto::digest_concat(&[label, &[index]])
}

impl Block {
    pub fn header_bytes(&self) -> Vec<u8> {
        block_header_bytes(self.height, &self.parent_id, &self.seed, &self.tickets)
    }

    pub fn compute_id(&self) -> Digest32 {
        crypto::digest(&self.header_bytes())
    }

    pub fn is_genesis(&self) -> bool {
        self.height < GENESIS_COUNT
    }

    /// The Ticket1 generator, who assembles and signs the block.
    pub fn signer(&self) -> Option<&PublicKey> {
        self.tickets.first().map(|t| &t.public_key)
    }

    pub fn ticket_keys(&self) -> impl Iterator<Item = &PublicKey> {
        self.tickets.iter().map(|t| &t.public_key)
    }

    /// The three chained genesis blocks. The first has an all-zero parent.
    pub fn genesis(label: &[u8]) -> [Block; 3] {
        let mut parent = Digest32::ZERO;
        let mut make = |i: u8| {
            let mut b = Block {
                height: u64::from(i),
                parent_id: parent,
                tickets: Vec::new(),
                seed: genesis_seed(label, i),
                block_id: Digest32::ZERO,
                block_score: 0.0,
                fallback: false,
            };
            b.block_id = b.compute_id();
            parent = b.block_id;
            b
        };
        [make(0), make(1), make(2)]
    }
}

#[derive(Debug, thiserror::Error)]
#[error("cannot assemble block: {}", .0.iter().map(|v| v.rule_id()).collect::<Vec<_>>().join(", "))]
pub struct AssembleError(pub Vec<Violation>);

/// Forms a block on top of `parent_id` from one ticket of each type.
///
/// Checks everything that does not need balances: ticket types, target
/// heights, source seeds, positive scores, distinct and eligible keys.
pub fn assemble_block(
    tree: &BlockTree,
    parent_id: &Digest32,
    tickets: [Ticket; 3],
    params: &ProtocolParams,
    mode: ScoreMode,
) -> Result<Block, AssembleError> {
    let parent = tree.get(parent_id).ok_or(AssembleError(vec![Violation::UnknownParent]))?;
    let height = parent.height + 1;
    let violations = check_tickets(tree, parent, &tickets, params);
    if !violations.is_empty() {
        return Err(AssembleError(violations));
    }
    let [t1, t2, t3] = &tickets;
    debug_assert_eq!(t1.ticket_type, TicketType::One);
    let seed = compute_block_seed(&parent.seed, &t1.public_key, &t2.public_key, &t3.public_key);
    let block_score = t1.score + t2.score + t3.score;
    let mut block = Block {
        height,
        parent_id: *parent_id,
        tickets: tickets.into(),
        seed,
        block_id: Digest32::ZERO,
        block_score,
        fallback: mode == ScoreMode::Fallback,
    };
    block.block_id = block.compute_id();
    Ok(block)
}

/// Splits a block reward among the three ticket generators.
///
/// The remainder goes to the Ticket1 generator.
pub fn reward_split(block_reward: u64) -> [u64; 3] {
    let share = block_reward / 3;
    [share + block_reward % 3, share, share]
}
