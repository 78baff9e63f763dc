use std::collections::HashMap;

use thiserror::Error;

use crate::crypto::{Digest32, PublicKey};

use super::block::Block;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("parent {0} is not in the tree")]
    UnknownParent(Digest32),
    #[error("block height {got} does not follow parent height {parent}")]
    BadHeight { parent: u64, got: u64 },
    #[error("block {0} is already in the tree")]
    Duplicate(Digest32),
    #[error("block id does not match header digest")]
    BadBlockId,
}

#[derive(Clone, Debug)]
struct Entry {
    block: Block,
    cumulative: f64,
}

/// All known blocks, linked by parent id, with cached chain scores.
#[derive(Clone, Debug)]
pub struct BlockTree {
    entries: HashMap<Digest32, Entry>,
    children: HashMap<Digest32, Vec<Digest32>>,
    genesis: [Digest32; 3],
}

impl BlockTree {
    pub fn new(genesis_label: &[u8]) -> Self {
        let genesis = Block::genesis(genesis_label);
        let ids = [genesis[0].block_id, genesis[1].block_id, genesis[2].block_id];
        let mut tree = BlockTree { entries: HashMap::new(), children: HashMap::new(), genesis: ids };
        for (i, b) in genesis.into_iter().enumerate() {
            if i > 0 {
                tree.children.entry(b.parent_id).or_default().push(b.block_id);
            }
            tree.entries.insert(b.block_id, Entry { block: b, cumulative: 0.0 });
        }
        tree
    }

    pub fn genesis_ids(&self) -> &[Digest32; 3] {
        &self.genesis
    }

    /// The last genesis block (height 2), where every chain starts.
    pub fn genesis_tip(&self) -> &Digest32 {
        &self.genesis[2]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &Digest32) -> Option<&Block> {
        self.entries.get(id).map(|e| &e.block)
    }

    pub fn contains(&self, id: &Digest32) -> bool {
        self.entries.contains_key(id)
    }

    /// Adds a block whose parent is already known. Rule validity is not
    /// checked here; see [`super::validate_block`].
    pub fn insert(&mut self, block: Block) -> Result<(), TreeError> {
        if self.entries.contains_key(&block.block_id) {
            return Err(TreeError::Duplicate(block.block_id));
        }
        if block.compute_id() != block.block_id {
            return Err(TreeError::BadBlockId);
        }
        let parent = self.entries.get(&block.parent_id).ok_or(TreeError::UnknownParent(block.parent_id))?;
        if block.height != parent.block.height + 1 {
            return Err(TreeError::BadHeight { parent: parent.block.height, got: block.height });
        }
        let cumulative = parent.cumulative + block.block_score;
        self.children.entry(block.parent_id).or_default().push(block.block_id);
        self.entries.insert(block.block_id, Entry { block, cumulative });
        Ok(())
    }

    /// Sum of block scores from genesis to `tip`.
    pub fn chain_score(&self, tip: &Digest32) -> Option<f64> {
        self.entries.get(tip).map(|e| e.cumulative)
    }

    /// Blocks without children, sorted by id.
    pub fn tips(&self) -> Vec<Digest32> {
        let mut tips: Vec<_> =
            self.entries.keys().filter(|id| self.children.get(*id).is_none_or(|c| c.is_empty())).copied().collect();
        tips.sort();
        tips
    }

    /// Tip with the greatest chain score.
    ///
    /// On a tie the `incumbent` (the currently adopted tip) is kept; among
    /// other tied tips the smallest block id wins.
    pub fn fork_choice(&self, incumbent: Option<&Digest32>) -> Digest32 {
        let mut best: Option<(f64, Digest32)> = None;
        for id in self.tips() {
            let score = self.entries[&id].cumulative;
            best = match best {
                None => Some((score, id)),
                Some((bs, _)) if score > bs => Some((score, id)),
                other => other,
            };
        }
        let (best_score, best_id) = best.expect("tree always holds genesis");
        match incumbent.and_then(|i| self.entries.get(i).map(|e| (i, e.cumulative))) {
            Some((inc, score)) if score >= best_score => *inc,
            _ => best_id,
        }
    }

    /// Ancestor of `id` (or `id` itself) at `height`.
    pub fn ancestor_at(&self, id: &Digest32, height: u64) -> Option<&Block> {
        let mut cur = self.get(id)?;
        if cur.height < height {
            return None;
        }
        while cur.height > height {
            cur = self.get(&cur.parent_id)?;
        }
        Some(cur)
    }

    /// Up to `len` blocks ending at `id`, newest first.
    pub fn suffix(&self, id: &Digest32, len: u64) -> Vec<&Block> {
        let mut out = Vec::new();
        let mut cur = self.get(id);
        while let Some(b) = cur {
            if out.len() as u64 >= len {
                break;
            }
            out.push(b);
            cur = if b.height == 0 { None } else { self.get(&b.parent_id) };
        }
        out
    }

    /// The chain from the first genesis block to `tip`, oldest first.
    pub fn chain(&self, tip: &Digest32) -> Vec<&Block> {
        let mut out = self.suffix(tip, u64::MAX);
        out.reverse();
        out
    }

    /// Sum of block scores along the chain, recomputed from the blocks.
    pub fn recompute_chain_score(&self, tip: &Digest32) -> f64 {
        self.chain(tip).iter().fold(0.0, |acc, b| acc + b.block_score)
    }
}

/// True iff `public_key` generated none of the tickets in `suffix`.
///
/// An account may be included at most once in any `l` consecutive blocks,
/// so `suffix` is the `l - 1` blocks directly below the target height.
pub fn is_eligible<'a>(public_key: &PublicKey, suffix: impl IntoIterator<Item = &'a Block>) -> bool {
    !suffix.into_iter().any(|b| b.ticket_keys().any(|k| k == public_key))
}
