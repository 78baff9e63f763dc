//! Incremental best-ticket lottery over a fixed account population.
//!
//! [`LotteryChain`] follows one chain without materializing signed blocks:
//! it keeps the lottery bytes each account drew from the three most recent
//! seeds and the height at which each account was last included. Every new
//! seed costs one digest per account, reused for all three ticket types.

use crate::crypto::{Digest32, PublicKey};
use crate::protocol::{
    compute_block_seed, derive_ticket_bytes, log2_balance, score_with_log, ProtocolParams, ScoreMode, TicketType,
};

/// Public keys and static balances, indexed by account number.
#[derive(Clone, Debug)]
pub struct Population {
    keys: Vec<PublicKey>,
    balances: Vec<u64>,
    log2: Vec<f64>,
}

impl Population {
    pub fn new(keys: Vec<PublicKey>, balances: Vec<u64>) -> Self {
        assert_eq!(keys.len(), balances.len());
        let log2 = balances.iter().map(|&b| log2_balance(b)).collect();
        Population { keys, balances, log2 }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[PublicKey] {
        &self.keys
    }

    pub fn balances(&self) -> &[u64] {
        &self.balances
    }

    pub fn total_stake(&self) -> u64 {
        self.balances.iter().sum()
    }
}

/// One winning ticket, identified by account index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pick {
    pub account: usize,
    pub ticket_type: TicketType,
    pub lottery_byte: u8,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("no eligible positive ticket for {slot:?} at height {height}")]
pub struct Hanging {
    pub height: u64,
    pub slot: TicketType,
}

/// Greedy best-ticket assignment: Ticket1 first, then Ticket2, then Ticket3,
/// each the highest score among eligible accounts not already picked, with
/// ties going to the smaller public key.
pub(crate) fn greedy_pick(
    keys: &[PublicKey],
    height: u64,
    mut eligible: impl FnMut(usize) -> bool,
    mut score: impl FnMut(TicketType, usize) -> (u8, f64),
) -> Result<[Pick; 3], Hanging> {
    let mut picks: [Option<Pick>; 3] = [None; 3];
    for (slot, ty) in TicketType::ALL.into_iter().enumerate() {
        let mut best: Option<Pick> = None;
        for i in 0..keys.len() {
            if picks[..slot].iter().flatten().any(|p| p.account == i) {
                continue;
            }
            let (m, s) = score(ty, i);
            if s.is_nan() || s <= 0.0 || !eligible(i) {
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => s > b.score || (s == b.score && keys[i] < keys[b.account]),
            };
            if better {
                best = Some(Pick { account: i, ticket_type: ty, lottery_byte: m, score: s });
            }
        }
        picks[slot] = Some(best.ok_or(Hanging { height, slot: ty })?);
    }
    Ok(picks.map(|p| p.unwrap()))
}

const NEVER: u64 = u64::MAX;

/// Lottery state at the tip of one chain.
#[derive(Clone, Debug)]
pub struct LotteryChain<'p> {
    pop: &'p Population,
    params: ProtocolParams,
    tip_height: u64,
    tip_seed: Digest32,
    /// Seeds at tip-2, tip-1, tip.
    seeds: [Digest32; 3],
    /// Bytes drawn from the seeds at tip-2, tip-1, tip.
    recent: [Vec<[u8; 3]>; 3],
    last_included: Vec<u64>,
    gain: f64,
}

fn draw_all(pop: &Population, seed: &Digest32) -> Vec<[u8; 3]> {
    pop.keys.iter().map(|pk| derive_ticket_bytes(seed, pk)).collect()
}

impl<'p> LotteryChain<'p> {
    /// Starts at a tip with the given three most recent seeds (oldest first).
    /// No account of `pop` is in the exclusion window.
    pub fn new(pop: &'p Population, params: ProtocolParams, tip_height: u64, seeds: [Digest32; 3]) -> Self {
        let recent = seeds.each_ref().map(|s| draw_all(pop, s));
        LotteryChain {
            pop,
            params,
            tip_height,
            tip_seed: seeds[2],
            seeds,
            recent,
            last_included: vec![NEVER; pop.len()],
            gain: 0.0,
        }
    }

    pub fn tip_height(&self) -> u64 {
        self.tip_height
    }

    pub fn tip_seed(&self) -> &Digest32 {
        &self.tip_seed
    }

    /// Seeds at tip-2, tip-1 and tip.
    pub fn recent_seeds(&self) -> [Digest32; 3] {
        self.seeds
    }

    /// Sum of block scores appended since construction.
    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn reset_gain(&mut self) {
        self.gain = 0.0;
    }

    pub fn population(&self) -> &'p Population {
        self.pop
    }

    /// Marks `account` as included at `height`, for window bookkeeping when
    /// the chain was built elsewhere.
    pub fn mark_included(&mut self, account: usize, height: u64) {
        self.last_included[account] = height;
    }

    fn eligible(&self, account: usize, target: u64) -> bool {
        let last = self.last_included[account];
        last == NEVER || last + self.params.exclusion_window <= target
    }

    /// Best tickets for the next height under `mode`.
    pub fn select(&self, mode: ScoreMode) -> Result<[Pick; 3], Hanging> {
        let target = self.tip_height + 1;
        let range = self.params.lottery_range;
        greedy_pick(
            &self.pop.keys,
            target,
            |i| self.eligible(i, target),
            |ty, i| {
                let slot = ty.byte_index();
                let m = self.recent[slot][i][slot];
                (m, score_with_log(m, self.pop.log2[i], range, mode))
            },
        )
    }

    /// Normal selection, falling back when the chain hangs and the fallback
    /// is enabled. Returns the picks and whether the fallback was used.
    pub fn select_with_fallback(&self) -> Result<([Pick; 3], bool), Hanging> {
        match self.select(ScoreMode::Normal) {
            Ok(p) => Ok((p, false)),
            Err(h) if !self.params.hanging_fallback_enabled => Err(h),
            Err(_) => self.select(ScoreMode::Fallback).map(|p| (p, true)),
        }
    }

    /// Extends the chain with a block made of `picks`; returns the new seed.
    pub fn append(&mut self, picks: &[Pick; 3]) -> Digest32 {
        let k = &self.pop.keys;
        let seed = compute_block_seed(&self.tip_seed, &k[picks[0].account], &k[picks[1].account], &k[picks[2].account]);
        self.tip_height += 1;
        for p in picks {
            self.last_included[p.account] = self.tip_height;
            self.gain += p.score;
        }
        self.advance_seed(seed);
        seed
    }

    /// Extends the chain with a block produced by accounts outside this
    /// population (only the seed matters here).
    pub fn append_foreign(&mut self, seed: Digest32, block_score: f64) {
        self.tip_height += 1;
        self.gain += block_score;
        self.advance_seed(seed);
    }

    fn advance_seed(&mut self, seed: Digest32) {
        self.tip_seed = seed;
        self.seeds = [self.seeds[1], self.seeds[2], seed];
        let fresh = draw_all(self.pop, &seed);
        self.recent.rotate_left(1);
        self.recent[2] = fresh;
    }

    /// Selects and appends one block, using the fallback when allowed.
    /// Returns the picks and whether the fallback was used.
    pub fn step(&mut self) -> Result<([Pick; 3], bool), Hanging> {
        let (picks, fallback) = self.select_with_fallback()?;
        self.append(&picks);
        Ok((picks, fallback))
    }
}
