//! Round-based honest-network simulation.
//!
//! The honest network is modeled as one coordinated lottery: at every height
//! the best eligible ticket of each type is taken from the whole population,
//! signed, assembled into a block and appended to a [`BlockTree`]. There is
//! no clock; a hanging height switches to the fallback scoring rule instead
//! of waiting.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{keypair_from_index, Digest32, PublicKey};
use crate::lottery::{greedy_pick, Hanging, LotteryChain, Pick, Population};
use crate::protocol::{
    assemble_block, derive_ticket_bytes, is_eligible, ticket_score, validate_block, Account, AssembleError, BlockTree,
    Ledger, ParamsError, ProtocolParams, ScoreMode, Ticket, TicketType, TreeError, Violation,
};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum WealthShape {
    /// I.i.d. exponential draws with rate `lambda`, normalized to the supply.
    /// After normalization the rate has no effect; it is kept as metadata.
    Exponential { lambda: f64 },
    /// Every account holds the same balance.
    Equal,
}

impl Default for WealthShape {
    fn default() -> Self {
        WealthShape::Exponential { lambda: 50.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_accounts: usize,
    pub total_supply: u64,
    #[serde(default)]
    pub wealth_shape: WealthShape,
    #[serde(default = "default_blocks")]
    pub n_blocks: u64,
    pub params: ProtocolParams,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_blocks() -> u64 {
    30_000
}

impl SimConfig {
    /// 800 accounts, 1.6e9 supply, exponential wealth, 30,000 blocks, R = 16, l = 10.
    pub fn reference() -> Self {
        SimConfig {
            n_accounts: 800,
            total_supply: 1_600_000_000,
            wealth_shape: WealthShape::default(),
            n_blocks: 30_000,
            params: ProtocolParams::new(16, 10),
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        if self.n_accounts < 3 {
            return Err(ConfigError::Field { field: "n_accounts", reason: "must be at least 3".into() });
        }
        if self.total_supply < 2 * self.n_accounts as u64 {
            return Err(ConfigError::Field { field: "total_supply", reason: "must be at least 2 * n_accounts".into() });
        }
        if let WealthShape::Exponential { lambda } = self.wealth_shape {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(ConfigError::Field { field: "wealth_shape.lambda", reason: "must be positive".into() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("params.{}: {0}", .0.field())]
    Params(#[from] ParamsError),
    #[error("{field}: {reason}")]
    Field { field: &'static str, reason: String },
}

impl ConfigError {
    pub fn field(&self) -> String {
        match self {
            ConfigError::Params(p) => format!("params.{}", p.field()),
            ConfigError::Field { field, .. } => (*field).to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("chain hangs with the fallback disabled: {0}")]
    Hanging(#[from] Hanging),
    #[error(transparent)]
    Assemble(#[from] AssembleError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Splits `total` into `n` balances of at least 2 following `shape`.
///
/// Each account first gets 2 units; the rest is shared in proportion to the
/// draws, with leftover units going to the largest fractional remainders.
pub fn sample_balances<R: Rng + ?Sized>(n: usize, total: u64, shape: &WealthShape, rng: &mut R) -> Vec<u64> {
    assert!(n >= 1 && total >= 2 * n as u64, "need n >= 1 and total >= 2n");
    if n == 1 {
        return vec![total];
    }
    let weights: Vec<f64> = match *shape {
        WealthShape::Exponential { lambda } => {
            let exp = Exp::new(lambda).expect("lambda > 0");
            (0..n).map(|_| exp.sample(rng)).collect()
        }
        WealthShape::Equal => vec![1.0; n],
    };
    let floor = 2u64;
    let spread = total - floor * n as u64;
    let sum: f64 = weights.iter().sum();
    let mut balances = Vec::with_capacity(n);
    let mut remainders = Vec::with_capacity(n);
    let mut assigned = 0u64;
    for (i, w) in weights.iter().enumerate() {
        let exact = w / sum * spread as f64;
        let whole = (exact.floor() as u64).min(spread - assigned);
        assigned += whole;
        balances.push(floor + whole);
        remainders.push((exact - whole as f64, i));
    }
    let mut left = spread - assigned;
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut idx = 0;
    while left > 0 {
        balances[remainders[idx % n].1] += 1;
        left -= 1;
        idx += 1;
    }
    balances
}

/// Simulation accounts: keys from the `keys` sub-stream, balances from `wealth`.
pub fn make_accounts(config: &SimConfig) -> Vec<Account> {
    let key_seed = rng::stream_seed(config.rng_seed, rng::KEYS, 0).0;
    let mut wealth = rng::stream(config.rng_seed, rng::WEALTH, 0);
    let balances = sample_balances(config.n_accounts, config.total_supply, &config.wealth_shape, &mut wealth);
    balances.into_iter().enumerate().map(|(i, b)| Account::new(keypair_from_index(&key_seed, i as u64), b)).collect()
}

fn issue(
    account: &Account,
    pick: &Pick,
    target: u64,
    source_seed: Digest32,
    params: &ProtocolParams,
    mode: ScoreMode,
) -> Ticket {
    Ticket::issue(&account.key, account.balance, pick.ticket_type, target, source_seed, params, mode)
        .expect("picked tickets have positive scores")
}

/// Best tickets for the block on top of `parent_id`, computed from the tree.
///
/// Returns [`Hanging`] when some slot has no eligible positive candidate.
pub fn best_tickets_for_height(
    accounts: &[Account],
    tree: &BlockTree,
    parent_id: &Digest32,
    params: &ProtocolParams,
    mode: ScoreMode,
) -> Result<[Ticket; 3], Hanging> {
    let parent = tree.get(parent_id).expect("parent in tree");
    let target = parent.height + 1;
    let sources: [Digest32; 3] =
        TicketType::ALL.map(|ty| tree.ancestor_at(parent_id, target - ty.seed_offset()).expect("chain too short").seed);
    let window = tree.suffix(parent_id, params.exclusion_window - 1);
    let keys: Vec<PublicKey> = accounts.iter().map(Account::public_key).collect();
    let picks = greedy_pick(
        &keys,
        target,
        |i| is_eligible(&keys[i], window.iter().copied()),
        |ty, i| {
            let m = derive_ticket_bytes(&sources[ty.byte_index()], &keys[i])[ty.byte_index()];
            (m, ticket_score(m, accounts[i].balance, params, mode))
        },
    )?;
    Ok(picks.map(|p| issue(&accounts[p.account], &p, target, sources[p.ticket_type.byte_index()], params, mode)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bucket {
    pub label: &'static str,
    /// Inclusive lower bound on stake share.
    pub lower: f64,
    /// Exclusive upper bound on stake share, except for the top bucket.
    pub upper: f64,
    pub accounts: usize,
    pub stake_share: f64,
    pub ticket_share: f64,
}

/// Stake-share bucket boundaries: poor below 0.1%, rich above 0.7%.
pub const BUCKET_BOUNDS: [(&str, f64, f64); 3] = [("poor", 0.0, 0.001), ("middle", 0.001, 0.007), ("rich", 0.007, 1.0)];

fn bucket_of(share: f64) -> usize {
    if share < BUCKET_BOUNDS[0].2 {
        0
    } else if share <= BUCKET_BOUNDS[1].2 {
        1
    } else {
        2
    }
}

/// Each stake bucket's share of stake and of all included tickets.
pub fn participation_metrics(balances: &[u64], ticket_counts: &[u64]) -> Vec<Bucket> {
    let total_stake: u64 = balances.iter().sum();
    let total_tickets: u64 = ticket_counts.iter().sum();
    let mut buckets: Vec<Bucket> = BUCKET_BOUNDS
        .iter()
        .map(|&(label, lower, upper)| Bucket { label, lower, upper, accounts: 0, stake_share: 0.0, ticket_share: 0.0 })
        .collect();
    for (&b, &t) in balances.iter().zip(ticket_counts) {
        let share = b as f64 / total_stake as f64;
        let bk = &mut buckets[bucket_of(share)];
        bk.accounts += 1;
        bk.stake_share += share;
        if total_tickets > 0 {
            bk.ticket_share += t as f64 / total_tickets as f64;
        }
    }
    buckets
}

/// Fraction of accounts with at least one included ticket.
pub fn participation_fraction(ticket_counts: &[u64]) -> f64 {
    if ticket_counts.is_empty() {
        return 0.0;
    }
    ticket_counts.iter().filter(|&&c| c > 0).count() as f64 / ticket_counts.len() as f64
}

#[derive(Debug)]
pub struct SimResult {
    pub config: SimConfig,
    pub tree: BlockTree,
    pub tip: Digest32,
    pub accounts: Vec<Account>,
    pub ticket_counts: Vec<u64>,
    pub hanging_events: u64,
    pub participation: f64,
    pub buckets: Vec<Bucket>,
}

impl SimResult {
    pub fn balances(&self) -> Vec<u64> {
        self.accounts.iter().map(|a| a.balance).collect()
    }

    pub fn ledger(&self) -> Ledger {
        self.accounts.iter().collect()
    }

    /// Re-checks every non-genesis block on the final chain.
    pub fn revalidate(&self) -> Result<(), (u64, Vec<Violation>)> {
        let ledger = self.ledger();
        for b in self.tree.chain(&self.tip).into_iter().filter(|b| !b.is_genesis()) {
            validate_block(b, &self.tree, &self.config.params, &ledger).map_err(|v| (b.height, v))?;
        }
        Ok(())
    }
}

/// Builds `n_blocks` honest blocks on top of the genesis blocks.
pub fn run_honest_sim(config: &SimConfig) -> Result<SimResult, SimError> {
    config.validate()?;
    let params = config.params;
    let accounts = make_accounts(config);
    let pop = Population::new(
        accounts.iter().map(Account::public_key).collect(),
        accounts.iter().map(|a| a.balance).collect(),
    );
    let genesis_label = rng::stream_seed(config.rng_seed, rng::GENESIS, 0);
    let mut tree = BlockTree::new(genesis_label.as_bytes());
    let genesis_seeds = tree.genesis_ids().map(|id| tree.get(&id).unwrap().seed);
    let mut lottery = LotteryChain::new(&pop, params, 2, genesis_seeds);
    // Source seeds for the next target, oldest first (targets h-3, h-2, h-1).
    let mut sources = genesis_seeds;
    let mut tip = *tree.genesis_tip();
    let mut ticket_counts = vec![0u64; accounts.len()];
    let mut hanging_events = 0;

    for _ in 0..config.n_blocks {
        let (picks, fallback) = lottery.select_with_fallback()?;
        let mode = if fallback { ScoreMode::Fallback } else { ScoreMode::Normal };
        hanging_events += u64::from(fallback);
        let target = lottery.tip_height() + 1;
        let tickets = picks.map(|p| {
            ticket_counts[p.account] += 1;
            issue(&accounts[p.account], &p, target, sources[p.ticket_type.byte_index()], &params, mode)
        });
        let block = assemble_block(&tree, &tip, tickets, &params, mode)?;
        let seed = lottery.append(&picks);
        debug_assert_eq!(seed, block.seed);
        tip = block.block_id;
        tree.insert(block)?;
        sources = [sources[1], sources[2], seed];
    }

    let balances: Vec<u64> = accounts.iter().map(|a| a.balance).collect();
    let buckets = participation_metrics(&balances, &ticket_counts);
    Ok(SimResult {
        config: config.clone(),
        participation: participation_fraction(&ticket_counts),
        tree,
        tip,
        accounts,
        ticket_counts,
        hanging_events,
        buckets,
    })
}
