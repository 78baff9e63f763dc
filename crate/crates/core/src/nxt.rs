//! Nxt-style forging baseline.
//!
//! Every account hashes the previous generation signature with its key; the
//! first 8 bytes are its hit, and it may forge once `hit < t * b * delay`.
//! The earliest forger wins the height, the base target `t` is retargeted
//! from the observed delay, and chains compare by cumulative difficulty
//! `sum(1 / t)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{split_stake, AttackConfig, AttackError, AttackEstimate, TrialKeys, TrialOutcome};
use crate::crypto::{digest, digest_concat, Digest32, PublicKey};
use crate::netsim::{sample_balances, ConfigError};
use crate::rng;

/// How the two forks of an attack trial are lined up.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Both sides forge `k` blocks.
    #[default]
    EqualLength,
    /// The attacker forges for as long as the honest network took for `k` blocks.
    EqualTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NxtParams {
    #[serde(default = "default_block_time")]
    pub target_block_time: f64,
    /// Defaults to [`initial_base_target`] of the honest network.
    #[serde(default)]
    pub initial_base_target: Option<u64>,
    #[serde(default)]
    pub comparison: Comparison,
}

fn default_block_time() -> f64 {
    60.0
}

impl Default for NxtParams {
    fn default() -> Self {
        NxtParams { target_block_time: 60.0, initial_base_target: None, comparison: Comparison::EqualLength }
    }
}

impl NxtParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.target_block_time > 0.0 && self.target_block_time.is_finite()) {
            return Err(ConfigError::Field { field: "nxt.target_block_time", reason: "must be positive".into() });
        }
        if self.initial_base_target == Some(0) {
            return Err(ConfigError::Field { field: "nxt.initial_base_target", reason: "must be positive".into() });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NxtBlock {
    pub generation_signature: Digest32,
    /// Retargeted base target after this block.
    pub base_target: u64,
    pub forger_key: PublicKey,
    pub delay: f64,
}

impl NxtBlock {
    pub fn difficulty(&self) -> f64 {
        1.0 / self.base_target as f64
    }
}

pub fn generation_signature(prev: &Digest32, public_key: &PublicKey) -> Digest32 {
    digest_concat(&[prev.as_bytes(), public_key.as_bytes()])
}

pub fn hit(g: &Digest32) -> u64 {
    u64::from_be_bytes(g.0[..8].try_into().unwrap())
}

/// Earliest `delay` with `hit < base_target * balance * delay`; infinite for
/// an empty account.
pub fn forge_delay(hit: u64, base_target: u64, balance: u64) -> f64 {
    if balance == 0 {
        return f64::INFINITY;
    }
    hit as f64 / (base_target as f64 * balance as f64)
}

/// `clamp(floor(t * delay / T), ceil(t / 2), 2t)`.
pub fn retarget(t_prev: u64, delay: f64, target_block_time: f64) -> u64 {
    let lo = t_prev.div_ceil(2);
    let hi = t_prev.saturating_mul(2);
    let raw = (t_prev as f64 * delay / target_block_time).floor();
    if raw <= lo as f64 {
        lo
    } else if raw >= hi as f64 {
        hi
    } else {
        raw as u64
    }
}

pub fn cumulative_difficulty(chain: &[NxtBlock]) -> f64 {
    chain.iter().map(NxtBlock::difficulty).sum()
}

/// Base target for which `n` equal accounts holding `total` expect their
/// first block after `target_block_time`: the minimum of `n` uniform hits
/// averages `2^64 / (n + 1)`.
pub fn initial_base_target(n: usize, total: u64, target_block_time: f64) -> u64 {
    let t = 2f64.powi(64) * n as f64 / ((n + 1) as f64 * target_block_time * total as f64);
    (t.floor() as u64).max(1)
}

/// Forging state of one chain over a fixed set of accounts.
#[derive(Clone, Debug)]
pub struct NxtChain<'a> {
    keys: &'a [PublicKey],
    balances: &'a [u64],
    params: NxtParams,
    g: Digest32,
    base_target: u64,
}

impl<'a> NxtChain<'a> {
    pub fn new(keys: &'a [PublicKey], balances: &'a [u64], params: NxtParams, g: Digest32, base_target: u64) -> Self {
        assert_eq!(keys.len(), balances.len());
        NxtChain { keys, balances, params, g, base_target }
    }

    pub fn generation_signature(&self) -> &Digest32 {
        &self.g
    }

    pub fn base_target(&self) -> u64 {
        self.base_target
    }

    /// The earliest forger's block, or `None` if no account holds stake.
    pub fn next_block(&self) -> Option<NxtBlock> {
        let mut best: Option<(f64, usize)> = None;
        for (i, pk) in self.keys.iter().enumerate() {
            let d = forge_delay(hit(&generation_signature(&self.g, pk)), self.base_target, self.balances[i]);
            let better = match best {
                None => d.is_finite(),
                Some((bd, bi)) => d < bd || (d == bd && *pk < self.keys[bi]),
            };
            if better {
                best = Some((d, i));
            }
        }
        let (delay, i) = best?;
        Some(NxtBlock {
            generation_signature: generation_signature(&self.g, &self.keys[i]),
            base_target: retarget(self.base_target, delay, self.params.target_block_time),
            forger_key: self.keys[i],
            delay,
        })
    }

    pub fn step(&mut self) -> Option<NxtBlock> {
        let b = self.next_block()?;
        self.g = b.generation_signature;
        self.base_target = b.base_target;
        Some(b)
    }
}

/// Honest and attacker forks of one trial, measured from the fork point.
#[derive(Clone, Debug, PartialEq)]
pub struct NxtForks {
    pub honest: Vec<NxtBlock>,
    pub attacker: Vec<NxtBlock>,
}

/// Builds the forks of trial `index`: the honest network (same balances and
/// keys as the lottery trial with this index) forges a warm-up, then both
/// sides fork.
pub fn nxt_forks(config: &AttackConfig, nxt: &NxtParams, keys: &TrialKeys, index: u64) -> NxtForks {
    let base = &config.base;
    let mut trial_rng = rng::stream(config.rng_seed, rng::TRIAL, index);
    let balances = sample_balances(base.n_accounts, base.total_supply, &base.wealth_shape, &mut trial_rng);
    let label: [u8; 32] = trial_rng.gen();
    let honest_keys = &keys.honest[..base.n_accounts];
    let total: u64 = balances.iter().sum();
    let t0 =
        nxt.initial_base_target.unwrap_or_else(|| initial_base_target(base.n_accounts, total, nxt.target_block_time));
    let mut honest = NxtChain::new(honest_keys, &balances, *nxt, digest(&label), t0);
    for _ in 0..config.warmup_blocks {
        honest.step().expect("honest stake is positive");
    }
    let attacker_balances = split_stake((config.attacker_fraction * total as f64).round() as u64, config.partitions);
    let mut attacker =
        NxtChain::new(&keys.attacker[..config.partitions], &attacker_balances, *nxt, honest.g, honest.base_target);
    let honest_blocks: Vec<NxtBlock> =
        (0..config.fork_depth).map(|_| honest.step().expect("honest stake is positive")).collect();
    let mut attacker_blocks = Vec::new();
    match nxt.comparison {
        Comparison::EqualLength => {
            for _ in 0..config.fork_depth {
                match attacker.step() {
                    Some(b) => attacker_blocks.push(b),
                    None => break,
                }
            }
        }
        Comparison::EqualTime => {
            let window: f64 = honest_blocks.iter().map(|b| b.delay).sum();
            let mut elapsed = 0.0;
            while let Some(b) = attacker.next_block() {
                elapsed += b.delay;
                if elapsed > window {
                    break;
                }
                attacker.step();
                attacker_blocks.push(b);
            }
        }
    }
    NxtForks { honest: honest_blocks, attacker: attacker_blocks }
}

/// One trial; the attacker wins only with strictly greater cumulative difficulty.
pub fn run_nxt_attack_trial(config: &AttackConfig, nxt: &NxtParams, keys: &TrialKeys, index: u64) -> TrialOutcome {
    let forks = nxt_forks(config, nxt, keys, index);
    let honest_gain = cumulative_difficulty(&forks.honest);
    let attacker_gain = cumulative_difficulty(&forks.attacker);
    TrialOutcome { honest_gain, attacker_gain: Some(attacker_gain), win: attacker_gain > honest_gain }
}

pub fn estimate_nxt_attack_success(config: &AttackConfig, nxt: &NxtParams) -> Result<AttackEstimate, AttackError> {
    config.validate()?;
    nxt.validate()?;
    let keys = TrialKeys::for_config(config);
    let wins = (0..config.trials).into_par_iter().filter(|&i| run_nxt_attack_trial(config, nxt, &keys, i).win).count();
    Ok(AttackEstimate::from_counts(wins as u64, config.trials))
}
