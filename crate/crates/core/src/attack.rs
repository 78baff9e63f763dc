//! Monte Carlo private-fork attack harness.
//!
//! Each trial draws a fresh honest network (balances and genesis), runs an
//! honest warm-up, then forks: the honest network extends `k` blocks with its
//! own accounts while the attacker extends `k` blocks with hers. Trials run
//! on the incremental lottery engine; tickets are not signed because no rule
//! of the lottery depends on signature bytes.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{keypair_from_index, Digest32, PublicKey};
use crate::lottery::{Hanging, LotteryChain, Population};
use crate::netsim::{sample_balances, ConfigError, SimConfig};
use crate::protocol::{Account, Block, ProtocolParams};
use crate::rng;

/// Which attack the configuration describes.
///
/// A History attack with purchased keys that stay offline afterwards is the
/// same race as a private fork, so both run the same trial engine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    #[default]
    PrivateFork,
    History,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    /// The honest network. Its `n_blocks` and `rng_seed` are not used here.
    pub base: SimConfig,
    /// Attacker stake as a fraction of the honest supply.
    pub attacker_fraction: f64,
    pub partitions: usize,
    pub fork_depth: u64,
    pub trials: u64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_warmup")]
    pub warmup_blocks: u64,
    #[serde(default)]
    pub kind: AttackKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum AttackError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// The honest network hung even under the fallback rule.
    #[error("honest network hangs in trial {trial}: {hanging}")]
    HonestHanging { trial: u64, hanging: Hanging },
}

fn default_warmup() -> u64 {
    20
}

impl AttackConfig {
    /// x = 50, P = 180, k = 10 against the reference network.
    pub fn reference() -> Self {
        AttackConfig {
            base: SimConfig::reference(),
            attacker_fraction: 0.5,
            partitions: 180,
            fork_depth: 10,
            trials: 5000,
            rng_seed: 0,
            warmup_blocks: 20,
            kind: AttackKind::PrivateFork,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.base.validate()?;
        if !(0.0..=1.0).contains(&self.attacker_fraction) {
            return Err(ConfigError::Field { field: "attacker_fraction", reason: "must be in [0, 1]".into() });
        }
        let positive =
            [("partitions", self.partitions as u64), ("fork_depth", self.fork_depth), ("trials", self.trials)];
        for (field, v) in positive {
            if v == 0 {
                return Err(ConfigError::Field { field, reason: "must be at least 1".into() });
            }
        }
        Ok(())
    }

    pub fn attacker_total(&self) -> u64 {
        attacker_total(self.attacker_fraction, self.base.total_supply)
    }
}

fn attacker_total(fraction: f64, honest_total: u64) -> u64 {
    (fraction * honest_total as f64).round() as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AttackEstimate {
    pub successes: u64,
    pub trials: u64,
    pub probability: f64,
    /// 95% normal-approximation half-width.
    pub ci_half_width: f64,
}

impl AttackEstimate {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        assert!(trials > 0 && successes <= trials);
        let p = successes as f64 / trials as f64;
        AttackEstimate {
            successes,
            trials,
            probability: p,
            ci_half_width: 1.96 * (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }

    pub fn lower(&self) -> f64 {
        self.probability - self.ci_half_width
    }

    pub fn upper(&self) -> f64 {
        self.probability + self.ci_half_width
    }
}

/// Splits `attacker_fraction * honest_total` into `partitions` near-equal
/// balances (the first `total % P` accounts get one extra unit).
pub fn split_stake(total: u64, partitions: usize) -> Vec<u64> {
    assert!(partitions >= 1);
    let p = partitions as u64;
    (0..p).map(|i| total / p + u64::from(i < total % p)).collect()
}

/// Attacker accounts with keys derived from `key_seed`.
pub fn make_attacker(
    attacker_fraction: f64,
    partitions: usize,
    honest_total: u64,
    key_seed: &[u8; 32],
) -> Vec<Account> {
    split_stake(attacker_total(attacker_fraction, honest_total), partitions)
        .into_iter()
        .enumerate()
        .map(|(i, b)| Account::new(keypair_from_index(key_seed, i as u64), b))
        .collect()
}

/// Keys shared by all trials of one run.
#[derive(Clone, Debug)]
pub struct TrialKeys {
    pub honest: Vec<PublicKey>,
    pub attacker: Vec<PublicKey>,
}

impl TrialKeys {
    pub fn new(rng_seed: u64, n_honest: usize, n_attacker: usize) -> Self {
        let derive = |label, n| {
            let seed = rng::stream_seed(rng_seed, label, 0).0;
            (0..n as u64).into_par_iter().map(|i| keypair_from_index(&seed, i).public_key()).collect()
        };
        TrialKeys { honest: derive(rng::KEYS, n_honest), attacker: derive(rng::ATTACKER, n_attacker) }
    }

    pub fn for_config(config: &AttackConfig) -> Self {
        TrialKeys::new(config.rng_seed, config.base.n_accounts, config.partitions)
    }
}

/// Honest side of one trial: the fork point and the honest gain after it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HonestFork {
    pub fork_height: u64,
    pub fork_seeds: [Digest32; 3],
    pub honest_total: u64,
    pub honest_gain: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub honest_gain: f64,
    /// `None` when the attacker's fork hung.
    pub attacker_gain: Option<f64>,
    pub win: bool,
}

/// Honest network of trial `index`: warm-up, then `fork_depth` more blocks.
/// Honest hanging heights use the fallback rule; this fails only if even that
/// finds no positive ticket.
pub fn honest_fork(config: &AttackConfig, keys: &TrialKeys, index: u64) -> Result<HonestFork, AttackError> {
    let base = &config.base;
    let mut trial_rng = rng::stream(config.rng_seed, rng::TRIAL, index);
    let balances = sample_balances(base.n_accounts, base.total_supply, &base.wealth_shape, &mut trial_rng);
    let label: [u8; 32] = trial_rng.gen();
    let pop = Population::new(keys.honest[..base.n_accounts].to_vec(), balances);
    let params = ProtocolParams { hanging_fallback_enabled: true, ..base.params };
    let seeds = Block::genesis(&label).map(|b| b.seed);
    let mut chain = LotteryChain::new(&pop, params, 2, seeds);
    let hung = |hanging| AttackError::HonestHanging { trial: index, hanging };
    for _ in 0..config.warmup_blocks {
        chain.step().map_err(hung)?;
    }
    let (fork_height, fork_seeds) = (chain.tip_height(), chain.recent_seeds());
    chain.reset_gain();
    for _ in 0..config.fork_depth {
        chain.step().map_err(hung)?;
    }
    Ok(HonestFork { fork_height, fork_seeds, honest_total: pop.total_stake(), honest_gain: chain.gain() })
}

/// Attacker's private fork from `fork`; `None` if it hangs.
pub fn attacker_gain(pop: &Population, params: &ProtocolParams, fork: &HonestFork, depth: u64) -> Option<f64> {
    let params = ProtocolParams { hanging_fallback_enabled: false, ..*params };
    let mut chain = LotteryChain::new(pop, params, fork.fork_height, fork.fork_seeds);
    for _ in 0..depth {
        chain.step().ok()?;
    }
    Some(chain.gain())
}

fn attacker_population(config: &AttackConfig, keys: &TrialKeys, partitions: usize, honest_total: u64) -> Population {
    let balances = split_stake(attacker_total(config.attacker_fraction, honest_total), partitions);
    Population::new(keys.attacker[..partitions].to_vec(), balances)
}

fn outcome(honest_gain: f64, attacker_gain: Option<f64>) -> TrialOutcome {
    TrialOutcome { honest_gain, attacker_gain, win: attacker_gain.is_some_and(|a| a > honest_gain) }
}

/// One trial. The attacker wins only by strictly exceeding the honest gain.
pub fn run_private_fork_trial(
    config: &AttackConfig,
    keys: &TrialKeys,
    index: u64,
) -> Result<TrialOutcome, AttackError> {
    let fork = honest_fork(config, keys, index)?;
    let pop = attacker_population(config, keys, config.partitions, fork.honest_total);
    Ok(outcome(fork.honest_gain, attacker_gain(&pop, &config.base.params, &fork, config.fork_depth)))
}

/// Runs `trial` for every index in parallel. Errors surface in index order,
/// so the result is the same on any number of threads.
pub(crate) fn run_trials<T: Send>(
    trials: u64,
    trial: impl Fn(u64) -> Result<T, AttackError> + Sync + Send,
) -> Result<Vec<T>, AttackError> {
    let results: Vec<Result<T, AttackError>> = (0..trials).into_par_iter().map(trial).collect();
    results.into_iter().collect()
}

/// Runs `config.trials` independent trials. The result does not depend on
/// the order or parallelism of execution.
pub fn estimate_attack_success(config: &AttackConfig) -> Result<AttackEstimate, AttackError> {
    config.validate()?;
    let keys = TrialKeys::for_config(config);
    let outcomes = run_trials(config.trials, |i| run_private_fork_trial(config, &keys, i))?;
    let wins = outcomes.iter().filter(|t| t.win).count();
    Ok(AttackEstimate::from_counts(wins as u64, config.trials))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub partitions: usize,
    pub estimate: AttackEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    /// Partition count with the highest estimate; the smallest on ties.
    pub best_partitions: usize,
}

/// Estimates success for each partition count. Every count faces the same
/// honest network in trial `i` (common random numbers).
pub fn sweep_partition(config: &AttackConfig, partitions: &[usize]) -> Result<Sweep, AttackError> {
    config.validate()?;
    if partitions.is_empty() || partitions.contains(&0) {
        let reason = "sweep needs counts of at least 1".into();
        return Err(ConfigError::Field { field: "partition_values", reason }.into());
    }
    let max_p = *partitions.iter().max().unwrap();
    let keys = TrialKeys::new(config.rng_seed, config.base.n_accounts, max_p);
    let per_trial: Vec<Vec<bool>> = run_trials(config.trials, |i| {
        let fork = honest_fork(config, &keys, i)?;
        Ok(partitions
            .iter()
            .map(|&p| {
                let pop = attacker_population(config, &keys, p, fork.honest_total);
                outcome(fork.honest_gain, attacker_gain(&pop, &config.base.params, &fork, config.fork_depth)).win
            })
            .collect())
    })?;
    let rows: Vec<SweepRow> = partitions
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let wins = per_trial.iter().filter(|t| t[j]).count() as u64;
            SweepRow { partitions: p, estimate: AttackEstimate::from_counts(wins, config.trials) }
        })
        .collect();
    let best = rows.iter().fold(&rows[0], |best, r| {
        if r.estimate.probability > best.estimate.probability
            || (r.estimate.probability == best.estimate.probability && r.partitions < best.partitions)
        {
            r
        } else {
            best
        }
    });
    Ok(Sweep { best_partitions: best.partitions, rows })
}
