//! CSV and JSON result rows.

use std::io::Write;

use serde::Serialize;

use crate::attack::{AttackConfig, AttackEstimate, Sweep};
use crate::crypto::Digest32;
use crate::netsim::{Bucket, SimConfig, SimResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Ipos,
    Nxt,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccountRow {
    pub account_id: usize,
    pub public_key: String,
    pub balance: u64,
    pub stake_share: f64,
    pub ticket_count: u64,
}

pub fn account_rows(result: &SimResult) -> Vec<AccountRow> {
    let total: u64 = result.accounts.iter().map(|a| a.balance).sum();
    result
        .accounts
        .iter()
        .zip(&result.ticket_counts)
        .enumerate()
        .map(|(i, (a, &c))| AccountRow {
            account_id: i,
            public_key: hex::encode(a.public_key().0),
            balance: a.balance,
            stake_share: a.balance as f64 / total as f64,
            ticket_count: c,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimSummary {
    pub config: SimConfig,
    pub blocks: u64,
    pub tip: Digest32,
    pub chain_score: f64,
    pub participation: f64,
    pub hanging_events: u64,
    pub buckets: Vec<Bucket>,
}

impl SimSummary {
    pub fn new(result: &SimResult) -> Self {
        SimSummary {
            config: result.config.clone(),
            blocks: result.config.n_blocks,
            tip: result.tip,
            chain_score: result.tree.chain_score(&result.tip).unwrap_or(0.0),
            participation: result.participation,
            hanging_events: result.hanging_events,
            buckets: result.buckets.clone(),
        }
    }
}

/// One attack estimate as a result row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackRow {
    pub protocol: Protocol,
    pub x: f64,
    #[serde(rename = "P")]
    pub partitions: usize,
    pub k: u64,
    pub trials: u64,
    pub successes: u64,
    pub probability: f64,
    pub ci_half_width: f64,
}

impl AttackRow {
    pub fn new(protocol: Protocol, config: &AttackConfig, partitions: usize, estimate: &AttackEstimate) -> Self {
        AttackRow {
            protocol,
            x: config.attacker_fraction * 100.0,
            partitions,
            k: config.fork_depth,
            trials: estimate.trials,
            successes: estimate.successes,
            probability: estimate.probability,
            ci_half_width: estimate.ci_half_width,
        }
    }
}

pub fn sweep_rows(config: &AttackConfig, sweep: &Sweep) -> Vec<AttackRow> {
    sweep.rows.iter().map(|r| AttackRow::new(Protocol::Ipos, config, r.partitions, &r.estimate)).collect()
}

pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
