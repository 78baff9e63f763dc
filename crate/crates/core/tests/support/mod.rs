//! Property checks shared by the property tests and the acceptance suite.
//! Each returns `Err` with a description of the first counterexample.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use ipos_core::attack::{estimate_attack_success, AttackConfig};
use ipos_core::crypto::{digest, Digest32, PublicKey};
use ipos_core::netsim::{run_honest_sim, SimConfig, SimResult, WealthShape};
use ipos_core::nxt::retarget;
use ipos_core::protocol::{derive_ticket_bytes, reward_split, validate_block, Block, ProtocolParams, TicketType};

pub type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// A small random honest chain that cannot run out of eligible accounts.
pub fn random_sim(rng: &mut impl Rng) -> SimResult {
    let l = rng.gen_range(1..=4u64);
    let n = rng.gen_range(3 * l as usize + 3..=18);
    let config = SimConfig {
        n_accounts: n,
        total_supply: 1_000_000 * n as u64,
        wealth_shape: if rng.gen() { WealthShape::Equal } else { WealthShape::default() },
        n_blocks: rng.gen_range(1..=12),
        params: ProtocolParams::new(rng.gen_range(1..=255), l),
        rng_seed: rng.gen(),
    };
    run_honest_sim(&config).expect("small sims never hang with the fallback")
}

/// Every block of `chains` random chains validates, and the tip id is what
/// the chain's own blocks say it is.
pub fn roundtrip(chains: usize, seed: u64) -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for i in 0..chains {
        let sim = random_sim(&mut rng);
        sim.revalidate().map_err(|(h, v)| format!("chain {i}: block {h} rejected: {v:?}"))?;
        let chain = sim.tree.chain(&sim.tip);
        ensure(chain.len() as u64 == sim.config.n_blocks + 3, || format!("chain {i}: wrong length"))?;
        for w in chain.windows(2) {
            ensure(w[1].parent_id == w[0].block_id && w[1].block_id == w[1].compute_id(), || {
                format!("chain {i}: broken link")
            })?;
        }
    }
    Ok(())
}

pub const MUTATIONS: usize = 13;

/// Changes one field of `block` (keeping the id consistent where the field
/// is part of the header, so the rule checks themselves must object).
pub fn mutate(block: &mut Block, kind: usize, slot: usize, other_key: PublicKey) {
    let t = &mut block.tickets[slot];
    match kind {
        0 => block.height += 1,
        1 => block.parent_id = digest(block.parent_id.as_bytes()),
        2 => block.seed.0[slot] ^= 1,
        3 => {
            t.score += 1.0;
            block.block_score += 1.0;
        }
        4 => t.lottery_byte ^= 1,
        5 => t.signature.0[slot * 7] ^= 0x10,
        6 => t.source_seed.0[0] ^= 0x80,
        7 => t.target_height += 1,
        8 => t.public_key = other_key,
        9 => t.ticket_type = TicketType::ALL[(slot + 1) % 3],
        10 => block.block_score += 0.5,
        11 => block.fallback = !block.fallback,
        12 => block.block_id.0[31] ^= 1,
        _ => unreachable!(),
    }
    if kind != 12 {
        block.block_id = block.compute_id();
    }
}

/// Applies mutation `kind` to the tip of `sim` and expects a rejection.
pub fn mutation_rejected(sim: &SimResult, kind: usize, slot: usize) -> Check {
    let tip = sim.tree.get(&sim.tip).unwrap();
    let ledger = sim.ledger();
    validate_block(tip, &sim.tree, &sim.config.params, &ledger)
        .map_err(|v| format!("unmutated tip rejected: {v:?}"))?;
    let other = sim.accounts.iter().map(|a| a.public_key()).find(|k| tip.ticket_keys().all(|t| t != k)).unwrap();
    let mut bad = tip.clone();
    mutate(&mut bad, kind, slot, other);
    ensure(validate_block(&bad, &sim.tree, &sim.config.params, &ledger).is_err(), || {
        format!("mutation {kind} on ticket {slot} accepted")
    })
}

pub fn mutations(chains: usize, seed: u64) -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..chains {
        let sim = random_sim(&mut rng);
        for kind in 0..MUTATIONS {
            mutation_rejected(&sim, kind, rng.gen_range(0..3))?;
        }
    }
    Ok(())
}

/// Fraction of lottery bytes in `1..=r` over `draws` random (seed, key)
/// pairs, per ticket byte, against `r / 256` with a 3-sigma band.
pub fn positivity_rate(r: u16, draws: usize, seed: u64) -> Result<[f64; 3], String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut hits = [0usize; 3];
    for _ in 0..draws {
        let s = Digest32(rng.gen());
        let pk = PublicKey(rng.gen());
        for (h, m) in hits.iter_mut().zip(derive_ticket_bytes(&s, &pk)) {
            *h += usize::from(m >= 1 && u16::from(m) <= r);
        }
    }
    let p = f64::from(r) / 256.0;
    let sigma = (p * (1.0 - p) / draws as f64).sqrt();
    let rates = hits.map(|h| h as f64 / draws as f64);
    for (i, rate) in rates.iter().enumerate() {
        ensure((rate - p).abs() <= 3.0 * sigma, || format!("byte {i}: rate {rate} vs {p} ± {}", 3.0 * sigma))?;
    }
    Ok(rates)
}

/// Cached chain scores equal the exact left fold of block scores, and each
/// block adds exactly its own score.
pub fn additivity(chains: usize, seed: u64) -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for i in 0..chains {
        let sim = random_sim(&mut rng);
        let cached = sim.tree.chain_score(&sim.tip).unwrap();
        let folded = sim.tree.recompute_chain_score(&sim.tip);
        ensure(cached.to_bits() == folded.to_bits(), || format!("chain {i}: {cached} != {folded}"))?;
        for b in sim.tree.chain(&sim.tip).iter().filter(|b| !b.is_genesis()) {
            let here = sim.tree.chain_score(&b.block_id).unwrap();
            let parent = sim.tree.chain_score(&b.parent_id).unwrap();
            ensure(here == parent + b.block_score, || format!("chain {i}: height {} not additive", b.height))?;
        }
    }
    Ok(())
}

pub fn retarget_clamped(t_prev: u64, delay: f64, target: f64) -> Check {
    let t = retarget(t_prev, delay, target);
    ensure(t >= t_prev.div_ceil(2) && t <= t_prev.saturating_mul(2), || {
        format!("retarget({t_prev}, {delay}, {target}) = {t}")
    })
}

pub fn retarget_cases(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..cases {
        let shift = rng.gen_range(0..63);
        let t = rng.gen_range(1..=u64::MAX >> shift);
        retarget_clamped(t, rng.gen_range(0.0..1e4), rng.gen_range(0.5..600.0))?;
    }
    Ok(())
}

pub fn reward_conserved(reward: u64) -> Check {
    let s = reward_split(reward);
    let total = s.iter().try_fold(0u64, |a, &x| a.checked_add(x));
    ensure(total == Some(reward) && s[0] >= s[1] && s[1] == s[2] && s[0] - s[1] < 3, || {
        format!("split {reward} -> {s:?}")
    })
}

pub fn reward_cases(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    [0, 1, 2, 3, u64::MAX].into_iter().chain((0..cases).map(|_| rng.gen())).try_for_each(reward_conserved)
}

/// Two runs of the same config end at the same tip; another seed does not.
pub fn determinism() -> Check {
    let config = SimConfig { n_accounts: 40, total_supply: 40_000_000, n_blocks: 60, ..SimConfig::reference() };
    let a = run_honest_sim(&config).unwrap();
    let b = run_honest_sim(&config).unwrap();
    ensure(a.tip == b.tip && a.ticket_counts == b.ticket_counts, || "same seed, different tips".into())?;
    let c = run_honest_sim(&SimConfig { rng_seed: 1, ..config }).unwrap();
    ensure(a.tip != c.tip, || "different seeds, same tip".into())
}

/// The estimate is the same on 1 and 4 worker threads.
pub fn parallelism_invariance() -> Check {
    let mut config = AttackConfig::reference();
    config.base.n_accounts = 100;
    config.base.total_supply = 200_000_000;
    config.partitions = 30;
    config.trials = 300;
    let on = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_attack_success(&config).unwrap())
    };
    let (one, four) = (on(1), on(4));
    ensure(one == four, || format!("{one:?} != {four:?}"))
}
