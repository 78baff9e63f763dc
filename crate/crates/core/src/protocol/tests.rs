use super::*;
use crate::crypto::{digest, keypair_from_index, Digest32};

fn accounts(n: u64, balance: u64) -> Vec<Account> {
    (0..n).map(|i| Account::new(keypair_from_index(&[42; 32], i), balance)).collect()
}

/// First-fit block builder, independent of the simulator's selection code.
fn extend(tree: &mut BlockTree, parent_id: Digest32, accts: &[Account], params: &ProtocolParams) -> Digest32 {
    let parent = tree.get(&parent_id).unwrap().clone();
    let h = parent.height + 1;
    let window: Vec<PublicKey> =
        tree.suffix(&parent_id, params.exclusion_window - 1).iter().flat_map(|b| b.ticket_keys().copied()).collect();
    let mut chosen: Vec<Ticket> = Vec::new();
    for ty in TicketType::ALL {
        let src = tree.ancestor_at(&parent_id, h - ty.seed_offset()).unwrap().clone();
        let t = accts
            .iter()
            .filter(|a| !window.contains(&a.public_key()))
            .filter(|a| chosen.iter().all(|c| c.public_key != a.public_key()))
            .find_map(|a| generate_ticket(a, &src, ty, params, ScoreMode::Normal))
            .expect("test population too small");
        chosen.push(t);
    }
    let tickets: [Ticket; 3] = chosen.try_into().unwrap();
    let block = assemble_block(tree, &parent_id, tickets, params, ScoreMode::Normal).unwrap();
    let id = block.block_id;
    tree.insert(block).unwrap();
    id
}

fn chain_of(n: usize, accts: &[Account], params: &ProtocolParams) -> (BlockTree, Vec<Digest32>) {
    let mut tree = BlockTree::new(b"protocol-tests");
    let mut ids = tree.genesis_ids().to_vec();
    for _ in 0..n {
        let id = extend(&mut tree, *ids.last().unwrap(), accts, params);
        ids.push(id);
    }
    (tree, ids)
}

#[test]
fn generate_ticket_targets_and_signs() {
    let params = ProtocolParams::new(255, 10);
    let tree = BlockTree::new(b"g");
    let tip = tree.get(tree.genesis_tip()).unwrap();
    let accts = accounts(50, 1 << 20);
    let (acct, t) = accts
        .iter()
        .find_map(|a| generate_ticket(a, tip, TicketType::One, &params, ScoreMode::Normal).map(|t| (a, t)))
        .unwrap();
    assert_eq!(t.target_height, tip.height + 3);
    assert_eq!(t.source_seed, tip.seed);
    assert_eq!(t.public_key, acct.public_key());
    assert!(t.verify_signature());
    assert_eq!(t.score, f64::from(t.lottery_byte) * 20.0);

    let t3 = generate_ticket(acct, tip, TicketType::Three, &params, ScoreMode::Normal);
    if let Some(t3) = t3 {
        assert_eq!(t3.target_height, tip.height + 1);
    }
}

#[test]
fn generate_ticket_none_for_zero_byte() {
    let params = ProtocolParams::new(255, 10);
    let tree = BlockTree::new(b"g");
    let tip = tree.get(tree.genesis_tip()).unwrap();
    let accts = accounts(2000, 1 << 20);
    let zero = accts
        .iter()
        .find(|a| derive_ticket_bytes(&tip.seed, &a.public_key())[0] == 0)
        .expect("some key draws a zero byte");
    assert!(generate_ticket(zero, tip, TicketType::One, &params, ScoreMode::Normal).is_none());
    assert!(generate_ticket(zero, tip, TicketType::One, &params, ScoreMode::Fallback).is_none());
}

#[test]
fn eligibility_window() {
    let params = ProtocolParams::new(255, 10);
    let accts = accounts(40, 1 << 20);
    let (tree, ids) = chain_of(15, &accts, &params);
    let tip = *ids.last().unwrap();
    let target = tree.get(&tip).unwrap().height + 1;
    let window = tree.suffix(&tip, params.exclusion_window - 1);
    assert_eq!(window.len(), 9);
    assert_eq!(window.last().unwrap().height, target - 9);

    // Included at h-9: the ten blocks h-9..h would hold it twice.
    let pk = tree.ancestor_at(&tip, target - 9).unwrap().tickets[0].public_key;
    assert!(!is_eligible(&pk, window.iter().copied()));
    // Included at h-1.
    let pk = tree.get(&tip).unwrap().tickets[2].public_key;
    assert!(!is_eligible(&pk, window.iter().copied()));
    // Included at h-10 only: free again at h.
    let old = tree.ancestor_at(&tip, target - 10).unwrap().tickets[1].public_key;
    let reappears = window.iter().any(|b| b.ticket_keys().any(|k| *k == old));
    assert_eq!(is_eligible(&old, window.iter().copied()), !reappears);

    let stranger = keypair_from_index(&[1; 32], 0).public_key();
    assert!(is_eligible(&stranger, window.iter().copied()));
    assert!(is_eligible(&stranger, std::iter::empty()));
}

#[test]
fn roundtrip_chain_validates() {
    let params = ProtocolParams::new(64, 5);
    let accts = accounts(60, 1 << 30);
    let ledger: Ledger = accts.iter().collect();
    let (tree, ids) = chain_of(25, &accts, &params);
    for id in &ids[3..] {
        let b = tree.get(id).unwrap();
        assert_eq!(validate_block(b, &tree, &params, &ledger), Ok(()));
        assert_eq!(b.block_score, b.tickets.iter().map(|t| t.score).sum::<f64>());
    }
    assert_eq!(tree.chain_score(ids.last().unwrap()), Some(tree.recompute_chain_score(ids.last().unwrap())));
}

fn find_violation(res: Result<(), Vec<Violation>>, v: Violation) -> bool {
    res.err().is_some_and(|vs| vs.contains(&v))
}

#[test]
fn validate_detects_inflated_score() {
    let params = ProtocolParams::new(64, 5);
    let accts = accounts(60, 1 << 30);
    let ledger: Ledger = accts.iter().collect();
    let (tree, ids) = chain_of(6, &accts, &params);
    let mut b = tree.get(ids.last().unwrap()).unwrap().clone();
    b.block_score += 1.0;
    b.block_id = b.compute_id();
    assert!(find_violation(validate_block(&b, &tree, &params, &ledger), Violation::BadScore));
}

#[test]
fn validate_detects_ineligible_key() {
    let params = ProtocolParams::new(255, 10);
    let accts = accounts(60, 1 << 30);
    let ledger: Ledger = accts.iter().collect();
    let (mut tree, ids) = chain_of(6, &accts, &params);
    let parent_id = *ids.last().unwrap();
    let parent = tree.get(&parent_id).unwrap().clone();
    let h = parent.height + 1;
    // A key that signed a ticket three blocks earlier.
    let old_key = tree.ancestor_at(&parent_id, h - 3).unwrap().tickets[1].public_key;
    let reused = accts.iter().find(|a| a.public_key() == old_key).unwrap();
    let src2 = tree.ancestor_at(&parent_id, h - 2).unwrap().clone();
    let Some(t2) = generate_ticket(reused, &src2, TicketType::Two, &params, ScoreMode::Normal) else {
        return;
    };
    let mut tickets = Vec::new();
    for ty in [TicketType::One, TicketType::Three] {
        let src = tree.ancestor_at(&parent_id, h - ty.seed_offset()).unwrap().clone();
        let window: Vec<_> = tree.suffix(&parent_id, 9).iter().flat_map(|b| b.ticket_keys().copied()).collect();
        let t = accts
            .iter()
            .filter(|a| !window.contains(&a.public_key()) && a.public_key() != old_key)
            .filter(|a| tickets.iter().all(|t: &Ticket| t.public_key != a.public_key()))
            .find_map(|a| generate_ticket(a, &src, ty, &params, ScoreMode::Normal))
            .unwrap();
        tickets.push(t);
    }
    tickets.insert(1, t2);
    let arr: [Ticket; 3] = tickets.clone().try_into().unwrap();
    let err = assemble_block(&tree, &parent_id, arr, &params, ScoreMode::Normal).unwrap_err();
    assert!(err.0.contains(&Violation::IneligibleKey));

    // Bypass assembly and check the validator catches it too.
    let k: Vec<_> = tickets.iter().map(|t| t.public_key).collect();
    let mut b = Block {
        height: h,
        parent_id,
        seed: compute_block_seed(&parent.seed, &k[0], &k[1], &k[2]),
        block_score: tickets.iter().map(|t| t.score).sum(),
        tickets,
        block_id: Digest32::ZERO,
        fallback: false,
    };
    b.block_id = b.compute_id();
    let res = validate_block(&b, &tree, &params, &ledger);
    assert_eq!(res, Err(vec![Violation::IneligibleKey]));
    tree.insert(b).unwrap();
}

fn manual_ticket(acct: &Account, ty: TicketType, target: u64, seed: Digest32, score: f64) -> Ticket {
    let pk = acct.public_key();
    Ticket {
        ticket_type: ty,
        target_height: target,
        source_seed: seed,
        public_key: pk,
        lottery_byte: derive_ticket_bytes(&seed, &pk)[ty.byte_index()],
        score,
        signature: acct.key.sign(&ticket_signed_bytes(ty, target, &seed, &pk)),
    }
}

#[test]
fn assemble_sums_scores_and_checks_preconditions() {
    let params = ProtocolParams::new(16, 10);
    let tree = BlockTree::new(b"assemble");
    let g = tree.genesis_ids().map(|id| tree.get(&id).unwrap().seed);
    let parent_id = *tree.genesis_tip();
    let accts = accounts(4, 1 << 20);
    let t1 = manual_ticket(&accts[0], TicketType::One, 3, g[0], 320.0);
    let t2 = manual_ticket(&accts[1], TicketType::Two, 3, g[1], 160.0);
    let t3 = manual_ticket(&accts[2], TicketType::Three, 3, g[2], 80.0);
    let block =
        assemble_block(&tree, &parent_id, [t1.clone(), t2.clone(), t3.clone()], &params, ScoreMode::Normal).unwrap();
    assert_eq!(block.block_score, 560.0);
    assert_eq!(block.height, 3);
    assert_eq!(block.signer(), Some(&accts[0].public_key()));
    assert_eq!(
        block.seed,
        compute_block_seed(&g[2], &accts[0].public_key(), &accts[1].public_key(), &accts[2].public_key())
    );

    let wrong_seed = manual_ticket(&accts[1], TicketType::Two, 3, g[0], 160.0);
    let err = assemble_block(&tree, &parent_id, [t1.clone(), wrong_seed, t3.clone()], &params, ScoreMode::Normal)
        .unwrap_err();
    assert_eq!(err.0, vec![Violation::BadSeedChain]);

    let dup = manual_ticket(&accts[0], TicketType::Two, 3, g[1], 160.0);
    let err = assemble_block(&tree, &parent_id, [t1.clone(), dup, t3.clone()], &params, ScoreMode::Normal).unwrap_err();
    assert_eq!(err.0, vec![Violation::DuplicateKey]);

    let zero = manual_ticket(&accts[3], TicketType::Three, 3, g[2], 0.0);
    let err =
        assemble_block(&tree, &parent_id, [t1.clone(), t2.clone(), zero], &params, ScoreMode::Normal).unwrap_err();
    assert_eq!(err.0, vec![Violation::BadScore]);

    let swapped = assemble_block(&tree, &parent_id, [t2, t1, t3], &params, ScoreMode::Normal).unwrap_err();
    assert!(swapped.0.contains(&Violation::BadTicketTypes));
}

fn scored_block(tree: &BlockTree, parent_id: Digest32, score: f64, tag: u8) -> Block {
    let parent = tree.get(&parent_id).unwrap();
    let mut b = Block {
        height: parent.height + 1,
        parent_id,
        tickets: Vec::new(),
        seed: digest(&[tag]),
        block_id: Digest32::ZERO,
        block_score: score,
        fallback: false,
    };
    b.block_id = b.compute_id();
    b
}

#[test]
fn chain_score_and_fork_choice() {
    let mut tree = BlockTree::new(b"fc");
    let mut tip = *tree.genesis_tip();
    for (i, s) in [10.0, 20.0, 30.0].into_iter().enumerate() {
        let b = scored_block(&tree, tip, s, i as u8);
        tip = b.block_id;
        tree.insert(b).unwrap();
    }
    assert_eq!(tree.chain_score(&tip), Some(60.0));
    assert_eq!(tree.fork_choice(None), tip);

    let fork = *tree.genesis_tip();
    let a = scored_block(&tree, fork, 100.0, 10);
    let b = scored_block(&tree, fork, 99.9, 11);
    let (ida, idb) = (a.block_id, b.block_id);
    tree.insert(a).unwrap();
    tree.insert(b).unwrap();
    assert_eq!(tree.fork_choice(None), ida);
    assert_eq!(tree.fork_choice(Some(&idb)), ida);
}

#[test]
fn fork_choice_tie_keeps_incumbent() {
    let mut tree = BlockTree::new(b"tie");
    let fork = *tree.genesis_tip();
    let a = scored_block(&tree, fork, 50.0, 1);
    let b = scored_block(&tree, fork, 50.0, 2);
    let (ida, idb) = (a.block_id, b.block_id);
    tree.insert(a).unwrap();
    tree.insert(b).unwrap();
    assert_eq!(tree.fork_choice(Some(&ida)), ida);
    assert_eq!(tree.fork_choice(Some(&idb)), idb);
    assert_eq!(tree.fork_choice(None), ida.min(idb));
}

#[test]
fn tree_rejects_orphans_and_bad_heights() {
    let mut tree = BlockTree::new(b"t");
    let mut orphan = scored_block(&tree, *tree.genesis_tip(), 1.0, 0);
    orphan.parent_id = digest(b"nowhere");
    orphan.block_id = orphan.compute_id();
    assert!(matches!(tree.insert(orphan), Err(TreeError::UnknownParent(_))));
    let mut tall = scored_block(&tree, *tree.genesis_tip(), 1.0, 0);
    tall.height += 1;
    tall.block_id = tall.compute_id();
    assert!(matches!(tree.insert(tall), Err(TreeError::BadHeight { .. })));
    let mut forged = scored_block(&tree, *tree.genesis_tip(), 1.0, 0);
    forged.block_id = digest(b"x");
    assert_eq!(tree.insert(forged), Err(TreeError::BadBlockId));
}

#[test]
fn fallback_block_validates_with_fallback_scores() {
    let params = ProtocolParams::new(1, 10);
    let accts = accounts(30, 1000);
    let ledger: Ledger = accts.iter().collect();
    let tree = BlockTree::new(b"fb");
    let parent_id = *tree.genesis_tip();
    let mut tickets = Vec::new();
    for ty in TicketType::ALL {
        let src = tree.ancestor_at(&parent_id, 3 - ty.seed_offset()).unwrap().clone();
        let t = accts
            .iter()
            .filter(|a| tickets.iter().all(|t: &Ticket| t.public_key != a.public_key()))
            .find_map(|a| generate_ticket(a, &src, ty, &params, ScoreMode::Fallback))
            .unwrap();
        assert_eq!(t.score, f64::from(t.lottery_byte));
        tickets.push(t);
    }
    let arr: [Ticket; 3] = tickets.try_into().unwrap();
    let block = assemble_block(&tree, &parent_id, arr, &params, ScoreMode::Fallback).unwrap();
    assert!(block.fallback);
    assert_eq!(validate_block(&block, &tree, &params, &ledger), Ok(()));
    let mut flipped = block.clone();
    flipped.fallback = false;
    assert!(validate_block(&flipped, &tree, &params, &ledger).is_err());
}
