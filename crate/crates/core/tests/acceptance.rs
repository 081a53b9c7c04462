//! Acceptance suite: one test per shipped guarantee, each printing a
//! PASS line with the measured evidence. Run with `--nocapture` to see the
//! lines; the suite doubles as the selftest behind the CLI.

use std::collections::BTreeMap;
use std::time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mpcvm_core::audit;
use mpcvm_core::circuit;
use mpcvm_core::commit::CommitmentParams;
use mpcvm_core::engine::{ActivationPoint, FaultBehavior};
use mpcvm_core::field::{lagrange_interpolate, Field, FieldElement};
use mpcvm_core::fixtures::mapping_key;
use mpcvm_core::ledger::{TxKind, TxStatus};
use mpcvm_core::netsim::party_address;
use mpcvm_core::report::{throughput_comparison, Report};
use mpcvm_core::scenario::{bundled_scenario, CallSpec, FaultSection, Scenario, SecretInput};
use mpcvm_core::sss;
use mpcvm_core::txmgr::QueueEvent;
use mpcvm_core::TxHash;

fn pass(criterion: &str, evidence: String) {
    println!("criterion {criterion}: PASS — {evidence}");
}

// ---------------------------------------------------------------------
// 1. lock matrix
// ---------------------------------------------------------------------

#[test]
fn criterion_01_lock_matrix() {
    let started = Instant::now();
    let scenario = bundled_scenario("lock_matrix").unwrap();
    let sim = scenario.run().unwrap();
    let c1 = sim.contract("c1").unwrap();
    let c2 = sim.contract("c2").unwrap();
    let c3 = sim.contract("c3").unwrap();
    let calls: Vec<(u64, TxStatus)> = sim
        .committed
        .iter()
        .filter(|c| {
            matches!(&c.tx.kind, TxKind::Regular { target, method, .. }
                if (*target == c1 && method == "callMpc") || *target == c3)
        })
        .map(|c| (c.height, c.status))
        .collect();
    use TxStatus::*;
    // aftMPC=true: suspends, then reverts during resumption
    assert_eq!(calls[0].1, Suspended);
    // concurrent pokes at the locked contract revert with state unchanged
    assert_eq!(calls[1].1, Reverted);
    assert_eq!(calls[2].1, Reverted);
    assert_eq!(sim.ledger.storage(c3, 0), 0, "x3 unchanged");
    // invoking the locked contract again always fails
    assert_eq!(calls[3].1, Reverted);
    // befMPC=true (both parameter combinations): revert before suspension
    assert_eq!(calls[4].1, Reverted);
    assert_eq!(calls[5].1, Reverted);
    assert_eq!(sim.ledger.storage(c2, 0), 0, "x2 never written");
    // both false: success end to end
    assert_eq!(calls[6].1, Suspended);
    assert_eq!(sim.ledger.storage(c1, 0), 2, "clean run completed with x1 = 2");
    // the aftMPC resumption reverted: two settled sessions, no locks left
    assert_eq!(sim.sessions.len(), 2);
    assert!(sim.ledger.locks.is_empty());
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 5, "must run in under five seconds, took {elapsed:?}");
    // determinism
    let again = scenario.run().unwrap();
    assert_eq!(again.final_hash, sim.final_hash);
    pass("1 (lock matrix)", format!("four verdicts reproduced in {elapsed:?}"));
}

// ---------------------------------------------------------------------
// 2. voting end to end against the weighted-tally oracle
// ---------------------------------------------------------------------

fn voting_scenario(seed: u64, deposits: &[u64], ballots: &[[u64; 2]], run_blocks: u64) -> Scenario {
    let mut scenario = bundled_scenario("voting_10").unwrap();
    scenario.name = format!("voting_rand_{seed}");
    scenario.seed = seed;
    scenario.chain.run_blocks = run_blocks;
    scenario.secret_inputs = ballots
        .iter()
        .enumerate()
        .map(|(party, b)| SecretInput { party, values: b.to_vec() })
        .collect();
    scenario.calls.retain(|c| c.method != "deposit");
    for (party, amount) in deposits.iter().enumerate() {
        if *amount > 0 {
            scenario.calls.insert(
                0,
                CallSpec {
                    at_block: 2,
                    repeat_every: 0,
                    until_block: 0,
                    sender: format!("party:{party}"),
                    contract: "vote".into(),
                    method: "deposit".into(),
                    args: vec![],
                    value: *amount,
                },
            );
        }
    }
    scenario
}

/// Independent weighted-tally oracle, straight from the definitions.
fn voting_oracle(min_deposit: u64, deposits: &[u64], ballots: &[[u64; 2]]) -> u64 {
    let weight = |i: usize| if deposits[i] >= min_deposit { deposits[i] } else { 0 };
    let tally = |j: usize| -> u64 { (0..deposits.len()).map(|i| weight(i) * ballots[i][j]).sum() };
    if tally(0) >= tally(1) {
        0
    } else {
        1
    }
}

#[test]
fn criterion_02_voting_end_to_end() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0002);
    let runs = 20;
    for round in 0..runs {
        let deposits: Vec<u64> = (0..10).map(|_| rng.next_u64() % 21).collect();
        let ballots: Vec<[u64; 2]> =
            (0..10).map(|_| [rng.next_u64() % 2, rng.next_u64() % 2]).collect();
        let zero_weight = deposits.iter().filter(|d| **d < 5).count();
        assert!(zero_weight > 0 || round > 0, "mix must include zero-weight voters");
        let scenario = voting_scenario(1000 + round, &deposits, &ballots, 150);
        let mut sim = scenario.build().unwrap();
        sim.run_until(|s| !s.sessions.is_empty()).unwrap();
        assert_eq!(sim.sessions.len(), 1, "round {round}: session must settle");
        let result = &sim.sessions[0].result;
        let expected = voting_oracle(5, &deposits, &ballots);
        assert_eq!(
            result[..],
            [expected, 0, 0],
            "round {round}: deposits {deposits:?} ballots {ballots:?}"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "criterion demands under 60 s, took {elapsed:?}");
    pass("2 (voting end-to-end)", format!("{runs} randomized elections matched in {elapsed:?}"));
}

// ---------------------------------------------------------------------
// 3. auction end to end against the tournament oracle
// ---------------------------------------------------------------------

fn auction_scenario(seed: u64, deposits: &[u64], bids: &[u64]) -> Scenario {
    let mut scenario = bundled_scenario("auction_10").unwrap();
    scenario.name = format!("auction_rand_{seed}");
    scenario.seed = seed;
    scenario.secret_inputs = bids
        .iter()
        .enumerate()
        .map(|(party, b)| SecretInput { party, values: vec![*b] })
        .collect();
    scenario.calls.retain(|c| c.method != "deposit");
    for (party, amount) in deposits.iter().enumerate() {
        if *amount > 0 {
            scenario.calls.insert(
                0,
                CallSpec {
                    at_block: 2,
                    repeat_every: 0,
                    until_block: 0,
                    sender: format!("party:{party}"),
                    contract: "auction".into(),
                    method: "deposit".into(),
                    args: vec![],
                    value: *amount,
                },
            );
        }
    }
    scenario
}

/// Independent tournament oracle with the first-argument tie rule, wired
/// exactly like the ten-bidder bracket: five leaves, then (0,1), (2,3),
/// (4, previous), final.
fn auction_oracle(min_deposit: u64, deposits: &[u64], bids: &[u64]) -> (u64, u64) {
    let val =
        |i: usize| -> u64 { if deposits[i] >= min_deposit { bids[i] } else { 0 } };
    let ge = |a: (u64, u64), b: (u64, u64)| if a.0 >= b.0 { a } else { b };
    let c: Vec<(u64, u64)> =
        (0..5).map(|j| ge((val(2 * j), 2 * j as u64), (val(2 * j + 1), 2 * j as u64 + 1))).collect();
    let c5 = ge(c[0], c[1]);
    let c6 = ge(c[2], c[3]);
    let c7 = ge(c[4], c5);
    ge(c6, c7)
}

#[test]
fn criterion_03_auction_end_to_end() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0003);
    let runs = 20;
    for round in 0..runs {
        let mut deposits: Vec<u64> = vec![255; 10];
        // a couple of bidders miss the minimum
        deposits[(rng.next_u64() % 10) as usize] = 3;
        deposits[(rng.next_u64() % 10) as usize] = 0;
        let mut bids: Vec<u64> = (0..10).map(|_| rng.next_u64() % 251).collect();
        if round == 7 {
            // forced tie between two eligible maxima
            bids = vec![10, 200, 30, 200, 5, 6, 7, 8, 9, 11];
            deposits = vec![255; 10];
        }
        let scenario = auction_scenario(2000 + round, &deposits, &bids);
        let mut sim = scenario.build().unwrap();
        sim.run_until(|s| !s.sessions.is_empty()).unwrap();
        assert_eq!(sim.sessions.len(), 1, "round {round}: session must settle");
        let result = &sim.sessions[0].result;
        let (max_bid, winner) = auction_oracle(10, &deposits, &bids);
        assert_eq!(
            result[..],
            [max_bid, winner, 0, 0],
            "round {round}: deposits {deposits:?} bids {bids:?}"
        );
    }
    // over-bid-versus-deposit: the highest bidder cannot cover its bid, so
    // resumption takes the cheater branch
    let mut deposits = vec![255u64; 10];
    deposits[6] = 100;
    let mut bids = vec![10u64; 10];
    bids[6] = 240;
    let scenario = auction_scenario(2999, &deposits, &bids);
    let mut sim = scenario.build().unwrap();
    sim.run_until(|s| !s.sessions.is_empty()).unwrap();
    assert_eq!(sim.sessions[0].result[..], [240, 6, 0, 0]);
    let auction = sim.contract("auction").unwrap();
    assert_eq!(sim.ledger.storage(auction, 9), party_address(6).0, "cheater recorded");
    assert_eq!(sim.ledger.storage(auction, 7), 0, "auction not successful");
    assert_eq!(sim.ledger.storage(auction, mapping_key(party_address(6))), 0, "stake slashed");
    let elapsed = started.elapsed();
    pass(
        "3 (auction end-to-end)",
        format!("{runs} randomized auctions plus the over-bid cheater branch in {elapsed:?}"),
    );
}

// ---------------------------------------------------------------------
// 4. malicious dealer
// ---------------------------------------------------------------------

#[test]
fn criterion_04_malicious_dealer() {
    let scenario = bundled_scenario("malicious_dealer").unwrap();
    let sim = scenario.run().unwrap();
    assert_eq!(sim.sessions.len(), 1);
    // [dummy output, flag = 1, faulty index]
    assert_eq!(sim.sessions[0].result, vec![0, 1, 2]);
    let vote = sim.contract("vote").unwrap();
    assert_eq!(sim.ledger.storage(vote, 9), party_address(2).0);
    assert_eq!(sim.ledger.storage(vote, 6), 0, "election not successful");
    // termination came from the accusation quorum: at least t+1 = 4
    // distinct accusation transactions against party 2 are on chain
    let accusers: std::collections::BTreeSet<_> = sim
        .committed
        .iter()
        .filter(|c| {
            matches!(&c.tx.kind, TxKind::MpcMessage { msg, .. }
                if matches!(msg, mpcvm_core::engine::MpcBroadcast::Accuse { party: 2 }))
        })
        .map(|c| c.tx.sender)
        .collect();
    assert!(accusers.len() >= 4, "only {} accusers", accusers.len());
    pass("4 (malicious dealer)", format!("flagged party 2 after {} accusations", accusers.len()));
}

// ---------------------------------------------------------------------
// 5. robustness: every single-party fault profile at n = 4, t = 1
// ---------------------------------------------------------------------

fn compare_fault_scenario(seed: u64, fault: Option<FaultSection>) -> Scenario {
    let text = r#"
name = "fault_matrix"
seed = 0

[parties]
n = 4
t = 1

[field]
bit_width = 4

[chain]
run_blocks = 120
dispute_window = 2

[[circuits]]
builder = "compare"

[[contracts]]
handle = "c2"
fixture = "lock_c2"
deploy_at = 1

[[contracts]]
handle = "runner"
fixture = "lock_c1"
deploy_at = 2
args = ["@contract:c2", "0"]

[[secret_inputs]]
party = 0
values = [5]
[[secret_inputs]]
party = 1
values = [9]

[[calls]]
at_block = 4
sender = "organizer"
contract = "runner"
method = "callMpc"
args = ["0", "0"]
"#;
    let mut scenario = Scenario::parse(text).unwrap();
    scenario.seed = seed;
    scenario.faults = fault.into_iter().collect();
    scenario
}

#[test]
fn criterion_05_fault_matrix() {
    use ActivationPoint::*;
    use FaultBehavior::*;
    let profiles: Vec<(FaultBehavior, ActivationPoint)> = vec![
        (InconsistentDealing, InputDealing),
        (InconsistentDealing, RandContribution),
        (InconsistentDealing, SubDealing),
        (CorruptOpening, SquareOpening),
        (CorruptOpening, MaskedOpening),
        (CorruptOpening, OutputOpening),
        (ForgeAttestation, Attestation),
        (Silent, SessionStart),
        (Silent, InputDealing),
        (Silent, RandContribution),
        (Silent, SubDealing),
        (Silent, SquareOpening),
        (Silent, MaskedOpening),
        (Silent, OutputOpening),
        (Silent, Attestation),
    ];
    let started = Instant::now();
    let mut honest_outcomes = 0;
    let mut flagged_outcomes = 0;
    for (i, (behavior, activation)) in profiles.iter().enumerate() {
        let party = i % 4;
        let fault = FaultSection { party, behavior: *behavior, activation: *activation };
        let scenario = compare_fault_scenario(5000 + i as u64, Some(fault));
        let mut sim = scenario.build().unwrap();
        sim.run_until(|s| !s.sessions.is_empty()).unwrap();
        assert!(
            !sim.sessions.is_empty(),
            "profile {behavior:?}@{activation:?} on party {party}: session never settled"
        );
        let result = &sim.sessions[0].result;
        let flag = result[result.len() - 2];
        if flag == 0 {
            // honest result reached quorum despite the fault
            assert_eq!(
                result[..],
                [9, 1, 0, 0],
                "profile {behavior:?}@{activation:?}: wrong output with a clean flag"
            );
            honest_outcomes += 1;
        } else {
            let named = result[result.len() - 1] as usize;
            assert_eq!(
                named, party,
                "profile {behavior:?}@{activation:?}: flagged an innocent party"
            );
            flagged_outcomes += 1;
        }
    }
    // honest control run
    let mut sim = compare_fault_scenario(5999, None).build().unwrap();
    sim.run_until(|s| !s.sessions.is_empty()).unwrap();
    assert_eq!(sim.sessions[0].result, vec![9, 1, 0, 0]);
    pass(
        "5 (fault matrix)",
        format!(
            "{} profiles: {honest_outcomes} finished honestly, {flagged_outcomes} flagged the culprit, 0 wrong outputs ({:?})",
            profiles.len(),
            started.elapsed()
        ),
    );
}

// ---------------------------------------------------------------------
// 6. cryptographic identities, 10 000 randomized checks each
// ---------------------------------------------------------------------

#[test]
fn criterion_06_cryptographic_identities() {
    let field = Field::default();
    let params = CommitmentParams::derive(&field).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0006);
    let iterations = 10_000;
    let started = Instant::now();
    for i in 0..iterations {
        let t = (i % 3) + 1;
        let n = 3 * t + 1;
        // (a) any two (t+1)-subsets of a dealing reconstruct the secret
        let secret = field.random(&mut rng);
        let dealing = sss::deal(&field, &params, secret, t, n, &mut rng).unwrap();
        let a = sss::reconstruct(&field, &params, &dealing.shares[..t + 1], &dealing.commitments, t)
            .unwrap();
        let b = sss::reconstruct(
            &field,
            &params,
            &dealing.shares[n - (t + 1)..],
            &dealing.commitments,
            t,
        )
        .unwrap();
        assert_eq!(a, secret);
        assert_eq!(b, secret);
        // (b) combine(commit(m1,r1), commit(m2,r2)) = commit(m1+m2, r1+r2)
        let (m1, r1) = (field.random(&mut rng), field.random(&mut rng));
        let (m2, r2) = (field.random(&mut rng), field.random(&mut rng));
        assert_eq!(
            params.combine(params.commit(m1, r1), params.commit(m2, r2)),
            params.commit(field.add(m1, m2), field.add(r1, r2))
        );
        // (c) interpolating the share commitments at zero commits to the
        // secret and the dealer randomness
        let points: Vec<(FieldElement, _)> = dealing
            .commitments
            .iter()
            .enumerate()
            .take(t + 1)
            .map(|(j, c)| (field.elem(j as u64 + 1), *c))
            .collect();
        let at_zero = params.interpolate(&field, &points, FieldElement::ZERO).unwrap();
        let r0 = {
            let pts: Vec<(FieldElement, FieldElement)> = dealing
                .shares
                .iter()
                .take(t + 1)
                .map(|s| (field.elem(s.party_index as u64), s.randomness))
                .collect();
            lagrange_interpolate(&field, &pts, FieldElement::ZERO).unwrap()
        };
        assert_eq!(at_zero, params.commit(secret, r0));
        // (d) pointwise share products interpolate to the product
        let x = field.random(&mut rng);
        let y = field.random(&mut rng);
        let dx = sss::deal(&field, &params, x, t, n, &mut rng).unwrap();
        let dy = sss::deal(&field, &params, y, t, n, &mut rng).unwrap();
        let product_points: Vec<(FieldElement, FieldElement)> = dx
            .shares
            .iter()
            .zip(&dy.shares)
            .take(2 * t + 1)
            .map(|(sx, sy)| (field.elem(sx.party_index as u64), field.mul(sx.value, sy.value)))
            .collect();
        let product = lagrange_interpolate(&field, &product_points, FieldElement::ZERO).unwrap();
        assert_eq!(product, field.mul(x, y));
    }
    pass(
        "6 (cryptographic identities)",
        format!("4 × {iterations} randomized checks, zero failures ({:?})", started.elapsed()),
    );
}

// ---------------------------------------------------------------------
// 7. serializability audit
// ---------------------------------------------------------------------

#[test]
fn criterion_07_serializability() {
    for name in ["lock_matrix", "voting_10", "throughput_eth"] {
        let scenario = bundled_scenario(name).unwrap();
        let sim = scenario.run().unwrap();
        assert!(
            sim.ledger.violations.is_empty(),
            "{name}: locked contracts were touched: {:?}",
            sim.ledger.violations
        );
        let audit = audit::serializability_audit(&sim)
            .unwrap_or_else(|e| panic!("{name}: audit failed: {e}"));
        assert!(
            audit.matches,
            "{name}: serial replay diverged from the committed history"
        );
    }
    pass(
        "7 (serializability)",
        "three mixed scenarios: serial replay matches, zero locked-contract accesses".into(),
    );
}

// ---------------------------------------------------------------------
// 8. non-blocking throughput
// ---------------------------------------------------------------------

#[test]
fn criterion_08_throughput() {
    let baseline = bundled_scenario("throughput_eth_baseline").unwrap().run().unwrap();
    let mixed = bundled_scenario("throughput_eth").unwrap().run().unwrap();
    let sync = bundled_scenario("throughput_eth_sync").unwrap().run().unwrap();
    assert!(mixed.sessions.len() >= 2, "the loop must complete several sessions");
    let cmp = throughput_comparison(&baseline, &mixed);
    let cmp_sync = throughput_comparison(&baseline, &sync);
    assert!(
        cmp.degradation_bps < 500,
        "regular throughput dropped {} bps, the bound is 500",
        cmp.degradation_bps
    );
    assert!(cmp.regular_flow_uninterrupted, "a live session starved a block of regular commits");
    assert!(
        cmp_sync.degradation_bps >= 10 * cmp.degradation_bps.max(1),
        "synchronous contrast degraded {} bps, expected at least 10x the asynchronous {} bps",
        cmp_sync.degradation_bps,
        cmp.degradation_bps
    );
    // deterministic given the seed
    let mixed_again = bundled_scenario("throughput_eth").unwrap().run().unwrap();
    assert_eq!(mixed_again.final_hash, mixed.final_hash);
    assert_eq!(
        mixed_again.regular_commits_per_block_milli(),
        mixed.regular_commits_per_block_milli()
    );
    pass(
        "8 (throughput)",
        format!(
            "async degradation {} bps (< 500), sync contrast {} bps (≥ 10x)",
            cmp.degradation_bps, cmp_sync.degradation_bps
        ),
    );
}

// ---------------------------------------------------------------------
// 9. multiplication queue discipline
// ---------------------------------------------------------------------

#[test]
fn criterion_09_queue_discipline() {
    let scenario = bundled_scenario("queue_discipline").unwrap();
    let sim = scenario.run().unwrap();
    let queue_events: Vec<&QueueEvent> = sim
        .trace
        .iter()
        .filter_map(|ev| match ev {
            mpcvm_core::netsim::TraceEvent::Queue { event, .. } => Some(event),
            _ => None,
        })
        .collect();
    assert!(!queue_events.is_empty(), "no queue activity traced");
    let mut enqueued = Vec::new();
    let mut admitted = Vec::new();
    let mut retired = Vec::new();
    for ev in &queue_events {
        let running = match ev {
            QueueEvent::Enqueued { task, running, .. } => {
                enqueued.push(*task);
                *running
            }
            QueueEvent::Admitted { task, running, .. } => {
                admitted.push(*task);
                *running
            }
            QueueEvent::Retired { task, running, .. } => {
                retired.push(*task);
                *running
            }
            QueueEvent::Purged { running, .. } => *running,
        };
        assert!(running <= 2, "capacity bound violated: {running} running");
    }
    assert_eq!(enqueued.len(), 6, "all six multiplications enqueue");
    assert_eq!(admitted, enqueued, "admission must follow enqueue order (FIFO)");
    assert_eq!(retired.len(), 6);
    // enqueue fires exactly at the 2t+1-th readiness vote and retirement at
    // the 2t+1-th completion attestation
    let session = sim.sessions[0].session;
    let info = &sim.ledger.txmgr.sessions[&session];
    for task in &enqueued {
        assert!(info.gate_ready[task].len() >= 7, "enqueued below the 2t+1 readiness quorum");
        assert!(info.gate_done[task].len() >= 7, "retired below the 2t+1 completion quorum");
    }
    assert_eq!(sim.sessions[0].result[..6], [12, 30, 56, 90, 132, 182], "products correct");

    // early termination purges pending queue entries
    let mut purge_scenario = bundled_scenario("queue_discipline").unwrap();
    purge_scenario.name = "queue_purge".into();
    purge_scenario.chain.max_parallel_mults = 1;
    purge_scenario.faults = vec![FaultSection {
        party: 0,
        behavior: FaultBehavior::InconsistentDealing,
        activation: ActivationPoint::SubDealing,
    }];
    let sim2 = purge_scenario.run().unwrap();
    let purged = sim2
        .trace
        .iter()
        .filter_map(|ev| match ev {
            mpcvm_core::netsim::TraceEvent::Queue {
                event: QueueEvent::Purged { removed, .. },
                ..
            } => Some(*removed),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    assert!(purged >= 1, "early termination must purge pending tasks");
    let result = &sim2.sessions[0].result;
    assert_eq!(result[result.len() - 2..], [1, 0], "cheater flagged with index 0");
    pass(
        "9 (queue discipline)",
        format!("|running| ≤ 2 across {} events, FIFO admission, purge of {purged} on termination", queue_events.len()),
    );
}

// ---------------------------------------------------------------------
// 10. determinism and latency independence
// ---------------------------------------------------------------------

#[test]
fn criterion_10_determinism() {
    let scenario = bundled_scenario("voting_10").unwrap();
    let sim_a = scenario.run().unwrap();
    let sim_b = scenario.run().unwrap();
    let report_a = Report::build(&scenario, &sim_a).to_json();
    let report_b = Report::build(&scenario, &sim_b).to_json();
    assert_eq!(report_a, report_b, "same seed must give byte-identical reports");
    assert_eq!(sim_a.final_hash, sim_b.final_hash);
    assert_eq!(sim_a.trace_json_lines(), sim_b.trace_json_lines());

    // changing per-link latency permutes the trace but not the final state
    let mut traces = Vec::new();
    let mut hashes = Vec::new();
    for latency in [1u64, 4, 7] {
        let mut varied = bundled_scenario("lock_matrix").unwrap();
        varied.chain.latency = latency;
        let sim = varied.run().unwrap();
        traces.push(sim.trace_json_lines());
        hashes.push(sim.final_hash);
    }
    assert_eq!(hashes[0], hashes[1]);
    assert_eq!(hashes[1], hashes[2]);
    assert_ne!(traces[0], traces[1], "different latency must reshape the trace");
    assert_ne!(traces[1], traces[2]);
    pass(
        "10 (determinism)",
        "byte-identical replay; latency 1/4/7 reshapes traces but not the state hash".into(),
    );
}

// ---------------------------------------------------------------------
// engine-level invariant: degree discipline across parties
// ---------------------------------------------------------------------

#[test]
fn wire_sharings_interpolate_consistently() {
    let text = r#"
name = "degree_check"
seed = 31

[parties]
n = 10
t = 3

[field]
bit_width = 8

[chain]
run_blocks = 40
dispute_window = 1

[[circuits]]
builder = "mult"

[[contracts]]
handle = "c2"
fixture = "lock_c2"
deploy_at = 1

[[contracts]]
handle = "runner"
fixture = "lock_c1"
deploy_at = 2
args = ["@contract:c2", "0"]

[[secret_inputs]]
party = 0
values = [11]
[[secret_inputs]]
party = 1
values = [13]

[[calls]]
at_block = 4
sender = "organizer"
contract = "runner"
method = "callMpc"
args = ["0", "0"]
"#;
    let scenario = Scenario::parse(text).unwrap();
    let sim = scenario.run().unwrap();
    let session: TxHash = sim.sessions[0].session;
    let field = Field::default();
    // collect every wire from every party and interpolate several
    // (t+1)-subsets: all must agree, and commitment vectors must match
    let snapshots: Vec<_> = (0..10).map(|p| sim.snapshot(p, &session).unwrap()).collect();
    let mut checked = 0;
    let wires: Vec<_> = snapshots[0].wire_shares.keys().copied().collect();
    for wire in wires {
        let mut points = Vec::new();
        for snap in &snapshots {
            let Some(share) = snap.wire_shares.get(&wire) else {
                continue;
            };
            points.push((field.elem(share.party_index as u64), share.value));
            assert_eq!(
                snap.wire_commitments[&wire], snapshots[0].wire_commitments[&wire],
                "commitment vectors must agree across parties"
            );
        }
        if points.len() < 8 {
            continue;
        }
        let mut values = BTreeMap::new();
        for subset in [&points[0..4], &points[3..7], &points[6..10], &points[2..6]] {
            let v = lagrange_interpolate(&field, subset, FieldElement::ZERO).unwrap();
            values.insert(format!("{subset:?}"), v);
        }
        let first = values.values().next().unwrap();
        assert!(values.values().all(|v| v == first), "wire {wire:?} is not degree-t consistent");
        checked += 1;
    }
    assert!(checked >= 3, "expected the input and product wires, checked {checked}");
    // oracle equivalence at the engine level
    assert_eq!(sim.sessions[0].result, vec![11 * 13, 0, 0]);
    let _ = circuit::build_mult_circuit(10);
}
