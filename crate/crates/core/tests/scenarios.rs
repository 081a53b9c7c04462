//! Bundled scenario smoke runs: every shipped scenario must run to the end
//! of its horizon with the expected session outcomes.

use mpcvm_core::audit;
use mpcvm_core::netsim::party_address;
use mpcvm_core::report::Report;
use mpcvm_core::scenario::{bundled_scenario, bundled_scenarios};
use mpcvm_core::{fixtures, Address};

#[test]
fn all_bundled_scenarios_parse_and_validate() {
    for (name, text) in bundled_scenarios() {
        let scenario = mpcvm_core::scenario::Scenario::parse(text)
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        scenario.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn voting_10_elects_the_weighted_winner() {
    let scenario = bundled_scenario("voting_10").unwrap();
    let sim = scenario.run().unwrap();
    assert_eq!(sim.sessions.len(), 1);
    let outcome = &sim.sessions[0];
    // weights: deposits >= 5 count, others zero
    // proposal 0: 12 + 21 + 17 + 11 = 61 (parties 0, 3, 6, 9; party 5 has
    // no deposit)
    // proposal 1: 9 + 5 + 8 = 22 (parties 2, 4, 7; party 1 and 8 below
    // minimum or zero ballots)
    let expected = scenario.plain_expectation(0, &outcome.public_inputs).unwrap();
    assert_eq!(outcome.result[..1], expected[..]);
    assert_eq!(outcome.result[1..], [0, 0], "clean run");
    let report = Report::build(&scenario, &sim);
    assert!(report.sessions_pass, "{report:?}");
    assert_eq!(report.lock_violations, 0);
    // winner id lands in the contract
    let vote = sim.contract("vote").unwrap();
    assert_eq!(sim.ledger.storage(vote, 5), expected[0]);
    assert_eq!(sim.ledger.storage(vote, 6), 1, "succeeded flag");
    let audit = audit::serializability_audit(&sim).unwrap();
    assert!(audit.matches);
}

#[test]
fn auction_10_finds_the_highest_eligible_bid() {
    let scenario = bundled_scenario("auction_10").unwrap();
    let sim = scenario.run().unwrap();
    assert_eq!(sim.sessions.len(), 1, "auction session should settle in the horizon");
    let outcome = &sim.sessions[0];
    assert_eq!(outcome.result, vec![120, 3, 0, 0], "bid 120 at index 3 wins");
    let auction = sim.contract("auction").unwrap();
    assert_eq!(sim.ledger.storage(auction, 5), 120);
    assert_eq!(sim.ledger.storage(auction, 6), 3);
    assert_eq!(sim.ledger.storage(auction, 7), 1, "succeeded");
    // winner paid from its deposit
    let dep_key = fixtures::mapping_key(party_address(3));
    assert_eq!(sim.ledger.storage(auction, dep_key), 200 - 120);
}

#[test]
fn lock_matrix_reproduces_the_four_verdicts() {
    let scenario = bundled_scenario("lock_matrix").unwrap();
    let sim = scenario.run().unwrap();
    let c1 = sim.contract("c1").unwrap();
    let c2 = sim.contract("c2").unwrap();
    let c3 = sim.contract("c3").unwrap();
    let calls: Vec<_> = sim
        .committed
        .iter()
        .filter(|c| {
            matches!(&c.tx.kind, mpcvm_core::ledger::TxKind::Regular { target, method, .. }
                if (*target == c1 && method == "callMpc") || *target == c3)
        })
        .collect();
    let statuses: Vec<(u64, mpcvm_core::ledger::TxStatus)> =
        calls.iter().map(|c| (c.height, c.status)).collect();
    eprintln!("call statuses: {statuses:?}");
    use mpcvm_core::ledger::TxStatus::*;
    // block 4: callMpc(false, true) suspends
    assert_eq!(calls[0].status, Suspended);
    // blocks 6/7: pokes at the locked contract revert, x3 unchanged
    assert_eq!(calls[1].status, Reverted);
    assert_eq!(calls[2].status, Reverted);
    assert_eq!(sim.ledger.storage(c3, 0), 0, "x3 untouched");
    // block 8: second invocation while locked reverts
    assert_eq!(calls[3].status, Reverted);
    // blocks 30/31: befMPC writes to c2 first and reverts before suspension
    assert_eq!(calls[4].status, Reverted);
    assert_eq!(calls[5].status, Reverted);
    assert_eq!(sim.ledger.storage(c2, 0), 0, "x2 never written");
    // block 33: clean invocation suspends and completes: x1 == 2
    assert_eq!(calls[6].status, Suspended);
    assert_eq!(sim.ledger.storage(c1, 0), 2, "clean run completed");
    // the aftMPC run resumed and reverted at the outward call: two sessions
    // total, both settled
    assert_eq!(sim.sessions.len(), 2);
    assert!(sim.ledger.locks.is_empty());
    assert_eq!(sim.ledger.violations.len(), 0);
}

#[test]
fn malicious_dealer_is_caught_and_flagged() {
    let scenario = bundled_scenario("malicious_dealer").unwrap();
    let sim = scenario.run().unwrap();
    assert_eq!(sim.sessions.len(), 1);
    // [dummy winner, flag = 1, index = 2]
    assert_eq!(sim.sessions[0].result, vec![0, 1, 2]);
    let vote = sim.contract("vote").unwrap();
    assert_eq!(sim.ledger.storage(vote, 9), party_address(2).0, "cheater recorded");
    assert_eq!(sim.ledger.storage(vote, 6), 0, "vote did not succeed");
    // the cheater's stake moved to the other voters
    let dep_key = fixtures::mapping_key(party_address(2));
    assert_eq!(sim.ledger.storage(vote, dep_key), 0, "stake slashed");
    // each of the nine others deposited 10 and received 10/10 = 1 of the
    // slashed stake; the remainder of 1 lands in the organizer pot
    let others: u64 = (0..10)
        .filter(|i| *i != 2)
        .map(|i| sim.ledger.storage(vote, fixtures::mapping_key(party_address(i))))
        .sum();
    assert_eq!(others, 9 * 10 + 9, "stake redistributed");
    assert_eq!(sim.ledger.storage(vote, 7), 1, "remainder in the organizer pot");
    let _ = Address(0);
}
