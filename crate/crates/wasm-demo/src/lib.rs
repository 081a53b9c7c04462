//! Browser bindings: three interactive entry points over the simulator,
//! each taking and returning JSON strings so the page stays plain JS.
//!
//! The whole chain — contracts, suspension, committee protocol, resumption
//! — runs deterministically inside the page; a seed plus the inputs fully
//! determine every chart.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::wasm_bindgen;

use mpcvm_core::fixtures::mapping_key;
use mpcvm_core::netsim::party_address;
use mpcvm_core::report::throughput_comparison;
use mpcvm_core::scenario::{bundled_scenario, CallSpec, SecretInput};

#[derive(Deserialize)]
struct ElectionInput {
    seed: u64,
    min_deposit: u64,
    /// Ten deposits; anything below `min_deposit` votes with weight zero.
    deposits: Vec<u64>,
    /// Ten ballots, one 0/1 entry per proposal.
    ballots: Vec<[u64; 2]>,
    /// Optional: committee index of a cheating dealer.
    #[serde(default)]
    malicious_party: Option<usize>,
}

#[derive(Serialize)]
struct ElectionOutput {
    winner: Option<u64>,
    cheater_flagged: Option<u64>,
    weights: Vec<u64>,
    tallies: [u64; 2],
    result: Vec<u64>,
    blocks_to_settle: u64,
    broadcast_txs: usize,
    error: Option<String>,
}

fn err_json(e: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": e.to_string() }).to_string()
}

/// Runs a full private election and reports the outcome next to the
/// plaintext tallies the committee never saw.
#[wasm_bindgen]
pub fn run_election(input_json: &str) -> String {
    let input: ElectionInput = match serde_json::from_str(input_json) {
        Ok(v) => v,
        Err(e) => return err_json(e),
    };
    if input.deposits.len() != 10 || input.ballots.len() != 10 {
        return err_json("expected exactly 10 deposits and 10 ballots");
    }
    let mut scenario = match bundled_scenario("voting_10") {
        Some(s) => s,
        None => return err_json("bundled scenario missing"),
    };
    scenario.seed = input.seed;
    scenario.secret_inputs = input
        .ballots
        .iter()
        .enumerate()
        .map(|(party, b)| SecretInput { party, values: b.to_vec() })
        .collect();
    scenario.calls.retain(|c| c.method != "deposit");
    for (party, amount) in input.deposits.iter().enumerate() {
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
    // the bundled minimum is 5; patch the constructor argument
    for c in scenario.contracts.iter_mut() {
        if c.handle == "vote" {
            c.args[1] = input.min_deposit.to_string();
        }
    }
    if let Some(party) = input.malicious_party {
        scenario.faults = vec![mpcvm_core::scenario::FaultSection {
            party,
            behavior: mpcvm_core::engine::FaultBehavior::InconsistentDealing,
            activation: mpcvm_core::engine::ActivationPoint::InputDealing,
        }];
    }
    let mut sim = match scenario.build() {
        Ok(s) => s,
        Err(e) => return err_json(e),
    };
    if let Err(e) = sim.run_until(|s| !s.sessions.is_empty()) {
        return err_json(e);
    }
    let weights: Vec<u64> = input
        .deposits
        .iter()
        .map(|d| if *d >= input.min_deposit { *d } else { 0 })
        .collect();
    let tallies: [u64; 2] = [0, 1].map(|j: usize| -> u64 {
        (0..10).map(|i| weights[i] * input.ballots[i][j]).sum()
    });
    let broadcast_txs = sim
        .committed
        .iter()
        .filter(|c| {
            matches!(
                c.tx.kind,
                mpcvm_core::ledger::TxKind::MpcMessage { .. }
                    | mpcvm_core::ledger::TxKind::MpcRet { .. }
            )
        })
        .count();
    let out = match sim.sessions.first() {
        Some(outcome) => {
            let flag = outcome.result[outcome.result.len() - 2];
            ElectionOutput {
                winner: (flag == 0).then(|| outcome.result[0]),
                cheater_flagged: (flag != 0)
                    .then(|| outcome.result[outcome.result.len() - 1]),
                weights,
                tallies,
                result: outcome.result.clone(),
                blocks_to_settle: outcome.decided_height,
                broadcast_txs,
                error: None,
            }
        }
        None => ElectionOutput {
            winner: None,
            cheater_flagged: None,
            weights,
            tallies,
            result: vec![],
            blocks_to_settle: sim.ledger.height,
            broadcast_txs,
            error: Some("session did not settle inside the horizon".into()),
        },
    };
    serde_json::to_string(&out).unwrap_or_else(err_json)
}

#[derive(Deserialize)]
struct AuctionInput {
    seed: u64,
    min_deposit: u64,
    deposits: Vec<u64>,
    bids: Vec<u64>,
}

#[derive(Serialize)]
struct AuctionOutput {
    max_bid: Option<u64>,
    winner: Option<u64>,
    over_bid_cheater: Option<u64>,
    result: Vec<u64>,
    eligible: Vec<bool>,
    blocks_to_settle: u64,
    error: Option<String>,
}

/// Runs a sealed-bid auction; bids stay secret, only the winner and the
/// price are opened. A winner bidding above its deposit is slashed.
#[wasm_bindgen]
pub fn run_auction(input_json: &str) -> String {
    let input: AuctionInput = match serde_json::from_str(input_json) {
        Ok(v) => v,
        Err(e) => return err_json(e),
    };
    if input.deposits.len() != 10 || input.bids.len() != 10 {
        return err_json("expected exactly 10 deposits and 10 bids");
    }
    if input.bids.iter().any(|b| *b > 255) {
        return err_json("bids must stay below 256 (the demo field is 8 bits wide)");
    }
    let mut scenario = match bundled_scenario("auction_10") {
        Some(s) => s,
        None => return err_json("bundled scenario missing"),
    };
    scenario.seed = input.seed;
    scenario.secret_inputs = input
        .bids
        .iter()
        .enumerate()
        .map(|(party, b)| SecretInput { party, values: vec![*b] })
        .collect();
    scenario.calls.retain(|c| c.method != "deposit");
    for (party, amount) in input.deposits.iter().enumerate() {
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
    for c in scenario.contracts.iter_mut() {
        if c.handle == "auction" {
            c.args[1] = input.min_deposit.to_string();
        }
    }
    let mut sim = match scenario.build() {
        Ok(s) => s,
        Err(e) => return err_json(e),
    };
    if let Err(e) = sim.run_until(|s| !s.sessions.is_empty()) {
        return err_json(e);
    }
    let eligible: Vec<bool> = input.deposits.iter().map(|d| *d >= input.min_deposit).collect();
    let out = match sim.sessions.first() {
        Some(outcome) => {
            let auction = sim.contract("auction");
            let cheater = auction.and_then(|a| {
                let flagged = sim.ledger.storage(a, 9);
                (flagged != 0).then(|| {
                    (0..10u64).find(|i| party_address(*i as usize).0 == flagged).unwrap_or(0)
                })
            });
            let succeeded = auction.map(|a| sim.ledger.storage(a, 7) == 1).unwrap_or(false);
            let _ = mapping_key(party_address(0));
            AuctionOutput {
                max_bid: succeeded.then(|| outcome.result[0]),
                winner: succeeded.then(|| outcome.result[1]),
                over_bid_cheater: cheater,
                result: outcome.result.clone(),
                eligible,
                blocks_to_settle: outcome.decided_height,
                error: None,
            }
        }
        None => AuctionOutput {
            max_bid: None,
            winner: None,
            over_bid_cheater: None,
            result: vec![],
            eligible,
            blocks_to_settle: sim.ledger.height,
            error: Some("session did not settle inside the horizon".into()),
        },
    };
    serde_json::to_string(&out).unwrap_or_else(err_json)
}

#[derive(Deserialize)]
struct ThroughputInput {
    seed: u64,
    /// Run the contrast mode where regular transactions wait for the MPC.
    synchronous: bool,
}

#[derive(Serialize)]
struct ThroughputOutput {
    baseline_series: Vec<usize>,
    mixed_series: Vec<usize>,
    mpc_series: Vec<usize>,
    baseline_avg_milli: u64,
    mixed_avg_milli: u64,
    degradation_bps: i64,
    sessions: usize,
    error: Option<String>,
}

/// Runs a saturated transfer stream with an MPC restarted in a loop, and
/// the same stream without MPC, returning per-block commit series.
#[wasm_bindgen]
pub fn run_throughput(input_json: &str) -> String {
    let input: ThroughputInput = match serde_json::from_str(input_json) {
        Ok(v) => v,
        Err(e) => return err_json(e),
    };
    let name = if input.synchronous { "throughput_eth_sync" } else { "throughput_eth" };
    let (Some(mut baseline), Some(mut mixed)) =
        (bundled_scenario("throughput_eth_baseline"), bundled_scenario(name))
    else {
        return err_json("bundled scenario missing");
    };
    baseline.seed = input.seed;
    mixed.seed = input.seed;
    // keep the in-browser run snappy
    baseline.chain.run_blocks = 90;
    mixed.chain.run_blocks = 90;
    for c in mixed.calls.iter_mut() {
        if c.repeat_every > 0 {
            c.until_block = 60;
        }
    }
    let base = match baseline.run() {
        Ok(s) => s,
        Err(e) => return err_json(e),
    };
    let mix = match mixed.run() {
        Ok(s) => s,
        Err(e) => return err_json(e),
    };
    let cmp = throughput_comparison(&base, &mix);
    let out = ThroughputOutput {
        baseline_series: base.commits.iter().map(|(_, r, _)| *r).collect(),
        mixed_series: mix.commits.iter().map(|(_, r, _)| *r).collect(),
        mpc_series: mix.commits.iter().map(|(_, _, m)| *m).collect(),
        baseline_avg_milli: cmp.baseline_avg_milli,
        mixed_avg_milli: cmp.mixed_avg_milli,
        degradation_bps: cmp.degradation_bps,
        sessions: mix.sessions.len(),
        error: None,
    };
    serde_json::to_string(&out).unwrap_or_else(err_json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn election_binding_round_trips() {
        let input = serde_json::json!({
            "seed": 4,
            "min_deposit": 5,
            "deposits": [12, 3, 9, 21, 5, 0, 17, 8, 2, 11],
            "ballots": [[1,0],[0,1],[0,1],[1,0],[0,1],[1,1],[1,0],[0,1],[0,0],[1,0]],
        });
        let out = run_election(&input.to_string());
        let parsed: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(parsed["error"].is_null(), "{out}");
        assert_eq!(parsed["winner"], 0, "{out}");
        assert_eq!(parsed["tallies"][0], 61);
        assert_eq!(parsed["tallies"][1], 22);
    }

    #[test]
    fn auction_binding_round_trips() {
        let input = serde_json::json!({
            "seed": 9,
            "min_deposit": 10,
            "deposits": [200, 200, 200, 200, 8, 200, 200, 200, 200, 200],
            "bids": [55, 99, 13, 120, 7, 88, 21, 66, 42, 3],
        });
        let out = run_auction(&input.to_string());
        let parsed: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(parsed["error"].is_null(), "{out}");
        assert_eq!(parsed["max_bid"], 120, "{out}");
        assert_eq!(parsed["winner"], 3);
    }
}
