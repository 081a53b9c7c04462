//! Deterministic run reports: session outcomes cross-checked against the
//! plaintext evaluation, the lock audit, value conservation, and the
//! per-block throughput series.

use serde::Serialize;

use crate::audit;
use crate::netsim::{hex32, Sim};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Serialize)]
pub struct SessionReport {
    pub session: String,
    pub tx: String,
    pub invocation: u32,
    pub cid: usize,
    pub public_inputs: Vec<u64>,
    pub result: Vec<u64>,
    pub oracle: Option<Vec<u64>>,
    /// "pass" when the reconstructed outputs equal the plaintext
    /// evaluation, "cheater_flagged" when the session settled through the
    /// accusation quorum, "mismatch" otherwise.
    pub verdict: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SerializabilityReport {
    pub real_digest: String,
    pub serial_digest: String,
    pub matches: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub blocks: u64,
    pub final_state_hash: String,
    pub sessions: Vec<SessionReport>,
    pub sessions_pass: bool,
    pub lock_violations: usize,
    pub conservation_ok: bool,
    pub serializability: Option<SerializabilityReport>,
    pub txs_total: usize,
    pub txs_reverted: usize,
    /// (height, successful regular transactions, MPC transactions)
    pub commits_per_block: Vec<(u64, usize, usize)>,
    /// Average successful regular transactions per block, in thousandths.
    pub avg_regular_commits_milli: u64,
}

impl Report {
    pub fn build(scenario: &Scenario, sim: &Sim) -> Report {
        let sessions: Vec<SessionReport> = sim
            .sessions
            .iter()
            .map(|s| {
                let flag = s.result[s.result.len() - 2];
                let oracle = scenario.plain_expectation(s.cid, &s.public_inputs);
                let verdict = if flag != 0 {
                    "cheater_flagged".to_string()
                } else {
                    match &oracle {
                        Some(expected) if s.result[..s.result.len() - 2] == expected[..] => {
                            "pass".to_string()
                        }
                        Some(_) => "mismatch".to_string(),
                        None => "no_oracle".to_string(),
                    }
                };
                SessionReport {
                    session: s.session.to_string(),
                    tx: s.tx_hash.to_string(),
                    invocation: s.invocation,
                    cid: s.cid,
                    public_inputs: s.public_inputs.clone(),
                    result: s.result.clone(),
                    oracle,
                    verdict,
                }
            })
            .collect();
        let sessions_pass = sessions.iter().all(|s| s.verdict != "mismatch");
        let serializability = audit::serializability_audit(sim).ok().map(|a| SerializabilityReport {
            real_digest: hex32(&a.real_digest),
            serial_digest: hex32(&a.serial_digest),
            matches: a.matches,
        });
        let txs_total = sim.committed.len();
        let txs_reverted = sim
            .committed
            .iter()
            .filter(|c| c.status == crate::ledger::TxStatus::Reverted)
            .count();
        Report {
            scenario: scenario.name.clone(),
            seed: scenario.seed,
            blocks: sim.ledger.height,
            final_state_hash: hex32(&sim.final_hash),
            sessions,
            sessions_pass,
            lock_violations: sim.ledger.violations.len(),
            conservation_ok: sim.ledger.conserves_value(),
            serializability,
            txs_total,
            txs_reverted,
            commits_per_block: sim.commits.clone(),
            avg_regular_commits_milli: sim.regular_commits_per_block_milli(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Relative throughput comparison between a baseline run and a mixed run
/// sharing the same seed and regular workload.
#[derive(Debug, Clone, Serialize)]
pub struct ThroughputComparison {
    pub baseline_avg_milli: u64,
    pub mixed_avg_milli: u64,
    /// Degradation in basis points (1/100 of a percent); negative means
    /// the mixed run committed more.
    pub degradation_bps: i64,
    /// Every block inside a live MPC session still committed regular
    /// transactions.
    pub regular_flow_uninterrupted: bool,
}

pub fn throughput_comparison(baseline: &Sim, mixed: &Sim) -> ThroughputComparison {
    let base = baseline.regular_commits_per_block_milli();
    let mix = mixed.regular_commits_per_block_milli();
    let degradation_bps = if base == 0 {
        0
    } else {
        ((base as i128 - mix as i128) * 10_000 / base as i128) as i64
    };
    // blocks that carried MPC traffic are exactly the live-session blocks
    let regular_flow_uninterrupted = mixed
        .commits
        .iter()
        .filter(|(_, _, mpc)| *mpc > 0)
        .all(|(_, regular, _)| *regular > 0);
    ThroughputComparison {
        baseline_avg_milli: base,
        mixed_avg_milli: mix,
        degradation_bps,
        regular_flow_uninterrupted,
    }
}
