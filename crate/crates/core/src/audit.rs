//! Consistency audits over a finished run.
//!
//! The serializability check replays the committed history as the
//! equivalent serial schedule: reverted (denied) transactions removed,
//! broadcast traffic removed, and each suspended transaction executed
//! atomically — with its recorded MPC results injected inline — at the
//! position of the transaction that completed it. The replayed contract
//! state must match the real run's contract state exactly.
//!
//! EOA nonces and gas balances are excluded from the comparison: the serial
//! history has no broadcast transactions by construction, so those differ
//! in ways the consistency claim does not cover.

use std::collections::BTreeMap;

use crate::engine::MpcResult;
use crate::ledger::{Ledger, Transaction, TxKind, TxStatus};
use crate::netsim::Sim;
use crate::types::{Encoder, TxHash};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuditError {
    #[error("run ended with {0} sessions still live; serial replay undefined")]
    UnfinishedSessions(usize),
    #[error("carrier completed unknown suspended transaction {0}")]
    UnknownSuspended(TxHash),
}

/// Digest over contract accounts only: address, balance, storage, code.
pub fn contract_state_digest(ledger: &Ledger) -> [u8; 32] {
    let mut enc = Encoder::new();
    for (addr, acct) in &ledger.accounts {
        let Some(code) = &acct.code_name else {
            continue;
        };
        enc.u64(addr.0).u64(acct.balance).str(code);
        enc.u64(acct.storage.len() as u64);
        for (k, v) in &acct.storage {
            enc.u64(*k).u64(*v);
        }
    }
    enc.digest()
}

pub struct SerializabilityAudit {
    pub real_digest: [u8; 32],
    pub serial_digest: [u8; 32],
    pub matches: bool,
}

/// Replays the committed history serially and compares contract state.
pub fn serializability_audit(sim: &Sim) -> Result<SerializabilityAudit, AuditError> {
    if !sim.ledger.locks.is_empty() {
        return Err(AuditError::UnfinishedSessions(sim.ledger.locks.len()));
    }
    // recorded results per suspended transaction, in invocation order
    let mut results: BTreeMap<TxHash, Vec<(u32, MpcResult)>> = BTreeMap::new();
    for outcome in &sim.sessions {
        results.entry(outcome.tx_hash).or_default().push((
            outcome.invocation,
            MpcResult {
                outputs: outcome.result[..outcome.result.len() - 2].to_vec(),
                cheater_flag: outcome.result[outcome.result.len() - 2],
                cheater_index: outcome.result[outcome.result.len() - 1],
            },
        ));
    }
    for list in results.values_mut() {
        list.sort_by_key(|(inv, _)| *inv);
    }
    let suspended: BTreeMap<TxHash, &Transaction> = sim
        .committed
        .iter()
        .filter(|c| c.status == TxStatus::Suspended)
        .map(|c| (c.tx.hash(), &c.tx))
        .collect();
    let mut ledger = sim.fresh_ledger();
    for entry in &sim.committed {
        // replayed transactions observe their original block height
        ledger.height = entry.height.saturating_sub(1);
        if let Some(owner) = entry.completes_meta {
            let original = suspended.get(&owner).ok_or(AuditError::UnknownSuspended(owner))?;
            let injected: Vec<MpcResult> = results
                .get(&owner)
                .map(|rs| rs.iter().map(|(_, r)| r.clone()).collect())
                .unwrap_or_default();
            ledger.apply_tx_inline_mpc(original, &injected);
            continue;
        }
        match (&entry.tx.kind, entry.status) {
            // denied transactions are removed from the serial schedule
            (_, TxStatus::Reverted) => {}
            // the suspended original runs at its completion point instead
            (_, TxStatus::Suspended) => {}
            // broadcast traffic has no serial counterpart
            (TxKind::MpcMessage { .. }, _) | (TxKind::MpcRet { .. }, _) => {}
            _ => {
                // broadcast gaps shift nonces; align before applying
                ledger.accounts.entry(entry.tx.sender).or_default().nonce = entry.tx.nonce;
                ledger.apply_tx(&entry.tx);
            }
        }
    }
    let real_digest = contract_state_digest(&sim.ledger);
    let serial_digest = contract_state_digest(&ledger);
    Ok(SerializabilityAudit { real_digest, serial_digest, matches: real_digest == serial_digest })
}
