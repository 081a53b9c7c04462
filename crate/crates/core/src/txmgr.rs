//! The built-in MPC transaction manager.
//!
//! Lives at a reserved address and keeps, per MPC session: the committee,
//! accusation tallies, multiplication readiness/completion tallies, and
//! result attestations. It also owns the global FIFO queue that bounds how
//! many multiplication tasks run concurrently across all sessions.
//!
//! Quorums follow the committee thresholds: 2t+1 readiness votes enqueue a
//! gate and 2t+1 completion attestations retire it; t+1 matching result
//! attestations resume the suspended transaction; t+1 accusations against
//! one party terminate the session with a cheater result.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::engine::{MpcResult, TaskId};
use crate::types::{Address, Encoder, TxHash};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TxMgrError {
    #[error("unknown session {0}")]
    UnknownSession(TxHash),
    #[error("{0} is not a committee member of this session")]
    NotCommitteeMember(Address),
    #[error("broadcasts must originate from an externally owned account")]
    NotEoa,
    #[error("accused party index {0} out of range")]
    AccusedOutOfRange(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionStatus {
    Active,
    Finished,
}

/// Per-session state, kept after completion as a public record of past MPC
/// executions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MpcInfo {
    /// The transaction whose suspension started this session.
    pub tx_hash: TxHash,
    /// Which invocation of that transaction this session belongs to (a
    /// transaction may enter MPC several times).
    pub invocation: u32,
    pub cid: usize,
    pub parties: Vec<Address>,
    pub threshold: usize,
    pub public_inputs: Vec<u64>,
    pub output_count: usize,
    pub status: SessionStatus,
    pub accusations: BTreeMap<usize, BTreeSet<Address>>,
    pub gate_ready: BTreeMap<TaskId, BTreeSet<Address>>,
    pub gate_done: BTreeMap<TaskId, BTreeSet<Address>>,
    pub result_attest: BTreeMap<[u8; 32], (BTreeSet<Address>, MpcResult)>,
    pub result: Option<MpcResult>,
}

impl MpcInfo {
    fn ready_quorum(&self) -> usize {
        2 * self.threshold + 1
    }

    fn decision_quorum(&self) -> usize {
        self.threshold + 1
    }

    fn member(&self, addr: Address) -> bool {
        self.parties.contains(&addr)
    }
}

/// Queue transitions, recorded in the trace log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "queue_event", rename_all = "snake_case")]
pub enum QueueEvent {
    Enqueued { session: TxHash, task: TaskId, running: usize, waiting: usize },
    Admitted { session: TxHash, task: TaskId, running: usize, waiting: usize },
    Retired { session: TxHash, task: TaskId, running: usize, waiting: usize },
    Purged { session: TxHash, removed: usize, running: usize, waiting: usize },
}

/// Effects the ledger turns into engine events and trace records.
#[derive(Debug, Default)]
pub struct MgrEffects {
    pub approvals: Vec<(TxHash, TaskId)>,
    pub queue_events: Vec<QueueEvent>,
    /// Set when a quorum decided the session outcome with this broadcast.
    pub decided: Option<MpcResult>,
}

impl MgrEffects {
    pub fn absorb(&mut self, other: MgrEffects) {
        self.approvals.extend(other.approvals);
        self.queue_events.extend(other.queue_events);
        if other.decided.is_some() {
            self.decided = other.decided;
        }
    }
}

/// Derives the engine-facing session id for one invocation of a suspended
/// transaction, so repeated invocations never collide in the tally maps.
pub fn session_id(tx: &TxHash, invocation: u32) -> TxHash {
    let mut enc = Encoder::new();
    enc.bytes(&tx.0);
    enc.u64(invocation as u64);
    TxHash(enc.digest())
}

#[derive(Debug, Default)]
pub struct TxMgr {
    pub sessions: BTreeMap<TxHash, MpcInfo>,
    queue: VecDeque<(TxHash, TaskId)>,
    running: BTreeSet<(TxHash, TaskId)>,
    pub max_parallel_mults: usize,
}

impl TxMgr {
    pub fn new(max_parallel_mults: usize) -> TxMgr {
        TxMgr {
            sessions: BTreeMap::new(),
            queue: VecDeque::new(),
            running: BTreeSet::new(),
            max_parallel_mults,
        }
    }

    pub fn running_len(&self) -> usize {
        self.running.len()
    }

    pub fn waiting_len(&self) -> usize {
        self.queue.len()
    }

    /// Registers a fresh session for one invocation of a transaction.
    #[allow(clippy::too_many_arguments)]
    pub fn start_session(
        &mut self,
        tx_hash: TxHash,
        invocation: u32,
        cid: usize,
        parties: Vec<Address>,
        threshold: usize,
        public_inputs: Vec<u64>,
        output_count: usize,
    ) -> TxHash {
        let id = session_id(&tx_hash, invocation);
        self.sessions.insert(
            id,
            MpcInfo {
                tx_hash,
                invocation,
                cid,
                parties,
                threshold,
                public_inputs,
                output_count,
                status: SessionStatus::Active,
                accusations: BTreeMap::new(),
                gate_ready: BTreeMap::new(),
                gate_done: BTreeMap::new(),
                result_attest: BTreeMap::new(),
                result: None,
            },
        );
        id
    }

    fn session_mut(&mut self, id: &TxHash) -> Result<&mut MpcInfo, TxMgrError> {
        self.sessions.get_mut(id).ok_or(TxMgrError::UnknownSession(*id))
    }

    /// Readiness vote for a multiplication task. The 2t+1-th distinct vote
    /// enqueues the task; a newly enqueued task is admitted right away if
    /// capacity allows.
    pub fn broadcast_ready(
        &mut self,
        sender: Address,
        session: TxHash,
        task: TaskId,
    ) -> Result<MgrEffects, TxMgrError> {
        let mut fx = MgrEffects::default();
        let quorum = {
            let info = self.session_mut(&session)?;
            if !info.member(sender) {
                return Err(TxMgrError::NotCommitteeMember(sender));
            }
            if info.status == SessionStatus::Finished {
                return Ok(fx);
            }
            let votes = info.gate_ready.entry(task).or_default();
            let new_vote = votes.insert(sender);
            new_vote && votes.len() == info.ready_quorum()
        };
        if quorum {
            self.queue.push_back((session, task));
            fx.queue_events.push(QueueEvent::Enqueued {
                session,
                task,
                running: self.running.len(),
                waiting: self.queue.len(),
            });
            self.admit(&mut fx);
        }
        Ok(fx)
    }

    /// Completion attestation. The 2t+1-th attestation retires the task
    /// from the running set and admits the queue head.
    pub fn attest_gate_done(
        &mut self,
        sender: Address,
        session: TxHash,
        task: TaskId,
    ) -> Result<MgrEffects, TxMgrError> {
        let mut fx = MgrEffects::default();
        let quorum = {
            let info = self.session_mut(&session)?;
            if !info.member(sender) {
                return Err(TxMgrError::NotCommitteeMember(sender));
            }
            if info.status == SessionStatus::Finished {
                return Ok(fx);
            }
            let votes = info.gate_done.entry(task).or_default();
            let new_vote = votes.insert(sender);
            new_vote && votes.len() == info.ready_quorum()
        };
        if quorum && self.running.remove(&(session, task)) {
            fx.queue_events.push(QueueEvent::Retired {
                session,
                task,
                running: self.running.len(),
                waiting: self.queue.len(),
            });
            self.admit(&mut fx);
        }
        Ok(fx)
    }

    fn admit(&mut self, fx: &mut MgrEffects) {
        while self.running.len() < self.max_parallel_mults {
            let Some((session, task)) = self.queue.pop_front() else {
                break;
            };
            self.running.insert((session, task));
            fx.approvals.push((session, task));
            fx.queue_events.push(QueueEvent::Admitted {
                session,
                task,
                running: self.running.len(),
                waiting: self.queue.len(),
            });
        }
    }

    /// Accusation against a committee member. The t+1-th distinct accuser
    /// settles the session with a cheater result.
    pub fn declare_cheater(
        &mut self,
        sender: Address,
        session: TxHash,
        accused: usize,
    ) -> Result<MgrEffects, TxMgrError> {
        let mut fx = MgrEffects::default();
        let decided = {
            let info = self.session_mut(&session)?;
            if !info.member(sender) {
                return Err(TxMgrError::NotCommitteeMember(sender));
            }
            if accused >= info.parties.len() {
                return Err(TxMgrError::AccusedOutOfRange(accused));
            }
            if info.status == SessionStatus::Finished {
                return Ok(fx);
            }
            let accusers = info.accusations.entry(accused).or_default();
            let new_vote = accusers.insert(sender);
            if new_vote && accusers.len() == info.decision_quorum() {
                let result = MpcResult::cheater(info.output_count, accused);
                info.result = Some(result.clone());
                Some(result)
            } else {
                None
            }
        };
        if let Some(result) = decided {
            self.purge_session(session, &mut fx);
            fx.decided = Some(result);
        }
        Ok(fx)
    }

    /// Result attestation. The t+1-th matching attestation verifies the
    /// result; mismatching minority results can never reach the quorum.
    pub fn attest_result(
        &mut self,
        sender: Address,
        session: TxHash,
        result: &MpcResult,
    ) -> Result<MgrEffects, TxMgrError> {
        let mut fx = MgrEffects::default();
        let decided = {
            let info = self.session_mut(&session)?;
            if !info.member(sender) {
                return Err(TxMgrError::NotCommitteeMember(sender));
            }
            if info.status == SessionStatus::Finished {
                return Ok(fx);
            }
            let entry = info
                .result_attest
                .entry(result.hash())
                .or_insert_with(|| (BTreeSet::new(), result.clone()));
            let new_vote = entry.0.insert(sender);
            if new_vote && entry.0.len() == info.decision_quorum() {
                info.result = Some(result.clone());
                true
            } else {
                false
            }
        };
        if decided {
            self.purge_session(session, &mut fx);
            fx.decided = Some(result.clone());
        }
        Ok(fx)
    }

    /// Marks a session finished and drops its queued and running tasks;
    /// freed capacity admits waiting tasks from other sessions.
    fn purge_session(&mut self, session: TxHash, fx: &mut MgrEffects) {
        if let Some(info) = self.sessions.get_mut(&session) {
            info.status = SessionStatus::Finished;
        }
        let before = self.queue.len() + self.running.len();
        self.queue.retain(|(s, _)| *s != session);
        self.running.retain(|(s, _)| *s != session);
        let removed = before - self.queue.len() - self.running.len();
        if removed > 0 {
            fx.queue_events.push(QueueEvent::Purged {
                session,
                removed,
                running: self.running.len(),
                waiting: self.queue.len(),
            });
        }
        self.admit(fx);
    }

    /// Canonical digest of the consensus-critical manager state: session
    /// outcomes, not the transient tally sets (whose insertion order is
    /// delivery-dependent bookkeeping).
    pub fn state_digest_into(&self, enc: &mut Encoder) {
        enc.u64(self.sessions.len() as u64);
        for (id, info) in &self.sessions {
            enc.bytes(&id.0);
            enc.bytes(&info.tx_hash.0);
            enc.u64(info.invocation as u64);
            enc.u64(info.cid as u64);
            enc.u64(info.threshold as u64);
            enc.u64(info.parties.len() as u64);
            for p in &info.parties {
                enc.u64(p.0);
            }
            enc.u64_slice(&info.public_inputs);
            enc.tag(match info.status {
                SessionStatus::Active => 0,
                SessionStatus::Finished => 1,
            });
            match &info.result {
                Some(r) => {
                    enc.tag(1);
                    enc.u64_slice(&r.layout());
                }
                None => {
                    enc.tag(0);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SubTask;

    fn addr(i: u64) -> Address {
        Address(100 + i)
    }

    fn task(g: usize) -> TaskId {
        TaskId { gate: g, sub: SubTask::CircuitMult }
    }

    fn mgr_with_session(n: usize, t: usize, cap: usize) -> (TxMgr, TxHash) {
        let mut mgr = TxMgr::new(cap);
        let parties: Vec<Address> = (0..n as u64).map(addr).collect();
        let id = mgr.start_session(TxHash([7; 32]), 1, 0, parties, t, vec![], 1);
        (mgr, id)
    }

    #[test]
    fn ready_quorum_enqueues_and_admits() {
        let (mut mgr, sid) = mgr_with_session(10, 3, 4);
        for i in 0..6 {
            let fx = mgr.broadcast_ready(addr(i), sid, task(1)).unwrap();
            assert!(fx.approvals.is_empty(), "below 2t+1 nothing happens");
        }
        let fx = mgr.broadcast_ready(addr(6), sid, task(1)).unwrap();
        assert_eq!(fx.approvals, vec![(sid, task(1))]);
        // duplicates are idempotent
        let fx = mgr.broadcast_ready(addr(6), sid, task(1)).unwrap();
        assert!(fx.approvals.is_empty());
    }

    #[test]
    fn capacity_bound_and_fifo_order() {
        let (mut mgr, sid) = mgr_with_session(4, 1, 2);
        // three tasks reach readiness; only two run, the third waits
        for g in 1..=3 {
            for i in 0..3 {
                mgr.broadcast_ready(addr(i), sid, task(g)).unwrap();
            }
        }
        assert_eq!(mgr.running_len(), 2);
        assert_eq!(mgr.waiting_len(), 1);
        // completing one admits the third in FIFO order
        let mut admitted = None;
        for i in 0..3 {
            let fx = mgr.attest_gate_done(addr(i), sid, task(1)).unwrap();
            if !fx.approvals.is_empty() {
                admitted = Some(fx.approvals[0]);
            }
        }
        assert_eq!(admitted, Some((sid, task(3))));
        assert_eq!(mgr.running_len(), 2);
    }

    #[test]
    fn done_attestation_for_non_running_gate_is_recorded_only() {
        let (mut mgr, sid) = mgr_with_session(4, 1, 2);
        for i in 0..3 {
            let fx = mgr.attest_gate_done(addr(i), sid, task(9)).unwrap();
            assert!(fx.approvals.is_empty());
            assert!(fx.queue_events.is_empty());
        }
        assert_eq!(mgr.sessions[&sid].gate_done[&task(9)].len(), 3);
    }

    #[test]
    fn accusation_quorum_finishes_with_cheater_result() {
        let (mut mgr, sid) = mgr_with_session(10, 3, 4);
        for i in 0..3 {
            let fx = mgr.declare_cheater(addr(i), sid, 5).unwrap();
            assert!(fx.decided.is_none(), "three accusations are not enough");
        }
        let fx = mgr.declare_cheater(addr(3), sid, 5).unwrap();
        let result = fx.decided.expect("fourth accusation decides");
        assert_eq!(result.layout(), vec![0, 1, 5]);
        assert_eq!(mgr.sessions[&sid].status, SessionStatus::Finished);
        // further broadcasts are inert
        let fx = mgr.declare_cheater(addr(9), sid, 5).unwrap();
        assert!(fx.decided.is_none());
    }

    #[test]
    fn split_accusations_do_not_pool() {
        let (mut mgr, sid) = mgr_with_session(10, 3, 4);
        for (i, accused) in [(0, 1), (1, 1), (2, 1), (3, 2), (4, 2), (5, 2)] {
            let fx = mgr.declare_cheater(addr(i), sid, accused).unwrap();
            assert!(fx.decided.is_none());
        }
    }

    #[test]
    fn result_quorum_and_forged_minority() {
        let (mut mgr, sid) = mgr_with_session(10, 3, 4);
        let honest = MpcResult::success(vec![42]);
        let forged = MpcResult::success(vec![43]);
        for i in 0..3 {
            assert!(mgr.attest_result(addr(i), sid, &forged).unwrap().decided.is_none());
        }
        for i in 3..6 {
            assert!(mgr.attest_result(addr(i), sid, &honest).unwrap().decided.is_none());
        }
        let fx = mgr.attest_result(addr(6), sid, &honest).unwrap();
        assert_eq!(fx.decided, Some(honest));
    }

    #[test]
    fn early_termination_purges_queued_tasks() {
        let (mut mgr, sid) = mgr_with_session(4, 1, 1);
        for g in 1..=3 {
            for i in 0..3 {
                mgr.broadcast_ready(addr(i), sid, task(g)).unwrap();
            }
        }
        assert_eq!((mgr.running_len(), mgr.waiting_len()), (1, 2));
        let mut fx = MgrEffects::default();
        for i in 0..2 {
            fx = mgr.declare_cheater(addr(i), sid, 0).unwrap();
        }
        assert!(fx.decided.is_some());
        assert_eq!((mgr.running_len(), mgr.waiting_len()), (0, 0));
        assert!(fx
            .queue_events
            .iter()
            .any(|e| matches!(e, QueueEvent::Purged { removed: 3, .. })));
    }

    #[test]
    fn non_members_are_rejected() {
        let (mut mgr, sid) = mgr_with_session(4, 1, 1);
        assert_eq!(
            mgr.broadcast_ready(Address(9999), sid, task(1)).unwrap_err(),
            TxMgrError::NotCommitteeMember(Address(9999))
        );
        assert!(matches!(
            mgr.broadcast_ready(addr(0), TxHash([9; 32]), task(1)),
            Err(TxMgrError::UnknownSession(_))
        ));
    }
}
