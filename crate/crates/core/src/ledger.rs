//! Blockchain state machine: accounts, the four transaction kinds, block
//! commit with a canonical state hash, the locked-contract registry, and
//! the suspend/resume glue between the VM and the MPC transaction manager.
//!
//! A transaction that hits `enter_mpc` splits its pending changes into a
//! ready part (sender nonce and balance, the new session record) that
//! commits with the current block, and a pending part (the locked
//! contract's changes) that stays in the saved execution state until an
//! attested result resumes it.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::circuit::CircuitRegistry;
use crate::engine::{ChainEvent, MpcBroadcast, MpcResult};
use crate::txmgr::{QueueEvent, TxMgr, TxMgrError};
use crate::types::{Address, Encoder, TxHash};
use crate::vm::{
    self, ExecOutcome, ExecutionContext, Program, RevertReason, SavedMpcState, Value, VmEnv,
    VmEvent,
};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Account {
    pub nonce: u64,
    pub balance: u64,
    pub storage: BTreeMap<u64, u64>,
    /// Name of the deployed program in the code library; EOAs carry none.
    pub code_name: Option<String>,
}

/// Transaction payloads. The canonical encoding (length-prefixed,
/// kind-tagged) is the hashing preimage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxKind {
    Create { code: String, args: Vec<Value>, value: u64 },
    Regular { target: Address, method: String, args: Vec<Value>, value: u64 },
    MpcMessage { session: TxHash, msg: MpcBroadcast },
    MpcRet { session: TxHash, result: MpcResult },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: Address,
    pub nonce: u64,
    pub kind: TxKind,
    pub gas_limit: u64,
}

impl Transaction {
    pub fn encode(&self) -> Vec<u8> {
        fn enc_value(enc: &mut Encoder, v: &Value) {
            match v {
                Value::Num(n) => {
                    enc.tag(0).u64(*n);
                }
                Value::List(l) => {
                    enc.tag(1).u64_slice(l);
                }
            }
        }
        let mut enc = Encoder::new();
        enc.u64(self.sender.0).u64(self.nonce).u64(self.gas_limit);
        match &self.kind {
            TxKind::Create { code, args, value } => {
                enc.tag(0).str(code).u64(*value).u64(args.len() as u64);
                for a in args {
                    enc_value(&mut enc, a);
                }
            }
            TxKind::Regular { target, method, args, value } => {
                enc.tag(1).u64(target.0).str(method).u64(*value).u64(args.len() as u64);
                for a in args {
                    enc_value(&mut enc, a);
                }
            }
            TxKind::MpcMessage { session, msg } => {
                enc.tag(2);
                enc.bytes(&crate::engine::encode_broadcast(session, msg));
            }
            TxKind::MpcRet { session, result } => {
                enc.tag(3).bytes(&session.0).u64_slice(&result.layout());
            }
        }
        enc.finish()
    }

    pub fn hash(&self) -> TxHash {
        TxHash(crate::types::sha256(&self.encode()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxStatus {
    Success,
    Reverted,
    Suspended,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Receipt {
    pub tx_hash: TxHash,
    pub status: TxStatus,
    pub reason: Option<String>,
    pub gas_used: u64,
    pub events: Vec<VmEvent>,
    pub ret: Option<Value>,
}

/// A committed access to a contract locked by a different transaction. The
/// access matrix reverts such transactions before commit, so this log must
/// stay empty; scenarios assert exactly that.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LockViolation {
    pub height: u64,
    pub tx_hash: TxHash,
    pub address: Address,
}

#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub committee: Vec<Address>,
    pub threshold: usize,
    pub enter_mpc_gas: u64,
    pub broadcast_gas: u64,
    pub transfer_gas: u64,
    pub max_parallel_mults: usize,
}

impl Default for ChainConfig {
    fn default() -> ChainConfig {
        ChainConfig {
            committee: Vec::new(),
            threshold: 0,
            enter_mpc_gas: 1000,
            broadcast_gas: 10,
            transfer_gas: 10,
            max_parallel_mults: 4,
        }
    }
}

pub struct Ledger {
    pub height: u64,
    pub accounts: BTreeMap<Address, Account>,
    pub saved_mpc: BTreeMap<Address, SavedMpcState>,
    /// locked contract -> owning (suspended) transaction
    pub locks: BTreeMap<Address, TxHash>,
    /// owning transaction -> locked contract
    pub lock_by_tx: BTreeMap<TxHash, Address>,
    pub txmgr: TxMgr,
    pub registry: CircuitRegistry,
    pub code_library: BTreeMap<String, Arc<Program>>,
    pub config: ChainConfig,
    pub gas_burned: u128,
    /// Value carried by suspended transactions: already debited from the
    /// senders, not yet credited to the locked contracts.
    pub escrowed: u128,
    pub total_supply: u128,
    pub violations: Vec<LockViolation>,
    /// (carrier tx, suspended owner tx) pairs for meta-transactions whose
    /// resumption ran to completion (or reverted) inside the carrier.
    pub meta_completions: Vec<(TxHash, TxHash)>,
    pending_events: Vec<ChainEvent>,
    pending_queue_events: Vec<QueueEvent>,
}

impl Ledger {
    pub fn new(
        config: ChainConfig,
        registry: CircuitRegistry,
        code_library: BTreeMap<String, Arc<Program>>,
        genesis: BTreeMap<Address, Account>,
    ) -> Ledger {
        let total_supply = genesis.values().map(|a| a.balance as u128).sum();
        let max_parallel = config.max_parallel_mults;
        Ledger {
            height: 0,
            accounts: genesis,
            saved_mpc: BTreeMap::new(),
            locks: BTreeMap::new(),
            lock_by_tx: BTreeMap::new(),
            txmgr: TxMgr::new(max_parallel),
            registry,
            code_library,
            config,
            gas_burned: 0,
            escrowed: 0,
            total_supply,
            violations: Vec::new(),
            meta_completions: Vec::new(),
            pending_events: Vec::new(),
            pending_queue_events: Vec::new(),
        }
    }

    pub fn is_eoa(&self, addr: Address) -> bool {
        self.accounts.get(&addr).is_none_or(|a| a.code_name.is_none())
    }

    fn account_mut(&mut self, addr: Address) -> &mut Account {
        self.accounts.entry(addr).or_default()
    }

    fn locked_set(&self) -> BTreeSet<Address> {
        self.locks.keys().copied().collect()
    }

    pub fn storage(&self, addr: Address, key: u64) -> u64 {
        self.accounts.get(&addr).and_then(|a| a.storage.get(&key)).copied().unwrap_or(0)
    }

    pub fn balance(&self, addr: Address) -> u64 {
        self.accounts.get(&addr).map(|a| a.balance).unwrap_or(0)
    }

    /// Applies a transaction list as one block: per-transaction receipts,
    /// height bump, canonical state hash, and the engine events released
    /// only now, at finality.
    pub fn commit_block(
        &mut self,
        txs: &[Transaction],
    ) -> (Vec<Receipt>, Vec<ChainEvent>, Vec<QueueEvent>, [u8; 32]) {
        let mut receipts = Vec::with_capacity(txs.len());
        for tx in txs {
            receipts.push(self.apply_tx(tx));
        }
        self.height += 1;
        let events = std::mem::take(&mut self.pending_events);
        let queue_events = std::mem::take(&mut self.pending_queue_events);
        let hash = self.state_hash();
        debug_assert!(self.conserves_value(), "value conservation broken");
        (receipts, events, queue_events, hash)
    }

    /// Σ balances + gas sink + escrow is constant across blocks.
    pub fn conserves_value(&self) -> bool {
        self.accounts.values().map(|a| a.balance as u128).sum::<u128>()
            + self.gas_burned
            + self.escrowed
            == self.total_supply
    }

    pub fn apply_tx(&mut self, tx: &Transaction) -> Receipt {
        let tx_hash = tx.hash();
        let expected = self.accounts.get(&tx.sender).map(|a| a.nonce).unwrap_or(0);
        if expected != tx.nonce {
            return Receipt {
                tx_hash,
                status: TxStatus::Reverted,
                reason: Some(format!("bad nonce: expected {expected}, got {}", tx.nonce)),
                gas_used: 0,
                events: Vec::new(),
                ret: None,
            };
        }
        match tx.kind.clone() {
            TxKind::Create { code, args, value } => {
                self.apply_exec(tx, tx_hash, None, &code, args, value)
            }
            TxKind::Regular { target, method, args, value } => {
                self.apply_exec(tx, tx_hash, Some((target, method)), "", args, value)
            }
            TxKind::MpcMessage { session, msg } => self.apply_mpc_message(tx, tx_hash, session, &msg),
            TxKind::MpcRet { session, result } => self.apply_mpc_ret(tx, tx_hash, session, &result),
        }
    }

    fn revert(&mut self, tx: &Transaction, tx_hash: TxHash, gas: u64, reason: String) -> Receipt {
        let acct = self.account_mut(tx.sender);
        acct.nonce += 1;
        let charge = gas.min(acct.balance);
        acct.balance -= charge;
        self.gas_burned += charge as u128;
        Receipt {
            tx_hash,
            status: TxStatus::Reverted,
            reason: Some(reason),
            gas_used: gas,
            events: Vec::new(),
            ret: None,
        }
    }

    /// Shared execution path for create and regular transactions.
    fn apply_exec(
        &mut self,
        tx: &Transaction,
        tx_hash: TxHash,
        target: Option<(Address, String)>,
        create_code: &str,
        args: Vec<Value>,
        value: u64,
    ) -> Receipt {
        let sender_balance = self.balance(tx.sender);
        if (sender_balance as u128) < value as u128 + tx.gas_limit as u128 {
            return self.revert(tx, tx_hash, 0, "insufficient balance".into());
        }
        // a pure transfer: target without code, or no method named
        if let Some((target_addr, method)) = &target {
            let has_code =
                self.accounts.get(target_addr).is_some_and(|a| a.code_name.is_some());
            if !has_code || method.is_empty() {
                if self.locks.contains_key(target_addr) {
                    return self.revert(
                        tx,
                        tx_hash,
                        self.config.transfer_gas,
                        "transfer to locked contract".into(),
                    );
                }
                let gas = self.config.transfer_gas;
                let sender = self.account_mut(tx.sender);
                sender.nonce += 1;
                sender.balance -= value + gas;
                self.gas_burned += gas as u128;
                self.account_mut(*target_addr).balance += value;
                return Receipt {
                    tx_hash,
                    status: TxStatus::Success,
                    reason: None,
                    gas_used: gas,
                    events: vec![VmEvent {
                        kind: "transfer".into(),
                        data: vec![tx.sender.0, target_addr.0, value],
                    }],
                    ret: None,
                };
            }
        }
        let locked = self.locked_set();
        let exec_height = self.height + 1;
        let outcome = {
            let accounts = &self.accounts;
            let library = &self.code_library;
            let balances = move |a: Address| accounts.get(&a).map(|x| x.balance).unwrap_or(0);
            let storage = move |a: Address, k: u64| {
                accounts.get(&a).and_then(|x| x.storage.get(&k)).copied().unwrap_or(0)
            };
            let code = move |a: Address| {
                accounts
                    .get(&a)
                    .and_then(|x| x.code_name.as_deref())
                    .and_then(|n| library.get(n))
                    .cloned()
            };
            let lib = move |n: &str| library.get(n).cloned();
            let env = VmEnv {
                balances: &balances,
                storage: &storage,
                code: &code,
                code_library: &lib,
                locked: &locked,
                height: exec_height,
                enter_mpc_gas: self.config.enter_mpc_gas,
                create_nonce: tx.nonce,
            };
            match &target {
                Some((t, method)) => vm::exec_method(
                    &env, tx_hash, tx.sender, tx.sender, *t, method, args, value, tx.gas_limit,
                ),
                None => {
                    let fresh = Address::fresh(tx.sender, tx.nonce);
                    vm::exec_create(
                        &env, tx_hash, tx.sender, fresh, create_code, args, value, tx.gas_limit,
                    )
                }
            }
        };
        match outcome {
            ExecOutcome::Completed { ctx, ret } => {
                let gas = ctx.gas_used.max(1).min(tx.gas_limit);
                let events = ctx.events.clone();
                self.audit_accesses(&ctx, tx_hash, None);
                self.apply_writes(&ctx.writes);
                let sender = self.account_mut(tx.sender);
                sender.nonce += 1;
                sender.balance -= gas;
                self.gas_burned += gas as u128;
                Receipt { tx_hash, status: TxStatus::Success, reason: None, gas_used: gas, events, ret }
            }
            ExecOutcome::Reverted { reason, gas_used } => {
                self.revert(tx, tx_hash, gas_used.min(tx.gas_limit), reason.to_string())
            }
            ExecOutcome::Suspended { ctx, result_slot, cid, params } => {
                self.suspend(tx, tx_hash, ctx, result_slot, cid, params, value)
            }
        }
    }

    /// First-invocation suspension: checks the access premise, partitions
    /// the state changes, locks the contract, opens the session.
    #[allow(clippy::too_many_arguments)]
    fn suspend(
        &mut self,
        tx: &Transaction,
        tx_hash: TxHash,
        mut ctx: ExecutionContext,
        result_slot: u16,
        cid: u64,
        params: Vec<u64>,
        carried_value: u64,
    ) -> Receipt {
        let Ok(circuit) = self.registry.get_arc(cid as usize) else {
            return self.revert(
                tx,
                tx_hash,
                ctx.gas_used.min(tx.gas_limit),
                RevertReason::UnknownCircuit(cid).to_string(),
            );
        };
        let locked = ctx.frames.last().map(|f| f.contract).unwrap_or(tx.sender);
        // the suspending contract must be the only contract accessed so far
        if !ctx.accessed.iter().all(|a| *a == locked) {
            return self.revert(
                tx,
                tx_hash,
                tx.gas_limit,
                "access violation: entered mpc after accessing other contracts".into(),
            );
        }
        // pending changes may touch only the sender and the locked contract
        if !ctx.writes.keys().all(|a| *a == tx.sender || *a == locked) {
            return self.revert(
                tx,
                tx_hash,
                tx.gas_limit,
                "access violation: pending changes outside sender and locked contract".into(),
            );
        }
        if self.locks.contains_key(&locked) {
            return self.revert(tx, tx_hash, tx.gas_limit, "contract already locked".into());
        }
        // ready partition: the sender's nonce and balance commit now so it
        // can keep transacting (it may itself be a committee member); the
        // full gas limit is charged up front, suspended transactions get no
        // refund
        if let Some(sender_delta) = ctx.writes.remove(&tx.sender) {
            if let Some(balance) = sender_delta.balance {
                self.account_mut(tx.sender).balance = balance;
            }
        }
        let sender = self.account_mut(tx.sender);
        sender.nonce += 1;
        sender.balance -= tx.gas_limit;
        self.gas_burned += tx.gas_limit as u128;
        self.escrowed += carried_value as u128;
        let events = ctx.events.clone();
        let saved = SavedMpcState {
            result_slot,
            cid: cid as usize,
            params: params.clone(),
            context: ctx,
            locked_contract: locked,
            tx_hash,
            sender: tx.sender,
            invocation_count: 1,
        };
        self.locks.insert(locked, tx_hash);
        self.lock_by_tx.insert(tx_hash, locked);
        self.saved_mpc.insert(locked, saved);
        let session = self.txmgr.start_session(
            tx_hash,
            1,
            cid as usize,
            self.config.committee.clone(),
            self.config.threshold,
            params.clone(),
            circuit.output_count,
        );
        self.pending_events.push(ChainEvent::SessionStart {
            session,
            cid: cid as usize,
            circuit,
            committee: self.config.committee.clone(),
            threshold: self.config.threshold,
            public_inputs: params,
        });
        Receipt {
            tx_hash,
            status: TxStatus::Suspended,
            reason: None,
            gas_used: tx.gas_limit,
            events,
            ret: None,
        }
    }

    fn apply_mpc_message(
        &mut self,
        tx: &Transaction,
        tx_hash: TxHash,
        session: TxHash,
        msg: &MpcBroadcast,
    ) -> Receipt {
        let gas = self.config.broadcast_gas;
        if !self.is_eoa(tx.sender) {
            return self.revert(tx, tx_hash, gas, TxMgrError::NotEoa.to_string());
        }
        if self.balance(tx.sender) < gas {
            return self.revert(tx, tx_hash, 0, "insufficient balance".into());
        }
        let effects = match msg {
            MpcBroadcast::Ready { tasks } => {
                tasks.iter().try_fold(crate::txmgr::MgrEffects::default(), |mut acc, t| {
                    acc.absorb(self.txmgr.broadcast_ready(tx.sender, session, *t)?);
                    Ok(acc)
                })
            }
            MpcBroadcast::GateDone { tasks } => {
                tasks.iter().try_fold(crate::txmgr::MgrEffects::default(), |mut acc, t| {
                    acc.absorb(self.txmgr.attest_gate_done(tx.sender, session, *t)?);
                    Ok(acc)
                })
            }
            MpcBroadcast::Accuse { party } => self.txmgr.declare_cheater(tx.sender, session, *party),
            // pure data broadcasts: membership check only
            _ => match self.txmgr.sessions.get(&session) {
                None => Err(TxMgrError::UnknownSession(session)),
                Some(info) if !info.parties.contains(&tx.sender) => {
                    Err(TxMgrError::NotCommitteeMember(tx.sender))
                }
                Some(_) => Ok(Default::default()),
            },
        };
        let effects = match effects {
            Ok(fx) => fx,
            Err(e) => return self.revert(tx, tx_hash, gas, e.to_string()),
        };
        let sender = self.account_mut(tx.sender);
        sender.nonce += 1;
        sender.balance -= gas;
        self.gas_burned += gas as u128;
        for (s, task) in effects.approvals {
            self.pending_events.push(ChainEvent::TaskApproved { session: s, task });
        }
        self.pending_queue_events.extend(effects.queue_events);
        // every committed broadcast becomes visible to all parties now
        self.pending_events.push(ChainEvent::Broadcast { session, from: tx.sender, msg: msg.clone() });
        let mut events = Vec::new();
        if let Some(result) = effects.decided {
            events = self.finish_session(session, &result, tx_hash);
        }
        Receipt { tx_hash, status: TxStatus::Success, reason: None, gas_used: gas, events, ret: None }
    }

    fn apply_mpc_ret(
        &mut self,
        tx: &Transaction,
        tx_hash: TxHash,
        session: TxHash,
        result: &MpcResult,
    ) -> Receipt {
        let gas = self.config.broadcast_gas;
        if !self.is_eoa(tx.sender) {
            return self.revert(tx, tx_hash, gas, TxMgrError::NotEoa.to_string());
        }
        if self.balance(tx.sender) < gas {
            return self.revert(tx, tx_hash, 0, "insufficient balance".into());
        }
        let effects = match self.txmgr.attest_result(tx.sender, session, result) {
            Ok(fx) => fx,
            Err(e) => return self.revert(tx, tx_hash, gas, e.to_string()),
        };
        let sender = self.account_mut(tx.sender);
        sender.nonce += 1;
        sender.balance -= gas;
        self.gas_burned += gas as u128;
        self.pending_queue_events.extend(effects.queue_events);
        let mut events = Vec::new();
        if let Some(decided) = effects.decided {
            events = self.finish_session(session, &decided, tx_hash);
        }
        Receipt { tx_hash, status: TxStatus::Success, reason: None, gas_used: gas, events, ret: None }
    }

    /// Resumes the suspended transaction with a quorum-verified result; the
    /// resumed writes merge into the carrying transaction. Stale replays
    /// (an invocation index behind the saved state) are skipped.
    fn finish_session(&mut self, session: TxHash, result: &MpcResult, carrier: TxHash) -> Vec<VmEvent> {
        self.pending_events.push(ChainEvent::SessionFinished { session });
        let Some(info) = self.txmgr.sessions.get(&session) else {
            return Vec::new();
        };
        let owner_tx = info.tx_hash;
        let invocation = info.invocation;
        let Some(locked) = self.lock_by_tx.get(&owner_tx).copied() else {
            return Vec::new();
        };
        let Some(saved) = self.saved_mpc.get(&locked) else {
            return Vec::new();
        };
        if saved.invocation_count != invocation {
            // re-execution of an already-consumed attestation cannot change
            // anything; skip it
            return Vec::new();
        }
        let saved = saved.clone();
        let locked_set = self.locked_set();
        let exec_height = self.height + 1;
        let outcome = {
            let accounts = &self.accounts;
            let library = &self.code_library;
            let balances = move |a: Address| accounts.get(&a).map(|x| x.balance).unwrap_or(0);
            let storage = move |a: Address, k: u64| {
                accounts.get(&a).and_then(|x| x.storage.get(&k)).copied().unwrap_or(0)
            };
            let code = move |a: Address| {
                accounts
                    .get(&a)
                    .and_then(|x| x.code_name.as_deref())
                    .and_then(|n| library.get(n))
                    .cloned()
            };
            let lib = move |n: &str| library.get(n).cloned();
            let env = VmEnv {
                balances: &balances,
                storage: &storage,
                code: &code,
                code_library: &lib,
                locked: &locked_set,
                height: exec_height,
                enter_mpc_gas: self.config.enter_mpc_gas,
                create_nonce: 0,
            };
            vm::resume(&env, &saved, &result.layout())
        };
        match outcome {
            ExecOutcome::Completed { ctx, .. } => {
                let events = ctx.events.clone();
                self.audit_accesses(&ctx, owner_tx, Some(locked));
                self.apply_writes(&ctx.writes);
                self.escrowed -= saved.carried_value() as u128;
                self.locks.remove(&locked);
                self.lock_by_tx.remove(&owner_tx);
                self.saved_mpc.remove(&locked);
                self.meta_completions.push((carrier, owner_tx));
                events
            }
            ExecOutcome::Reverted { reason, .. } => {
                // pending writes are discarded; the carried value returns
                // to the sender; the session record itself remains
                let refund = saved.carried_value();
                self.account_mut(saved.sender).balance += refund;
                self.escrowed -= refund as u128;
                self.locks.remove(&locked);
                self.lock_by_tx.remove(&owner_tx);
                self.saved_mpc.remove(&locked);
                self.meta_completions.push((carrier, owner_tx));
                vec![VmEvent { kind: format!("resume_reverted:{reason}"), data: vec![] }]
            }
            ExecOutcome::Suspended { ctx, result_slot, cid, params } => {
                // the transaction enters MPC again: refresh the saved state
                // in place, keep the lock, open the next session
                let Ok(circuit) = self.registry.get_arc(cid as usize) else {
                    let refund = saved.carried_value();
                    self.account_mut(saved.sender).balance += refund;
                    self.escrowed -= refund as u128;
                    self.locks.remove(&locked);
                    self.lock_by_tx.remove(&owner_tx);
                    self.saved_mpc.remove(&locked);
                    return vec![VmEvent {
                        kind: "resume_reverted:unknown circuit".into(),
                        data: vec![],
                    }];
                };
                let next_invocation = saved.invocation_count + 1;
                self.saved_mpc.insert(
                    locked,
                    SavedMpcState {
                        result_slot,
                        cid: cid as usize,
                        params: params.clone(),
                        context: ctx,
                        locked_contract: locked,
                        tx_hash: owner_tx,
                        sender: saved.sender,
                        invocation_count: next_invocation,
                    },
                );
                let new_session = self.txmgr.start_session(
                    owner_tx,
                    next_invocation,
                    cid as usize,
                    self.config.committee.clone(),
                    self.config.threshold,
                    params.clone(),
                    circuit.output_count,
                );
                self.pending_events.push(ChainEvent::SessionStart {
                    session: new_session,
                    cid: cid as usize,
                    circuit,
                    committee: self.config.committee.clone(),
                    threshold: self.config.threshold,
                    public_inputs: params,
                });
                vec![VmEvent { kind: "resuspended".into(), data: vec![next_invocation as u64] }]
            }
        }
    }

    /// Executes a transaction that may invoke MPC, resolving every
    /// invocation synchronously with a pre-recorded result. This realizes
    /// the serial schedule the serializability audit compares against: the
    /// whole meta-transaction runs atomically at one position.
    pub fn apply_tx_inline_mpc(&mut self, tx: &Transaction, results: &[MpcResult]) -> Receipt {
        let tx_hash = tx.hash();
        // the serial schedule omits broadcast traffic, so sender nonces
        // drift from the real history; align before applying
        self.account_mut(tx.sender).nonce = tx.nonce;
        let TxKind::Regular { target, method, args, value } = tx.kind.clone() else {
            return self.apply_tx(tx);
        };
        let locked = self.locked_set();
        let exec_height = self.height + 1;
        let mut outcome = {
            let accounts = &self.accounts;
            let library = &self.code_library;
            let balances = move |a: Address| accounts.get(&a).map(|x| x.balance).unwrap_or(0);
            let storage = move |a: Address, k: u64| {
                accounts.get(&a).and_then(|x| x.storage.get(&k)).copied().unwrap_or(0)
            };
            let code = move |a: Address| {
                accounts
                    .get(&a)
                    .and_then(|x| x.code_name.as_deref())
                    .and_then(|n| library.get(n))
                    .cloned()
            };
            let lib = move |n: &str| library.get(n).cloned();
            let env = VmEnv {
                balances: &balances,
                storage: &storage,
                code: &code,
                code_library: &lib,
                locked: &locked,
                height: exec_height,
                enter_mpc_gas: self.config.enter_mpc_gas,
                create_nonce: tx.nonce,
            };
            let mut out = vm::exec_method(
                &env, tx_hash, tx.sender, tx.sender, target, &method, args, value, tx.gas_limit,
            );
            let mut used = 0usize;
            while let ExecOutcome::Suspended { ctx, result_slot, cid, params } = out {
                let Some(result) = results.get(used) else {
                    out = ExecOutcome::Reverted {
                        reason: RevertReason::MpcManager("no recorded result".into()),
                        gas_used: ctx.gas_used,
                    };
                    break;
                };
                used += 1;
                let saved = SavedMpcState {
                    result_slot,
                    cid: cid as usize,
                    params,
                    locked_contract: ctx.frames.last().map(|f| f.contract).unwrap_or(tx.sender),
                    context: ctx,
                    tx_hash,
                    sender: tx.sender,
                    invocation_count: used as u32,
                };
                out = vm::resume(&env, &saved, &result.layout());
            }
            out
        };
        // inline resumption keeps the restricted-access context; outcome
        // handling below mirrors the ordinary execution path
        if let ExecOutcome::Completed { ctx, ret } = &mut outcome {
            let gas = ctx.gas_used.max(1).min(tx.gas_limit);
            let events = ctx.events.clone();
            self.apply_writes(&ctx.writes);
            let sender = self.account_mut(tx.sender);
            sender.nonce += 1;
            sender.balance -= gas.min(sender.balance);
            self.gas_burned += gas.min(u64::MAX) as u128;
            return Receipt {
                tx_hash,
                status: TxStatus::Success,
                reason: None,
                gas_used: gas,
                events,
                ret: ret.clone(),
            };
        }
        match outcome {
            ExecOutcome::Reverted { reason, gas_used } => {
                self.revert(tx, tx_hash, gas_used.min(tx.gas_limit), reason.to_string())
            }
            _ => unreachable!("suspension resolved inline"),
        }
    }

    fn apply_writes(&mut self, writes: &BTreeMap<Address, vm::AccountDelta>) {
        for (addr, delta) in writes {
            let acct = self.account_mut(*addr);
            if let Some(code) = &delta.deployed_code {
                acct.code_name = Some(code.clone());
            }
            if let Some(balance) = delta.balance {
                acct.balance = balance;
            }
            for (k, v) in &delta.storage {
                acct.storage.insert(*k, *v);
            }
            if delta.destroyed {
                acct.code_name = None;
                acct.storage.clear();
            }
        }
    }

    fn audit_accesses(&mut self, ctx: &ExecutionContext, tx_hash: TxHash, own_lock: Option<Address>) {
        for addr in &ctx.accessed {
            if let Some(owner) = self.locks.get(addr) {
                let own = own_lock == Some(*addr) && *owner == tx_hash;
                if !own {
                    self.violations.push(LockViolation {
                        height: self.height + 1,
                        tx_hash,
                        address: *addr,
                    });
                }
            }
        }
    }

    /// Deterministic digest over the canonical serialization of the
    /// consensus-critical state.
    pub fn state_hash(&self) -> [u8; 32] {
        let mut enc = Encoder::new();
        enc.u64(self.height);
        enc.u64(self.gas_burned as u64).u64((self.gas_burned >> 64) as u64);
        enc.u64(self.escrowed as u64).u64((self.escrowed >> 64) as u64);
        enc.u64(self.accounts.len() as u64);
        for (addr, acct) in &self.accounts {
            enc.u64(addr.0).u64(acct.nonce).u64(acct.balance);
            enc.u64(acct.storage.len() as u64);
            for (k, v) in &acct.storage {
                enc.u64(*k).u64(*v);
            }
            match &acct.code_name {
                Some(name) => enc.tag(1).str(name),
                None => enc.tag(0),
            };
        }
        enc.u64(self.locks.len() as u64);
        for (addr, tx) in &self.locks {
            enc.u64(addr.0).bytes(&tx.0);
        }
        enc.u64(self.saved_mpc.len() as u64);
        for (addr, saved) in &self.saved_mpc {
            enc.u64(addr.0);
            enc.bytes(&saved.tx_hash.0);
            enc.u64(saved.invocation_count as u64);
            let ctx_json = serde_json::to_vec(saved).expect("saved state serializes");
            enc.bytes(&crate::types::sha256(&ctx_json));
        }
        self.txmgr.state_digest_into(&mut enc);
        enc.digest()
    }
}
