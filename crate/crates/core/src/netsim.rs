//! Deterministic discrete-event simulator.
//!
//! One event loop drives everything: point-to-point share deliveries with
//! per-link latency, and the block clock. Broadcast-class messages never
//! travel on a separate channel — parties submit them as transactions and
//! receive them back when the containing block commits, which is exactly
//! the finality gate the design prescribes.
//!
//! Determinism: events fire in (tick, sequence) order; parties are advanced
//! in committee order; every random stream is seeded from the scenario
//! seed. The trace is a pure function of (setup, seed).

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::commit::CommitmentParams;
use crate::engine::{
    EngineConfig, FaultSpec, Outbound, PartyState, SessionSnapshot,
    ShareDelivery,
};
use crate::field::Field;
use crate::ledger::{Account, ChainConfig, Ledger, Receipt, Transaction, TxKind, TxStatus};

use crate::txmgr::{QueueEvent, SessionStatus};
use crate::types::{Address, TxHash};
use crate::vm::{Program, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("no event fired for {0} ticks; the simulation is stuck")]
    LivelockGuard(u64),
    #[error("{requested} faults requested but the protocol tolerates at most {tolerated}")]
    TooManyFaults { requested: usize, tolerated: usize },
    #[error("committee of {n} cannot tolerate threshold {t}; need n >= 3t+1")]
    BadCommittee { n: usize, t: usize },
}

/// Resolved simulation parameters.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub seed: u64,
    pub n_parties: usize,
    pub threshold: usize,
    pub field: Field,
    pub block_interval: u64,
    pub max_txs_per_block: usize,
    pub run_blocks: u64,
    pub p2p_latency: u64,
    pub latency_overrides: BTreeMap<(usize, usize), u64>,
    pub dispute_window: u64,
    pub max_parallel_mults: usize,
    pub enter_mpc_gas: u64,
    /// Contrast mode: while any contract is locked, regular transactions
    /// wait instead of executing alongside the MPC.
    pub sync_mode: bool,
    pub tick_budget: u64,
}

impl Default for SimConfig {
    fn default() -> SimConfig {
        SimConfig {
            seed: 0,
            n_parties: 4,
            threshold: 1,
            field: Field::default(),
            block_interval: 10,
            max_txs_per_block: 400,
            run_blocks: 200,
            p2p_latency: 1,
            latency_overrides: BTreeMap::new(),
            dispute_window: 2,
            max_parallel_mults: 4,
            enter_mpc_gas: 1000,
            sync_mode: false,
            tick_budget: 1_000_000,
        }
    }
}

/// Who signs a planned transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SenderSpec {
    Party(usize),
    Organizer,
    Stream(usize),
}

/// Constructor / call arguments with late-bound addresses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArgSpec {
    Num(u64),
    List(Vec<u64>),
    Party(usize),
    Contract(String),
    /// All committee addresses, as a list value.
    PartyList,
    /// The workload stream accounts, as a list value.
    StreamList,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlannedAction {
    Deploy { handle: String, code: String, args: Vec<ArgSpec>, value: u64 },
    Call { target: String, method: String, args: Vec<ArgSpec>, value: u64 },
    Transfer { to: SenderSpec, value: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedTx {
    pub at_block: u64,
    /// Re-submit every this many blocks (0 = once).
    pub repeat_every: u64,
    /// Last block for repeats; 0 means the whole run.
    pub until_block: u64,
    pub sender: SenderSpec,
    pub action: PlannedAction,
}

/// Background load that keeps blocks saturated, mirroring a pre-generated
/// transfer stream fed straight into the mempool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    EthTransfer,
    TokenTransfer,
}

/// Everything needed to boot a simulation.
pub struct SimSetup {
    pub config: SimConfig,
    pub circuits: Vec<Circuit>,
    pub code_library: BTreeMap<String, Arc<Program>>,
    pub planned: Vec<PlannedTx>,
    pub secret_inputs: BTreeMap<usize, Vec<u64>>,
    pub faults: Vec<FaultSpec>,
    pub stream: Option<StreamKind>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum EventKind {
    DeliverShare { from: usize, to: usize, delivery: ShareDelivery },
    ProduceBlock,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Event {
    tick: u64,
    seq: u64,
    kind: EventKind,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.tick, self.seq).cmp(&(other.tick, other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// One line of the trace log.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceEvent {
    Block {
        tick: u64,
        height: u64,
        txs: usize,
        regular_committed: usize,
        mpc_committed: usize,
        state_hash: String,
    },
    P2p { tick: u64, from: usize, to: usize },
    Queue { tick: u64, event: QueueEvent },
    Session { tick: u64, session: TxHash, finished: bool, result: Option<Vec<u64>> },
}

/// One transaction as committed on chain, for audits and replays.
#[derive(Debug, Clone)]
pub struct CommittedTx {
    pub height: u64,
    pub tx: Transaction,
    pub status: TxStatus,
    /// Set on the carrier transaction whose quorum completed a suspended
    /// transaction's meta-execution.
    pub completes_meta: Option<TxHash>,
}

/// Outcome of one decided MPC session.
#[derive(Debug, Clone, Serialize)]
pub struct SessionOutcome {
    pub session: TxHash,
    pub tx_hash: TxHash,
    pub invocation: u32,
    pub cid: usize,
    pub public_inputs: Vec<u64>,
    pub result: Vec<u64>,
    pub decided_height: u64,
}

pub struct Sim {
    pub config: SimConfig,
    pub ledger: Ledger,
    parties: Vec<PartyState>,
    party_addrs: Vec<Address>,
    nonces: BTreeMap<Address, u64>,
    mempool: VecDeque<Transaction>,
    heap: BinaryHeap<Reverse<Event>>,
    clock: u64,
    seq: u64,
    planned: BTreeMap<u64, Vec<PlannedTx>>,
    stream: Option<StreamKind>,
    stream_counter: u64,
    contract_addrs: BTreeMap<String, Address>,
    pending_deploy_handles: BTreeMap<TxHash, String>,
    decided_sessions: std::collections::BTreeSet<TxHash>,
    pub trace: Vec<TraceEvent>,
    pub receipts: Vec<(u64, Receipt)>,
    pub committed: Vec<CommittedTx>,
    /// (height, regular committed, mpc committed) per block.
    pub commits: Vec<(u64, usize, usize)>,
    pub sessions: Vec<SessionOutcome>,
    pub final_hash: [u8; 32],
}

pub const ORGANIZER: Address = Address(0x2000);
const STREAM_EOAS: usize = 8;

pub fn party_address(i: usize) -> Address {
    Address(0x1000 + i as u64)
}

pub fn stream_address(i: usize) -> Address {
    Address(0x3000 + (i % STREAM_EOAS) as u64)
}

fn party_seed(seed: u64, index: usize) -> [u8; 32] {
    let mut enc = crate::types::Encoder::new();
    enc.str("party-rng");
    enc.u64(seed);
    enc.u64(index as u64);
    enc.digest()
}

impl Sim {
    pub fn new(setup: SimSetup) -> Result<Sim, SimError> {
        let cfg = setup.config;
        if cfg.n_parties < 3 * cfg.threshold + 1 {
            return Err(SimError::BadCommittee { n: cfg.n_parties, t: cfg.threshold });
        }
        if setup.faults.len() > cfg.threshold {
            return Err(SimError::TooManyFaults {
                requested: setup.faults.len(),
                tolerated: cfg.threshold,
            });
        }
        let committee: Vec<Address> = (0..cfg.n_parties).map(party_address).collect();
        let mut registry = crate::circuit::CircuitRegistry::new();
        for c in setup.circuits {
            registry.register(c).expect("scenario circuits validate");
        }
        let chain_config = ChainConfig {
            committee: committee.clone(),
            threshold: cfg.threshold,
            enter_mpc_gas: cfg.enter_mpc_gas,
            broadcast_gas: 10,
            transfer_gas: 10,
            max_parallel_mults: cfg.max_parallel_mults,
        };
        let mut genesis: BTreeMap<Address, Account> = BTreeMap::new();
        let fund = 1u64 << 40;
        for addr in committee.iter().copied().chain([ORGANIZER]) {
            genesis.insert(addr, Account { balance: fund, ..Account::default() });
        }
        for i in 0..STREAM_EOAS {
            genesis.insert(stream_address(i), Account { balance: fund, ..Account::default() });
        }
        let ledger = Ledger::new(chain_config, registry, setup.code_library, genesis.clone());
        let params = CommitmentParams::derive(&cfg.field).expect("default field has a safe group");
        let engine_cfg = EngineConfig { dispute_window: cfg.dispute_window };
        let parties: Vec<PartyState> = (0..cfg.n_parties)
            .map(|i| {
                let fault = setup.faults.iter().copied().find(|f| f.party == i);
                PartyState::new(
                    i,
                    party_address(i),
                    cfg.field,
                    params,
                    engine_cfg,
                    party_seed(cfg.seed, i),
                    fault,
                    setup.secret_inputs.get(&i).cloned().unwrap_or_default(),
                )
            })
            .collect();
        let mut planned: BTreeMap<u64, Vec<PlannedTx>> = BTreeMap::new();
        for p in setup.planned {
            if p.repeat_every == 0 {
                planned.entry(p.at_block).or_default().push(p);
            } else {
                let last = if p.until_block == 0 { cfg.run_blocks } else { p.until_block };
                let mut block = p.at_block;
                while block <= last.min(cfg.run_blocks) {
                    planned.entry(block).or_default().push(p.clone());
                    block += p.repeat_every;
                }
            }
        }
        let mut heap = BinaryHeap::new();
        heap.push(Reverse(Event { tick: cfg.block_interval, seq: 0, kind: EventKind::ProduceBlock }));
        Ok(Sim {
            config: cfg,
            ledger,
            parties,
            party_addrs: committee,
            nonces: BTreeMap::new(),
            mempool: VecDeque::new(),
            heap,
            clock: 0,
            seq: 1,
            planned,
            stream: setup.stream,
            stream_counter: 0,
            contract_addrs: BTreeMap::new(),
            pending_deploy_handles: BTreeMap::new(),
            decided_sessions: Default::default(),
            trace: Vec::new(),
            receipts: Vec::new(),
            committed: Vec::new(),
            commits: Vec::new(),
            sessions: Vec::new(),
            final_hash: [0; 32],
        })
    }

    /// A fresh ledger with the same genesis, registry and code library —
    /// the starting point for the serializability replay.
    pub fn fresh_ledger(&self) -> Ledger {
        let genesis = {
            let fund = 1u64 << 40;
            let mut g: BTreeMap<Address, Account> = BTreeMap::new();
            for addr in self.party_addrs.iter().copied().chain([ORGANIZER]) {
                g.insert(addr, Account { balance: fund, ..Account::default() });
            }
            for i in 0..STREAM_EOAS {
                g.insert(stream_address(i), Account { balance: fund, ..Account::default() });
            }
            g
        };
        Ledger::new(
            self.ledger.config.clone(),
            self.ledger.registry.clone(),
            self.ledger.code_library.clone(),
            genesis,
        )
    }

    pub fn contract(&self, handle: &str) -> Option<Address> {
        self.contract_addrs.get(handle).copied()
    }

    pub fn snapshot(&self, party: usize, session: &TxHash) -> Option<SessionSnapshot> {
        self.parties.get(party)?.snapshot(session)
    }

    fn latency(&self, from: usize, to: usize) -> u64 {
        self.config
            .latency_overrides
            .get(&(from, to))
            .copied()
            .unwrap_or(self.config.p2p_latency)
            .max(1)
    }

    fn next_nonce(&mut self, sender: Address) -> u64 {
        let entry = self.nonces.entry(sender).or_insert(0);
        let n = *entry;
        *entry += 1;
        n
    }

    fn push_event(&mut self, tick: u64, kind: EventKind) {
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(Reverse(Event { tick, seq, kind }));
    }

    fn submit(&mut self, tx: Transaction) {
        self.mempool.push_back(tx);
    }

    fn route_outbounds(&mut self, from: usize, outs: Vec<Outbound>) {
        for out in outs {
            match out {
                Outbound::Broadcast { session, msg } => {
                    let sender = self.party_addrs[from];
                    let nonce = self.next_nonce(sender);
                    self.submit(Transaction {
                        sender,
                        nonce,
                        kind: TxKind::MpcMessage { session, msg },
                        gas_limit: 10,
                    });
                }
                Outbound::Attest { session, result } => {
                    let sender = self.party_addrs[from];
                    let nonce = self.next_nonce(sender);
                    self.submit(Transaction {
                        sender,
                        nonce,
                        kind: TxKind::MpcRet { session, result },
                        gas_limit: 10,
                    });
                }
                Outbound::Share { to, delivery } => {
                    let Some(to_idx) = self.party_addrs.iter().position(|a| *a == to) else {
                        continue;
                    };
                    let tick = self.clock + self.latency(from, to_idx);
                    self.push_event(tick, EventKind::DeliverShare { from, to: to_idx, delivery });
                }
            }
        }
    }

    fn resolve_sender(&self, spec: &SenderSpec) -> Address {
        match spec {
            SenderSpec::Party(i) => party_address(*i),
            SenderSpec::Organizer => ORGANIZER,
            SenderSpec::Stream(i) => stream_address(*i),
        }
    }

    fn resolve_args(&self, args: &[ArgSpec]) -> Vec<Value> {
        args.iter()
            .map(|a| match a {
                ArgSpec::Num(n) => Value::Num(*n),
                ArgSpec::List(l) => Value::List(l.clone()),
                ArgSpec::Party(i) => Value::Num(party_address(*i).0),
                ArgSpec::Contract(h) => {
                    Value::Num(self.contract_addrs.get(h).copied().unwrap_or(Address(0)).0)
                }
                ArgSpec::PartyList => {
                    Value::List(self.party_addrs.iter().map(|a| a.0).collect())
                }
                ArgSpec::StreamList => {
                    Value::List((0..STREAM_EOAS).map(|i| stream_address(i).0).collect())
                }
            })
            .collect()
    }

    fn submit_planned(&mut self, block: u64) {
        let Some(planned) = self.planned.remove(&block) else {
            return;
        };
        for p in planned {
            let sender = self.resolve_sender(&p.sender);
            let nonce = self.next_nonce(sender);
            let tx = match &p.action {
                PlannedAction::Deploy { handle, code, args, value } => {
                    let tx = Transaction {
                        sender,
                        nonce,
                        kind: TxKind::Create {
                            code: code.clone(),
                            args: self.resolve_args(args),
                            value: *value,
                        },
                        gas_limit: 100_000,
                    };
                    self.pending_deploy_handles.insert(tx.hash(), handle.clone());
                    tx
                }
                PlannedAction::Call { target, method, args, value } => Transaction {
                    sender,
                    nonce,
                    kind: TxKind::Regular {
                        target: self.contract_addrs.get(target).copied().unwrap_or(Address(0)),
                        method: method.clone(),
                        args: self.resolve_args(args),
                        value: *value,
                    },
                    gas_limit: 100_000,
                },
                PlannedAction::Transfer { to, value } => Transaction {
                    sender,
                    nonce,
                    kind: TxKind::Regular {
                        target: self.resolve_sender(to),
                        method: String::new(),
                        args: Vec::new(),
                        value: *value,
                    },
                    gas_limit: 1_000,
                },
            };
            self.submit(tx);
        }
    }

    /// Tops the mempool up to the block budget with stream transfers,
    /// mirroring an unbounded pre-generated workload.
    fn refill_stream(&mut self) {
        let Some(kind) = self.stream else {
            return;
        };
        while self.mempool.len() < self.config.max_txs_per_block {
            let i = self.stream_counter as usize;
            self.stream_counter += 1;
            let sender = stream_address(i);
            let recipient = stream_address(i + 1);
            let nonce = self.next_nonce(sender);
            let tx = match kind {
                StreamKind::EthTransfer => Transaction {
                    sender,
                    nonce,
                    kind: TxKind::Regular {
                        target: recipient,
                        method: String::new(),
                        args: Vec::new(),
                        value: 1,
                    },
                    gas_limit: 1_000,
                },
                StreamKind::TokenTransfer => Transaction {
                    sender,
                    nonce,
                    kind: TxKind::Regular {
                        target: self.contract_addrs.get("token").copied().unwrap_or(Address(0)),
                        method: "transfer".into(),
                        args: vec![Value::Num(recipient.0), Value::Num(1)],
                        value: 0,
                    },
                    gas_limit: 1_000,
                },
            };
            self.submit(tx);
        }
    }

    fn produce_block(&mut self) {
        let next_height = self.ledger.height + 1;
        self.submit_planned(next_height);
        let stalled = self.config.sync_mode && !self.ledger.locks.is_empty();
        if !stalled {
            self.refill_stream();
        }
        let budget = self.config.max_txs_per_block;
        let mut txs: Vec<Transaction> = Vec::new();
        if stalled {
            // synchronous contrast mode: only MPC traffic moves while a
            // transaction is suspended
            let mut rest = VecDeque::new();
            while let Some(tx) = self.mempool.pop_front() {
                let is_mpc =
                    matches!(tx.kind, TxKind::MpcMessage { .. } | TxKind::MpcRet { .. });
                if is_mpc && txs.len() < budget {
                    txs.push(tx);
                } else {
                    rest.push_back(tx);
                }
            }
            self.mempool = rest;
        } else {
            while txs.len() < budget {
                let Some(tx) = self.mempool.pop_front() else {
                    break;
                };
                txs.push(tx);
            }
        }
        let meta_before = self.ledger.meta_completions.len();
        let (receipts, events, queue_events, hash) = self.ledger.commit_block(&txs);
        let height = self.ledger.height;
        self.final_hash = hash;
        let completions: BTreeMap<TxHash, TxHash> =
            self.ledger.meta_completions[meta_before..].iter().copied().collect();
        let mut regular = 0;
        let mut mpc = 0;
        for (tx, receipt) in txs.iter().zip(&receipts) {
            self.committed.push(CommittedTx {
                height,
                tx: tx.clone(),
                status: receipt.status,
                completes_meta: completions.get(&receipt.tx_hash).copied(),
            });
            match tx.kind {
                TxKind::MpcMessage { .. } | TxKind::MpcRet { .. } => mpc += 1,
                _ => {
                    if receipt.status != TxStatus::Reverted {
                        regular += 1;
                    }
                }
            }
            if let Some(handle) = self.pending_deploy_handles.remove(&receipt.tx_hash) {
                if let Some(Value::Num(addr)) = receipt.ret {
                    self.contract_addrs.insert(handle, Address(addr));
                }
            }
        }
        self.commits.push((height, regular, mpc));
        self.trace.push(TraceEvent::Block {
            tick: self.clock,
            height,
            txs: txs.len(),
            regular_committed: regular,
            mpc_committed: mpc,
            state_hash: hex32(&hash),
        });
        for qe in queue_events {
            self.trace.push(TraceEvent::Queue { tick: self.clock, event: qe });
        }
        for r in receipts {
            self.receipts.push((height, r));
        }
        // session outcomes decided in this block
        let decided: Vec<SessionOutcome> = self
            .ledger
            .txmgr
            .sessions
            .iter()
            .filter(|(id, info)| {
                info.status == SessionStatus::Finished
                    && info.result.is_some()
                    && !self.decided_sessions.contains(*id)
            })
            .map(|(id, info)| SessionOutcome {
                session: *id,
                tx_hash: info.tx_hash,
                invocation: info.invocation,
                cid: info.cid,
                public_inputs: info.public_inputs.clone(),
                result: info.result.as_ref().unwrap().layout(),
                decided_height: height,
            })
            .collect();
        for outcome in decided {
            self.decided_sessions.insert(outcome.session);
            self.trace.push(TraceEvent::Session {
                tick: self.clock,
                session: outcome.session,
                finished: true,
                result: Some(outcome.result.clone()),
            });
            self.sessions.push(outcome);
        }
        // deliver at finality: every party sees the committed events
        for i in 0..self.parties.len() {
            let outs = self.parties[i].on_block(height, &events);
            self.route_outbounds(i, outs);
        }
        if height < self.config.run_blocks {
            self.push_event(self.clock + self.config.block_interval, EventKind::ProduceBlock);
        }
    }

    fn step_event(&mut self, event: Event) {
        self.clock = event.tick;
        match event.kind {
            EventKind::ProduceBlock => self.produce_block(),
            EventKind::DeliverShare { from, to, delivery } => {
                self.trace.push(TraceEvent::P2p { tick: self.clock, from, to });
                let outs = self.parties[to].on_share(delivery);
                self.route_outbounds(to, outs);
            }
        }
    }

    /// Runs the whole configured block horizon.
    pub fn run_to_end(&mut self) -> Result<(), SimError> {
        self.run_until(|sim| sim.ledger.height >= sim.config.run_blocks)
    }

    /// Advances the event loop until the predicate holds (checked after
    /// every event) or the schedule drains.
    pub fn run_until(&mut self, predicate: impl Fn(&Sim) -> bool) -> Result<(), SimError> {
        if predicate(self) {
            return Ok(());
        }
        while let Some(Reverse(event)) = self.heap.pop() {
            if event.tick > self.config.tick_budget {
                return Err(SimError::LivelockGuard(self.config.tick_budget));
            }
            self.step_event(event);
            if predicate(self) {
                return Ok(());
            }
        }
        Ok(())
    }

    /// Average successful regular transactions per block, in thousandths.
    pub fn regular_commits_per_block_milli(&self) -> u64 {
        if self.commits.is_empty() {
            return 0;
        }
        let total: u64 = self.commits.iter().map(|(_, r, _)| *r as u64).sum();
        total * 1000 / self.commits.len() as u64
    }

    pub fn trace_json_lines(&self) -> String {
        let mut out = String::new();
        for ev in &self.trace {
            out.push_str(&serde_json::to_string(ev).expect("trace serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn hex32(bytes: &[u8; 32]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
