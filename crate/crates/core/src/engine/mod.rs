//! Per-party MPC executor.
//!
//! Each simulated committee member runs an instance of [`PartyState`]: a
//! deterministic state machine advanced by chain commits (broadcast
//! delivery, task approvals, block heights) and point-to-point share
//! deliveries. Parties never talk to each other directly — everything they
//! emit is routed by the network simulator, either as a broadcast
//! transaction or as a point-to-point share message.
//!
//! Protocol outline per session:
//!
//! 1. Secret inputs are dealt as verifiable sharings; commitment vectors go
//!    on chain, share points travel point-to-point.
//! 2. Addition and multiplication-by-constant are local (homomorphic on
//!    commitments). Secure multiplication re-shares each party's local
//!    product and recombines with Lagrange weights over an agreed dealer
//!    subset, coordinated through the manager's readiness/approval queue.
//! 3. Comparison reduces to bounded-domain arithmetic: jointly generated
//!    random bits (square-and-open), one masked public opening, then a
//!    chain of shared-bit multiplications recovers the comparison bit.
//! 4. Outputs are opened share-by-share, verified against wire commitments,
//!    and the reconstructed result is attested on chain.
//!
//! Dealings become common knowledge through height-based windows: a dealing
//! is final once its dispute window passed with every dispute resolved, and
//! every honest party derives the same dealer sets from chain data alone.

mod party;

pub use party::{PartyState, SessionSnapshot};

use serde::{Deserialize, Serialize};

use crate::circuit::{GateId, Port};
use crate::commit::Commitment;
use crate::field::FieldElement;
use crate::sss::Share;
use crate::types::{Address, Encoder, TxHash};

/// Statistical masking bits added above the application bit width by the
/// comparison subprotocol.
pub const STAT_SEC: u32 = 8;

/// A share-carrying wire inside one session. Circuit gates own their ports;
/// everything else is comparison-internal scratch space, scoped to the
/// comparison gate that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WireId {
    Gate { gate: GateId, port: Port },
    /// Sum of the valid random contributions for one bit lottery.
    RandSum { gate: GateId, bit: u16, round: u16 },
    /// The squared random value, opened publicly.
    Square { gate: GateId, bit: u16, round: u16 },
    /// The settled random bit.
    Bit { gate: GateId, bit: u16 },
    /// `2^k + a - b + r`, opened publicly.
    Masked { gate: GateId },
    /// Prefix-equality chain of the bitwise borrow computation.
    Eq { gate: GateId, bit: u16 },
    /// One borrow term `r_j · e_{j+1}`.
    Term { gate: GateId, bit: u16 },
    /// The comparison bit `c = [a >= b]`.
    CmpBit { gate: GateId },
    /// `c · (a - b)` and `c · (id_a - id_b)` products.
    SelVal { gate: GateId },
    SelId { gate: GateId },
}

impl WireId {
    pub fn gate_value(gate: GateId) -> WireId {
        WireId::Gate { gate, port: Port::Value }
    }

    pub fn gate_id(gate: GateId) -> WireId {
        WireId::Gate { gate, port: Port::CompareId }
    }

    fn encode(&self, enc: &mut Encoder) {
        match self {
            WireId::Gate { gate, port } => {
                enc.tag(0).u64(*gate as u64).tag(matches!(port, Port::CompareId) as u8)
            }
            WireId::RandSum { gate, bit, round } => {
                enc.tag(1).u64(*gate as u64).u64(*bit as u64).u64(*round as u64)
            }
            WireId::Square { gate, bit, round } => {
                enc.tag(2).u64(*gate as u64).u64(*bit as u64).u64(*round as u64)
            }
            WireId::Bit { gate, bit } => enc.tag(3).u64(*gate as u64).u64(*bit as u64),
            WireId::Masked { gate } => enc.tag(4).u64(*gate as u64),
            WireId::Eq { gate, bit } => enc.tag(5).u64(*gate as u64).u64(*bit as u64),
            WireId::Term { gate, bit } => enc.tag(6).u64(*gate as u64).u64(*bit as u64),
            WireId::CmpBit { gate } => enc.tag(7).u64(*gate as u64),
            WireId::SelVal { gate } => enc.tag(8).u64(*gate as u64),
            WireId::SelId { gate } => enc.tag(9).u64(*gate as u64),
        };
    }
}

/// A schedulable secure multiplication. Circuit MULT gates are tasks of
/// their own; comparison gates fan out into several.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskId {
    pub gate: GateId,
    pub sub: SubTask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubTask {
    CircuitMult,
    Square { bit: u16, round: u16 },
    EqChain { bit: u16 },
    Term { bit: u16 },
    SelVal,
    SelId,
}

impl std::fmt::Display for TaskId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.sub {
            SubTask::CircuitMult => write!(f, "g{}", self.gate),
            SubTask::Square { bit, round } => write!(f, "g{}.sq{}r{}", self.gate, bit, round),
            SubTask::EqChain { bit } => write!(f, "g{}.eq{}", self.gate, bit),
            SubTask::Term { bit } => write!(f, "g{}.term{}", self.gate, bit),
            SubTask::SelVal => write!(f, "g{}.selv", self.gate),
            SubTask::SelId => write!(f, "g{}.seli", self.gate),
        }
    }
}

/// Names one verifiable dealing within a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DealingId {
    /// Party `party`'s sharing of its secret input `slot`.
    Input { party: usize, slot: usize },
    /// One party's additive contribution to a random bit lottery.
    RandContrib { gate: GateId, bit: u16, round: u16, dealer: usize },
    /// A dealer's re-sharing of its local product for a multiplication.
    MultShare { task: TaskId, dealer: usize },
}

impl DealingId {
    pub fn dealer(&self) -> usize {
        match self {
            DealingId::Input { party, .. } => *party,
            DealingId::RandContrib { dealer, .. } => *dealer,
            DealingId::MultShare { dealer, .. } => *dealer,
        }
    }
}

/// Broadcast-class messages; the simulator wraps each one into an
/// `mpcmessageTx` from the emitting party. Same-kind messages produced in
/// one activation are batched into a single transaction, so a wide circuit
/// phase does not flood a block with hundreds of single-purpose entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MpcBroadcast {
    /// Public commitment vectors of this party's dealings.
    Dealings { batch: Vec<(DealingId, Vec<Commitment>)> },
    /// Readiness to evaluate multiplication tasks.
    Ready { tasks: Vec<TaskId> },
    /// Attestation that multiplication tasks completed locally.
    GateDone { tasks: Vec<TaskId> },
    /// Public openings of this party's shares of wires.
    OpenShares { batch: Vec<(WireId, FieldElement, FieldElement)> },
    /// Challenge against a dealing.
    Dispute { dealing: DealingId, missing_share: bool },
    /// Dealer's response: reveals the disputed share point.
    DisputeOpening { dealing: DealingId, index: usize, value: FieldElement, randomness: FieldElement },
    /// Accusation of malicious behaviour (0-based committee index).
    Accuse { party: usize },
}

impl MpcBroadcast {
    pub fn kind_name(&self) -> &'static str {
        match self {
            MpcBroadcast::Dealings { .. } => "dealings",
            MpcBroadcast::Ready { .. } => "ready",
            MpcBroadcast::GateDone { .. } => "gate_done",
            MpcBroadcast::OpenShares { .. } => "open_shares",
            MpcBroadcast::Dispute { .. } => "dispute",
            MpcBroadcast::DisputeOpening { .. } => "dispute_opening",
            MpcBroadcast::Accuse { .. } => "accuse",
        }
    }
}

/// Point-to-point share delivery (bypasses the chain).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareDelivery {
    pub session: TxHash,
    pub dealing: DealingId,
    pub share: Share,
}

/// Final result layout: `[outputs..., cheater_flag, cheater_index]`.
/// Consumers read the flag at `len - 2` and the index at `len - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MpcResult {
    pub outputs: Vec<u64>,
    pub cheater_flag: u64,
    pub cheater_index: u64,
}

impl MpcResult {
    pub fn success(outputs: Vec<u64>) -> MpcResult {
        MpcResult { outputs, cheater_flag: 0, cheater_index: 0 }
    }

    /// Cheater results carry all-zero dummy outputs sized to the circuit's
    /// declared output count, so the layout stays stable for consumers.
    pub fn cheater(output_count: usize, index: usize) -> MpcResult {
        MpcResult { outputs: vec![0; output_count], cheater_flag: 1, cheater_index: index as u64 }
    }

    pub fn layout(&self) -> Vec<u64> {
        let mut v = self.outputs.clone();
        v.push(self.cheater_flag);
        v.push(self.cheater_index);
        v
    }

    pub fn hash(&self) -> [u8; 32] {
        let mut enc = Encoder::new();
        enc.u64_slice(&self.layout());
        enc.digest()
    }
}

/// Messages leaving a party, routed by the simulator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outbound {
    Broadcast { session: TxHash, msg: MpcBroadcast },
    /// Result attestation; becomes an `mpcretTx`.
    Attest { session: TxHash, result: MpcResult },
    Share { to: Address, delivery: ShareDelivery },
}

/// Chain-side events delivered to every party at block commit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainEvent {
    SessionStart {
        session: TxHash,
        cid: usize,
        circuit: std::sync::Arc<crate::circuit::Circuit>,
        committee: Vec<Address>,
        threshold: usize,
        public_inputs: Vec<u64>,
    },
    Broadcast { session: TxHash, from: Address, msg: MpcBroadcast },
    TaskApproved { session: TxHash, task: TaskId },
    SessionFinished { session: TxHash },
}

/// Fault-injection profile carried by at most `t` parties per scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    /// 0-based committee index of the faulty party.
    pub party: usize,
    pub behavior: FaultBehavior,
    pub activation: ActivationPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultBehavior {
    /// Commit honestly but send shares off the committed polynomial, and
    /// stand by the sent values when disputed.
    InconsistentDealing,
    /// Broadcast share openings that do not match the wire commitments.
    CorruptOpening,
    /// Attest a doctored result.
    ForgeAttestation,
    /// Stop emitting anything once activated.
    Silent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationPoint {
    SessionStart,
    InputDealing,
    RandContribution,
    SubDealing,
    SquareOpening,
    MaskedOpening,
    OutputOpening,
    Attestation,
}

/// Linear expression over wires: `constant + Σ coeff · wire`. Multiplication
/// operands are expressions, so affine glue (differences, bit recodings)
/// costs nothing extra.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinExpr {
    pub constant: FieldElement,
    pub terms: Vec<(FieldElement, WireId)>,
}

impl LinExpr {
    pub fn wire(w: WireId) -> LinExpr {
        LinExpr { constant: FieldElement::ZERO, terms: vec![(FieldElement::ONE, w)] }
    }

    pub fn constant(c: FieldElement) -> LinExpr {
        LinExpr { constant: c, terms: Vec::new() }
    }

    pub fn wires(&self) -> impl Iterator<Item = WireId> + '_ {
        self.terms.iter().map(|(_, w)| *w)
    }
}

/// Protocol timing knobs, all measured in blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Window for filing disputes after a dealing's commitments commit, and
    /// for the dealer's response after a dispute; also the patience before
    /// a missing dealing counts as silence.
    pub dispute_window: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { dispute_window: 2 }
    }
}

/// Canonical encoding of a broadcast for transaction payload hashing.
pub fn encode_broadcast(session: &TxHash, msg: &MpcBroadcast) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.bytes(&session.0);
    match msg {
        MpcBroadcast::Dealings { batch } => {
            enc.tag(0);
            enc.u64(batch.len() as u64);
            for (dealing, commitments) in batch {
                encode_dealing(&mut enc, dealing);
                enc.u64(commitments.len() as u64);
                for c in commitments {
                    enc.u64(c.0);
                }
            }
        }
        MpcBroadcast::Ready { tasks } => {
            enc.tag(1);
            enc.u64(tasks.len() as u64);
            for task in tasks {
                encode_task(&mut enc, task);
            }
        }
        MpcBroadcast::GateDone { tasks } => {
            enc.tag(2);
            enc.u64(tasks.len() as u64);
            for task in tasks {
                encode_task(&mut enc, task);
            }
        }
        MpcBroadcast::OpenShares { batch } => {
            enc.tag(3);
            enc.u64(batch.len() as u64);
            for (wire, value, randomness) in batch {
                wire.encode(&mut enc);
                enc.u64(value.0).u64(randomness.0);
            }
        }
        MpcBroadcast::Dispute { dealing, missing_share } => {
            enc.tag(4);
            encode_dealing(&mut enc, dealing);
            enc.tag(*missing_share as u8);
        }
        MpcBroadcast::DisputeOpening { dealing, index, value, randomness } => {
            enc.tag(5);
            encode_dealing(&mut enc, dealing);
            enc.u64(*index as u64).u64(value.0).u64(randomness.0);
        }
        MpcBroadcast::Accuse { party } => {
            enc.tag(6).u64(*party as u64);
        }
    }
    enc.finish()
}

fn encode_dealing(enc: &mut Encoder, d: &DealingId) {
    match d {
        DealingId::Input { party, slot } => enc.tag(0).u64(*party as u64).u64(*slot as u64),
        DealingId::RandContrib { gate, bit, round, dealer } => {
            enc.tag(1).u64(*gate as u64).u64(*bit as u64).u64(*round as u64).u64(*dealer as u64)
        }
        DealingId::MultShare { task, dealer } => {
            enc.tag(2);
            encode_task(enc, task);
            enc.u64(*dealer as u64)
        }
    };
}

fn encode_task(enc: &mut Encoder, t: &TaskId) {
    enc.u64(t.gate as u64);
    match t.sub {
        SubTask::CircuitMult => enc.tag(0),
        SubTask::Square { bit, round } => enc.tag(1).u64(bit as u64).u64(round as u64),
        SubTask::EqChain { bit } => enc.tag(2).u64(bit as u64),
        SubTask::Term { bit } => enc.tag(3).u64(bit as u64),
        SubTask::SelVal => enc.tag(4),
        SubTask::SelId => enc.tag(5),
    };
}
