//! The per-party protocol state machine.
//!
//! Everything a party decides follows from chain-committed data plus its own
//! point-to-point shares, so honest parties stay in lockstep: dealings
//! settle at heights derived from commit heights and the dispute window,
//! dealer sets are chosen from settled dealings only, and wire commitment
//! vectors are recomputed identically everywhere.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::sync::Arc;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Circuit, GateId, GateKind, IdOperand, Port, WireRef};
use crate::commit::{Commitment, CommitmentParams};
use crate::field::{lagrange_coefficients, lagrange_interpolate, Field, FieldElement};
use crate::sss::{self, Share};
use crate::types::{Address, TxHash};

use super::{
    ActivationPoint, ChainEvent, DealingId, EngineConfig, FaultBehavior, FaultSpec, LinExpr,
    MpcBroadcast, MpcResult, Outbound, ShareDelivery, SubTask, TaskId, WireId,
};

/// One simulated committee member across all sessions.
pub struct PartyState {
    pub index: usize,
    pub address: Address,
    field: Field,
    params: CommitmentParams,
    config: EngineConfig,
    rng: ChaCha8Rng,
    fault: Option<FaultSpec>,
    silenced: bool,
    /// This party's secret input values, consumed slot by slot per the
    /// circuit's declared shape (the same inputs feed every session of a
    /// scenario run).
    secret_inputs: Vec<u64>,
    sessions: BTreeMap<TxHash, Session>,
    outbox: Vec<Outbound>,
}

/// Read-only view for tests and audits.
pub struct SessionSnapshot {
    pub wire_shares: BTreeMap<WireId, Share>,
    pub wire_commitments: BTreeMap<WireId, Vec<Commitment>>,
    pub outputs: BTreeMap<usize, u64>,
    pub attested: bool,
    pub finished: bool,
}

#[derive(Debug, Clone)]
struct WireState {
    share: Share,
    commitments: Vec<Commitment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DisputeResolution {
    Valid,
    Cheater,
}

#[derive(Debug, Clone)]
struct DisputeState {
    filed: u64,
    resolved: Option<DisputeResolution>,
}

#[derive(Debug, Clone)]
struct DealingState {
    dealer: usize,
    /// Height at which the dealing became expected; commitments must land
    /// within the window from here.
    expected_from: u64,
    /// Commit height and the vector, once landed in time.
    commitments: Option<(u64, Vec<Commitment>)>,
    degree_ok: bool,
    my_share: Option<Share>,
    /// Received point-to-point but not yet verified (or failing).
    pending_share: Option<Share>,
    disputes: BTreeMap<usize, DisputeState>,
    excluded: bool,
}

impl DealingState {
    fn new(dealer: usize, expected_from: u64) -> DealingState {
        DealingState {
            dealer,
            expected_from,
            commitments: None,
            degree_ok: false,
            my_share: None,
            pending_share: None,
            disputes: BTreeMap::new(),
            excluded: false,
        }
    }

    /// Settled in the good sense; a common-knowledge predicate.
    fn final_valid(&self, height: u64, window: u64) -> bool {
        if self.excluded || !self.degree_ok {
            return false;
        }
        match self.commitments {
            Some((hc, _)) => {
                height >= hc + window
                    && self.disputes.values().all(|d| d.resolved == Some(DisputeResolution::Valid))
            }
            None => false,
        }
    }

    /// Settled either way; dealer sets are only chosen once every candidate
    /// is settled.
    fn settled(&self, height: u64, window: u64) -> bool {
        self.excluded || self.final_valid(height, window)
    }
}

#[derive(Debug, Clone)]
struct TaskState {
    out: WireId,
    a: LinExpr,
    b: LinExpr,
    approved: bool,
    dealt: bool,
    finalized: bool,
}

impl TaskState {
    fn new(out: WireId, a: LinExpr, b: LinExpr) -> TaskState {
        TaskState { out, a, b, approved: false, dealt: false, finalized: false }
    }
}

#[derive(Debug, Clone, Copy)]
enum IdSide {
    Const(u64),
    Wire(WireId),
}

#[derive(Debug, Clone)]
struct CompareSpec {
    val_a: WireId,
    val_b: WireId,
    id_a: IdSide,
    id_b: IdSide,
}

#[derive(Debug, Clone)]
struct CompareState {
    spec: CompareSpec,
    activated: bool,
    /// Current lottery round per bit.
    round: Vec<u16>,
    /// Opened mask value, as an integer.
    masked: Option<u64>,
    borrow_planned: bool,
}

struct Session {
    id: TxHash,
    circuit: Arc<Circuit>,
    committee: Vec<Address>,
    by_address: BTreeMap<Address, usize>,
    n: usize,
    t: usize,
    public_inputs: Vec<FieldElement>,
    height: u64,
    finished: bool,

    wires: BTreeMap<WireId, WireState>,
    public_values: BTreeMap<WireId, FieldElement>,
    openings: BTreeMap<WireId, BTreeMap<usize, (FieldElement, FieldElement)>>,
    pending_openings: Vec<(usize, WireId, FieldElement, FieldElement)>,
    bad_openers: BTreeMap<WireId, BTreeSet<usize>>,
    dealings: BTreeMap<DealingId, DealingState>,
    orphan_shares: BTreeMap<DealingId, Share>,
    sent_shares: BTreeMap<DealingId, Vec<Share>>,
    tasks: BTreeMap<TaskId, TaskState>,
    compares: BTreeMap<GateId, CompareState>,
    outputs: BTreeMap<usize, FieldElement>,

    deals_done: BTreeSet<DealingId>,
    ready_sent: BTreeSet<TaskId>,
    done_sent: BTreeSet<TaskId>,
    opens_sent: BTreeSet<WireId>,
    disputes_sent: BTreeSet<DealingId>,
    responses_sent: BTreeSet<(DealingId, usize)>,
    accuse_sent: BTreeSet<usize>,
    attest_sent: bool,
}

/// Threads the party's shared resources into session methods.
struct Ctx<'a> {
    field: &'a Field,
    params: &'a CommitmentParams,
    config: &'a EngineConfig,
    index: usize,
    fault: Option<FaultSpec>,
    silenced: &'a mut bool,
    rng: &'a mut ChaCha8Rng,
    out: &'a mut Vec<Outbound>,
    secrets: &'a [u64],
}

impl Ctx<'_> {
    fn fault_is(&self, behavior: FaultBehavior, point: ActivationPoint) -> bool {
        self.fault.is_some_and(|f| f.behavior == behavior && f.activation == point)
    }

    fn check_silence(&mut self, point: ActivationPoint) {
        if self.fault_is(FaultBehavior::Silent, point) {
            *self.silenced = true;
        }
    }
}

impl PartyState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        index: usize,
        address: Address,
        field: Field,
        params: CommitmentParams,
        config: EngineConfig,
        seed: [u8; 32],
        fault: Option<FaultSpec>,
        secret_inputs: Vec<u64>,
    ) -> PartyState {
        PartyState {
            index,
            address,
            field,
            params,
            config,
            rng: ChaCha8Rng::from_seed(seed),
            fault: fault.filter(|f| f.party == index),
            silenced: false,
            secret_inputs,
            sessions: BTreeMap::new(),
            outbox: Vec::new(),
        }
    }

    /// Ingests one committed block's events and returns everything the
    /// party wants to send.
    pub fn on_block(&mut self, height: u64, events: &[ChainEvent]) -> Vec<Outbound> {
        for s in self.sessions.values_mut() {
            s.height = height;
        }
        for ev in events {
            self.ingest(height, ev);
        }
        let ids: Vec<TxHash> = self.sessions.keys().copied().collect();
        for id in ids {
            let session = self.sessions.get_mut(&id).unwrap();
            if session.finished {
                continue;
            }
            let mut ctx = Ctx {
                field: &self.field,
                params: &self.params,
                config: &self.config,
                index: self.index,
                fault: self.fault,
                silenced: &mut self.silenced,
                rng: &mut self.rng,
                out: &mut self.outbox,
                secrets: &self.secret_inputs,
            };
            session.timeout_sweep(height, &mut ctx);
            session.progress(&mut ctx);
        }
        self.drain()
    }

    /// Ingests a point-to-point share delivery.
    pub fn on_share(&mut self, delivery: ShareDelivery) -> Vec<Outbound> {
        if let Some(session) = self.sessions.get_mut(&delivery.session) {
            if !session.finished {
                session.receive_share(&self.params, delivery.dealing, delivery.share);
                let mut ctx = Ctx {
                    field: &self.field,
                    params: &self.params,
                    config: &self.config,
                    index: self.index,
                    fault: self.fault,
                    silenced: &mut self.silenced,
                    rng: &mut self.rng,
                    out: &mut self.outbox,
                    secrets: &self.secret_inputs,
                };
                session.progress(&mut ctx);
            }
        }
        self.drain()
    }

    pub fn snapshot(&self, session: &TxHash) -> Option<SessionSnapshot> {
        let s = self.sessions.get(session)?;
        Some(SessionSnapshot {
            wire_shares: s.wires.iter().map(|(k, v)| (*k, v.share)).collect(),
            wire_commitments: s.wires.iter().map(|(k, v)| (*k, v.commitments.clone())).collect(),
            outputs: s.outputs.iter().map(|(k, v)| (*k, v.0)).collect(),
            attested: s.attest_sent,
            finished: s.finished,
        })
    }

    pub fn fault(&self) -> Option<FaultSpec> {
        self.fault
    }

    fn ingest(&mut self, height: u64, event: &ChainEvent) {
        match event {
            ChainEvent::SessionStart { session, circuit, committee, threshold, public_inputs, .. } => {
                if self.fault.is_some_and(|f| {
                    f.behavior == FaultBehavior::Silent
                        && f.activation == ActivationPoint::SessionStart
                }) {
                    self.silenced = true;
                }
                let mut s = Session::new(
                    *session,
                    circuit.clone(),
                    committee.clone(),
                    *threshold,
                    public_inputs.iter().map(|v| self.field.elem(*v)).collect(),
                    height,
                );
                s.init_expected(height);
                self.sessions.insert(*session, s);
            }
            ChainEvent::Broadcast { session, from, msg } => {
                if let Some(s) = self.sessions.get_mut(session) {
                    if !s.finished {
                        s.receive_broadcast(
                            &self.field,
                            &self.params,
                            &self.config,
                            self.index,
                            height,
                            *from,
                            msg,
                        );
                    }
                }
            }
            ChainEvent::TaskApproved { session, task } => {
                if let Some(s) = self.sessions.get_mut(session) {
                    if !s.finished {
                        s.on_approval(height, *task);
                    }
                }
            }
            ChainEvent::SessionFinished { session } => {
                if let Some(s) = self.sessions.get_mut(session) {
                    s.finished = true;
                }
            }
        }
    }

    fn drain(&mut self) -> Vec<Outbound> {
        if self.silenced {
            self.outbox.clear();
            return Vec::new();
        }
        let mut out = std::mem::take(&mut self.outbox);
        let key = |o: &Outbound| match o {
            Outbound::Broadcast { msg: MpcBroadcast::Dealings { .. }, .. } => 0u8,
            Outbound::Share { .. } => 1,
            Outbound::Broadcast { msg: MpcBroadcast::Ready { .. }, .. } => 2,
            Outbound::Broadcast { msg: MpcBroadcast::GateDone { .. }, .. } => 3,
            Outbound::Broadcast { msg: MpcBroadcast::OpenShares { .. }, .. } => 4,
            Outbound::Attest { .. } => 5,
            Outbound::Broadcast { msg: MpcBroadcast::Dispute { .. }, .. } => 6,
            Outbound::Broadcast { msg: MpcBroadcast::DisputeOpening { .. }, .. } => 7,
            Outbound::Broadcast { msg: MpcBroadcast::Accuse { .. }, .. } => 8,
        };
        out.sort_by_key(key);
        // merge same-kind broadcasts for one session into a single
        // transaction, so wide phases do not flood a block
        let mut merged: Vec<Outbound> = Vec::with_capacity(out.len());
        for o in out {
            match (merged.last_mut(), o) {
                (
                    Some(Outbound::Broadcast { session: s1, msg: MpcBroadcast::Dealings { batch } }),
                    Outbound::Broadcast { session: s2, msg: MpcBroadcast::Dealings { batch: more } },
                ) if *s1 == s2 => batch.extend(more),
                (
                    Some(Outbound::Broadcast { session: s1, msg: MpcBroadcast::Ready { tasks } }),
                    Outbound::Broadcast { session: s2, msg: MpcBroadcast::Ready { tasks: more } },
                ) if *s1 == s2 => tasks.extend(more),
                (
                    Some(Outbound::Broadcast { session: s1, msg: MpcBroadcast::GateDone { tasks } }),
                    Outbound::Broadcast { session: s2, msg: MpcBroadcast::GateDone { tasks: more } },
                ) if *s1 == s2 => tasks.extend(more),
                (
                    Some(Outbound::Broadcast { session: s1, msg: MpcBroadcast::OpenShares { batch } }),
                    Outbound::Broadcast { session: s2, msg: MpcBroadcast::OpenShares { batch: more } },
                ) if *s1 == s2 => batch.extend(more),
                (_, o) => merged.push(o),
            }
        }
        merged
    }
}

impl Session {
    fn new(
        id: TxHash,
        circuit: Arc<Circuit>,
        committee: Vec<Address>,
        t: usize,
        public_inputs: Vec<FieldElement>,
        height: u64,
    ) -> Session {
        let by_address = committee.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        let n = committee.len();
        Session {
            id,
            circuit,
            committee,
            by_address,
            n,
            t,
            public_inputs,
            height,
            finished: false,
            wires: BTreeMap::new(),
            public_values: BTreeMap::new(),
            openings: BTreeMap::new(),
            pending_openings: Vec::new(),
            bad_openers: BTreeMap::new(),
            dealings: BTreeMap::new(),
            orphan_shares: BTreeMap::new(),
            sent_shares: BTreeMap::new(),
            tasks: BTreeMap::new(),
            compares: BTreeMap::new(),
            outputs: BTreeMap::new(),
            deals_done: BTreeSet::new(),
            ready_sent: BTreeSet::new(),
            done_sent: BTreeSet::new(),
            opens_sent: BTreeSet::new(),
            disputes_sent: BTreeSet::new(),
            responses_sent: BTreeSet::new(),
            accuse_sent: BTreeSet::new(),
            attest_sent: false,
        }
    }

    /// Registers input dealings, circuit multiplication tasks and
    /// comparison plans.
    fn init_expected(&mut self, height: u64) {
        for (party, slots) in self.circuit.secret_input_shape.iter().enumerate() {
            for slot in 0..*slots {
                self.dealings
                    .insert(DealingId::Input { party, slot }, DealingState::new(party, height));
            }
        }
        for gate in &self.circuit.gates {
            match &gate.kind {
                GateKind::Mult(a, b) => {
                    self.tasks.insert(
                        TaskId { gate: gate.id, sub: SubTask::CircuitMult },
                        TaskState::new(
                            WireId::gate_value(gate.id),
                            LinExpr::wire(wire_of(a)),
                            LinExpr::wire(wire_of(b)),
                        ),
                    );
                }
                GateKind::Compare { val_a, id_a, val_b, id_b } => {
                    let side = |op: &IdOperand| match op {
                        IdOperand::Const(c) => IdSide::Const(*c),
                        IdOperand::Wire(w) => IdSide::Wire(wire_of(w)),
                    };
                    self.compares.insert(
                        gate.id,
                        CompareState {
                            spec: CompareSpec {
                                val_a: wire_of(val_a),
                                val_b: wire_of(val_b),
                                id_a: side(id_a),
                                id_b: side(id_b),
                            },
                            activated: false,
                            round: Vec::new(),
                            masked: None,
                            borrow_planned: false,
                        },
                    );
                }
                _ => {}
            }
        }
    }

    fn receive_share(&mut self, params: &CommitmentParams, dealing: DealingId, share: Share) {
        let Some(ds) = self.dealings.get_mut(&dealing) else {
            self.orphan_shares.entry(dealing).or_insert(share);
            return;
        };
        if ds.my_share.is_some() || ds.excluded {
            return;
        }
        match &ds.commitments {
            Some((_, cs)) => {
                if sss::verify_share(params, cs, &share) {
                    ds.my_share = Some(share);
                } else {
                    // hold the evidence; the next sweep files a dispute
                    ds.pending_share = Some(share);
                }
            }
            None => ds.pending_share = Some(share),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn receive_dealing(
        &mut self,
        field: &Field,
        params: &CommitmentParams,
        w: u64,
        sender: usize,
        height: u64,
        dealing: &DealingId,
        commitments: &[Commitment],
    ) {
        if dealing.dealer() != sender {
            return;
        }
        let (t, n) = (self.t, self.n);
        let Some(ds) = self.dealings.get_mut(dealing) else {
            return;
        };
        if ds.commitments.is_some() || ds.excluded || height > ds.expected_from + w {
            return;
        }
        ds.degree_ok = commitments.len() == n
            && sss::commitments_degree_consistent(field, params, commitments, t);
        ds.commitments = Some((height, commitments.to_vec()));
        if !ds.degree_ok {
            return;
        }
        let claim = ds.pending_share.take().or_else(|| self.orphan_shares.remove(dealing));
        if let Some(share) = claim {
            let ds = self.dealings.get_mut(dealing).unwrap();
            if sss::verify_share(params, commitments, &share) {
                ds.my_share = Some(share);
            } else {
                ds.pending_share = Some(share);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn receive_broadcast(
        &mut self,
        field: &Field,
        params: &CommitmentParams,
        config: &EngineConfig,
        me: usize,
        height: u64,
        from: Address,
        msg: &MpcBroadcast,
    ) {
        let Some(sender) = self.by_address.get(&from).copied() else {
            return;
        };
        let w = config.dispute_window;
        match msg {
            MpcBroadcast::Dealings { batch } => {
                for (dealing, commitments) in batch {
                    self.receive_dealing(field, params, w, sender, height, dealing, commitments);
                }
            }
            MpcBroadcast::Dispute { dealing, .. } => {
                let Some(ds) = self.dealings.get_mut(dealing) else {
                    return;
                };
                if ds.excluded || sender == ds.dealer {
                    return;
                }
                // admissible only inside the window after the commitments
                // committed (or while they are still missing)
                let admissible = match ds.commitments {
                    Some((hc, _)) => height <= hc + w,
                    None => true,
                };
                if admissible {
                    ds.disputes
                        .entry(sender)
                        .or_insert(DisputeState { filed: height, resolved: None });
                }
            }
            MpcBroadcast::DisputeOpening { dealing, index, value, randomness } => {
                let Some(ds) = self.dealings.get_mut(dealing) else {
                    return;
                };
                if sender != ds.dealer || ds.excluded {
                    return;
                }
                let Some((_, commitments)) = ds.commitments.clone() else {
                    return;
                };
                let Some(dispute) = ds.disputes.get_mut(index) else {
                    return;
                };
                if dispute.resolved.is_some() || height > dispute.filed + w {
                    return;
                }
                let opened =
                    Share { party_index: index + 1, value: *value, randomness: *randomness };
                if sss::verify_share(params, &commitments, &opened) {
                    dispute.resolved = Some(DisputeResolution::Valid);
                    // the point is public now; the disputer adopts it
                    if *index == me && ds.my_share.is_none() {
                        ds.my_share = Some(opened);
                    }
                } else {
                    // the dealer stands by values off its own commitments;
                    // the sweep will exclude and accuse
                    dispute.resolved = Some(DisputeResolution::Cheater);
                }
            }
            MpcBroadcast::OpenShares { batch } => {
                for (wire, value, randomness) in batch {
                    self.pending_openings.push((sender, *wire, *value, *randomness));
                }
            }
            // readiness, completion and accusation tallies live in the
            // transaction manager; parties do not consume them
            MpcBroadcast::Ready { .. } | MpcBroadcast::GateDone { .. } | MpcBroadcast::Accuse { .. } => {}
        }
    }

    fn on_approval(&mut self, height: u64, task: TaskId) {
        if let Some(ts) = self.tasks.get_mut(&task) {
            if !ts.approved {
                ts.approved = true;
                for dealer in 0..self.n {
                    self.dealings
                        .entry(DealingId::MultShare { task, dealer })
                        .or_insert_with(|| DealingState::new(dealer, height));
                }
            }
        }
    }

    /// Height-driven bookkeeping: exclusions with accusations, dispute
    /// filings, and dispute responses for own dealings.
    fn timeout_sweep(&mut self, height: u64, ctx: &mut Ctx) {
        let w = ctx.config.dispute_window;
        let mut accusations: Vec<usize> = Vec::new();
        let mut to_dispute: Vec<(DealingId, bool)> = Vec::new();
        for (id, ds) in self.dealings.iter_mut() {
            if ds.excluded {
                continue;
            }
            let Some((hc, _)) = ds.commitments else {
                if height >= ds.expected_from + w {
                    ds.excluded = true;
                    accusations.push(ds.dealer);
                }
                continue;
            };
            if !ds.degree_ok {
                ds.excluded = true;
                accusations.push(ds.dealer);
                continue;
            }
            // a failed share is disputed at once; a missing one at the last
            // admissible height, so slow links get the benefit of the doubt
            if ds.dealer != ctx.index && ds.my_share.is_none() && !self.disputes_sent.contains(id) {
                let bad = ds.pending_share.is_some();
                if bad || height + 1 >= hc + w {
                    to_dispute.push((*id, !bad));
                    self.disputes_sent.insert(*id);
                }
            }
            let mut exclude = false;
            for dispute in ds.disputes.values_mut() {
                match dispute.resolved {
                    Some(DisputeResolution::Cheater) => exclude = true,
                    None if height >= dispute.filed + w => {
                        dispute.resolved = Some(DisputeResolution::Cheater);
                        exclude = true;
                    }
                    _ => {}
                }
            }
            if exclude {
                ds.excluded = true;
                accusations.push(ds.dealer);
            }
        }
        for (dealing, missing) in to_dispute {
            ctx.out.push(Outbound::Broadcast {
                session: self.id,
                msg: MpcBroadcast::Dispute { dealing, missing_share: missing },
            });
        }
        for dealer in accusations {
            self.accuse(ctx, dealer);
        }
        // answer disputes against own dealings with the sent values
        let mut responses = Vec::new();
        for (id, ds) in self.dealings.iter() {
            if ds.dealer != ctx.index || ds.excluded {
                continue;
            }
            for (&disputer, dispute) in &ds.disputes {
                if dispute.resolved.is_none() && !self.responses_sent.contains(&(*id, disputer)) {
                    if let Some(sent) = self.sent_shares.get(id) {
                        responses.push((*id, disputer, sent[disputer]));
                    }
                }
            }
        }
        for (dealing, disputer, share) in responses {
            self.responses_sent.insert((dealing, disputer));
            ctx.out.push(Outbound::Broadcast {
                session: self.id,
                msg: MpcBroadcast::DisputeOpening {
                    dealing,
                    index: disputer,
                    value: share.value,
                    randomness: share.randomness,
                },
            });
        }
    }

    fn accuse(&mut self, ctx: &mut Ctx, party: usize) {
        if party != ctx.index && self.accuse_sent.insert(party) {
            ctx.out
                .push(Outbound::Broadcast { session: self.id, msg: MpcBroadcast::Accuse { party } });
        }
    }

    /// Fixpoint driver: applies protocol rules until nothing new fires.
    /// Rules iterate in key order, so all honest parties make the same
    /// decisions in the same order.
    fn progress(&mut self, ctx: &mut Ctx) {
        loop {
            let mut moved = false;
            moved |= self.deal_inputs(ctx);
            moved |= self.settle_input_wires(ctx);
            moved |= self.derive_local_gates(ctx);
            moved |= self.advance_compares(ctx);
            moved |= self.settle_rand_sums(ctx);
            moved |= self.announce_ready_tasks(ctx);
            moved |= self.deal_products(ctx);
            moved |= self.finalize_mults(ctx);
            moved |= self.open_wires(ctx);
            moved |= self.apply_openings(ctx);
            moved |= self.collect_outputs(ctx);
            if !moved {
                break;
            }
        }
        self.maybe_attest(ctx);
    }

    fn deal_inputs(&mut self, ctx: &mut Ctx) -> bool {
        let shape = self.circuit.secret_input_shape.get(ctx.index).copied().unwrap_or(0);
        let mut moved = false;
        for slot in 0..shape {
            let id = DealingId::Input { party: ctx.index, slot };
            if self.deals_done.contains(&id) {
                continue;
            }
            ctx.check_silence(ActivationPoint::InputDealing);
            let secret = ctx.field.elem(ctx.secrets.get(slot).copied().unwrap_or(0));
            let corrupt =
                ctx.fault_is(FaultBehavior::InconsistentDealing, ActivationPoint::InputDealing);
            self.emit_dealing(ctx, id, secret, corrupt);
            moved = true;
        }
        moved
    }

    /// Deals a VSS sharing: commitments on chain, shares point-to-point.
    /// Under the inconsistent-dealer fault the sent values are shifted off
    /// the committed polynomial, and the dealer stands by the sent values
    /// when disputed.
    fn emit_dealing(&mut self, ctx: &mut Ctx, id: DealingId, secret: FieldElement, corrupt: bool) {
        let dealing = sss::deal(ctx.field, ctx.params, secret, self.t, self.n, ctx.rng)
            .expect("committee sized n >= 3t+1");
        let mut sent = dealing.shares.clone();
        if corrupt {
            for share in sent.iter_mut() {
                if share.party_index != ctx.index + 1 {
                    share.value =
                        ctx.field.add(share.value, ctx.field.elem(share.party_index as u64));
                }
            }
        }
        self.deals_done.insert(id);
        self.sent_shares.insert(id, sent.clone());
        if let Some(ds) = self.dealings.get_mut(&id) {
            // a dealer trusts its own polynomial
            ds.my_share = Some(dealing.shares[ctx.index]);
        }
        ctx.out.push(Outbound::Broadcast {
            session: self.id,
            msg: MpcBroadcast::Dealings { batch: vec![(id, dealing.commitments)] },
        });
        for (i, addr) in self.committee.iter().enumerate() {
            if i != ctx.index {
                ctx.out.push(Outbound::Share {
                    to: *addr,
                    delivery: ShareDelivery { session: self.id, dealing: id, share: sent[i] },
                });
            }
        }
    }

    fn settle_input_wires(&mut self, ctx: &mut Ctx) -> bool {
        let w = ctx.config.dispute_window;
        let circuit = Arc::clone(&self.circuit);
        let mut moved = false;
        for gate in &circuit.gates {
            let wire = WireId::gate_value(gate.id);
            if self.wires.contains_key(&wire) {
                continue;
            }
            match gate.kind {
                GateKind::InputSecret { party, slot } => {
                    let id = DealingId::Input { party, slot };
                    let Some(ds) = self.dealings.get(&id) else { continue };
                    if ds.final_valid(self.height, w) {
                        if let (Some(share), Some((_, cs))) = (ds.my_share, &ds.commitments) {
                            self.wires
                                .insert(wire, WireState { share, commitments: cs.clone() });
                            moved = true;
                        }
                    }
                }
                GateKind::InputPublic { slot } => {
                    let value = self.public_inputs[slot];
                    self.insert_constant_wire(ctx, wire, value);
                    moved = true;
                }
                _ => {}
            }
        }
        moved
    }

    /// A public constant as a degenerate sharing: every share equals the
    /// constant, randomness zero.
    fn insert_constant_wire(&mut self, ctx: &Ctx, wire: WireId, value: FieldElement) {
        let share = Share { party_index: ctx.index + 1, value, randomness: FieldElement::ZERO };
        let c = ctx.params.commit(value, FieldElement::ZERO);
        self.wires.insert(wire, WireState { share, commitments: vec![c; self.n] });
    }

    /// Evaluates an affine expression into a full wire state (share plus
    /// commitment vector), if all referenced wires exist.
    fn derive_affine(&self, ctx: &Ctx, expr: &LinExpr) -> Option<WireState> {
        let mut value = expr.constant;
        let mut randomness = FieldElement::ZERO;
        let mut commitments = vec![ctx.params.commit(expr.constant, FieldElement::ZERO); self.n];
        for (coeff, wire) in &expr.terms {
            let ws = self.wires.get(wire)?;
            value = ctx.field.add(value, ctx.field.mul(*coeff, ws.share.value));
            randomness = ctx.field.add(randomness, ctx.field.mul(*coeff, ws.share.randomness));
            for (acc, c) in commitments.iter_mut().zip(&ws.commitments) {
                *acc = ctx.params.combine(*acc, ctx.params.scale(*c, *coeff));
            }
        }
        Some(WireState {
            share: Share { party_index: ctx.index + 1, value, randomness },
            commitments,
        })
    }

    fn try_derive(&mut self, ctx: &Ctx, wire: WireId, expr: &LinExpr) -> bool {
        if self.wires.contains_key(&wire) {
            return false;
        }
        match self.derive_affine(ctx, expr) {
            Some(ws) => {
                self.wires.insert(wire, ws);
                true
            }
            None => false,
        }
    }

    /// ADD and MULT_BY_CONST complete locally through the homomorphism.
    fn derive_local_gates(&mut self, ctx: &mut Ctx) -> bool {
        let circuit = Arc::clone(&self.circuit);
        let mut moved = false;
        for gate in &circuit.gates {
            let wire = WireId::gate_value(gate.id);
            if self.wires.contains_key(&wire) {
                continue;
            }
            match &gate.kind {
                GateKind::Add(a, b) => {
                    let expr = LinExpr {
                        constant: FieldElement::ZERO,
                        terms: vec![(FieldElement::ONE, wire_of(a)), (FieldElement::ONE, wire_of(b))],
                    };
                    moved |= self.try_derive(ctx, wire, &expr);
                }
                GateKind::MultByConst { input, public_ref } => {
                    let c = self.public_inputs[*public_ref];
                    let expr =
                        LinExpr { constant: FieldElement::ZERO, terms: vec![(c, wire_of(input))] };
                    moved |= self.try_derive(ctx, wire, &expr);
                }
                _ => {}
            }
        }
        moved
    }

    fn nbits(&self, ctx: &Ctx) -> u16 {
        ctx.field.bit_width() as u16 + super::STAT_SEC as u16
    }

    /// Drives every comparison plan as far as possible.
    fn advance_compares(&mut self, ctx: &mut Ctx) -> bool {
        let mut moved = false;
        let gates: Vec<GateId> = self.compares.keys().copied().collect();
        let k = ctx.field.bit_width() as u16;
        let nbits = self.nbits(ctx);
        for gate in gates {
            let spec = self.compares[&gate].spec.clone();
            if !self.compares[&gate].activated {
                let mut needed = vec![spec.val_a, spec.val_b];
                if let IdSide::Wire(w) = spec.id_a {
                    needed.push(w);
                }
                if let IdSide::Wire(w) = spec.id_b {
                    needed.push(w);
                }
                if needed.iter().all(|w| self.wires.contains_key(w)) {
                    let st = self.compares.get_mut(&gate).unwrap();
                    st.activated = true;
                    st.round = vec![0; nbits as usize];
                    for bit in 0..nbits {
                        self.start_lottery(ctx, gate, bit, 0);
                    }
                    moved = true;
                }
                continue;
            }
            // opened squares settle bits (or trigger a lottery rerun)
            for bit in 0..nbits {
                let round = self.compares[&gate].round[bit as usize];
                let bit_wire = WireId::Bit { gate, bit };
                if self.wires.contains_key(&bit_wire) {
                    continue;
                }
                let sq_wire = WireId::Square { gate, bit, round };
                let Some(sq) = self.public_values.get(&sq_wire).copied() else {
                    continue;
                };
                if let Some(root) = ctx.field.sqrt(sq).filter(|r| !r.is_zero()) {
                    // bit = (v / root + 1) / 2
                    let inv2 = ctx.field.inv(ctx.field.elem(2)).unwrap();
                    let scale = ctx.field.mul(ctx.field.inv(root).unwrap(), inv2);
                    let expr = LinExpr {
                        constant: inv2,
                        terms: vec![(scale, WireId::RandSum { gate, bit, round })],
                    };
                    moved |= self.try_derive(ctx, bit_wire, &expr);
                } else {
                    // square opened to zero: rerun this bit's lottery
                    self.compares.get_mut(&gate).unwrap().round[bit as usize] = round + 1;
                    self.start_lottery(ctx, gate, bit, round + 1);
                    moved = true;
                }
            }
            // the mask needs every bit plus both operands
            let masked_wire = WireId::Masked { gate };
            if !self.wires.contains_key(&masked_wire)
                && (0..nbits).all(|bit| self.wires.contains_key(&WireId::Bit { gate, bit }))
            {
                let mut terms = vec![
                    (FieldElement::ONE, spec.val_a),
                    (ctx.field.neg(FieldElement::ONE), spec.val_b),
                ];
                for bit in 0..nbits {
                    terms.push((ctx.field.elem(1u64 << bit), WireId::Bit { gate, bit }));
                }
                let expr = LinExpr { constant: ctx.field.elem(1u64 << k), terms };
                moved |= self.try_derive(ctx, masked_wire, &expr);
            }
            if self.compares[&gate].masked.is_none() {
                if let Some(m) = self.public_values.get(&masked_wire) {
                    debug_assert!(m.0 < 1u64 << (nbits + 1), "mask out of range");
                    self.compares.get_mut(&gate).unwrap().masked = Some(m.0);
                    moved = true;
                }
            }
            let Some(m_int) = self.compares[&gate].masked else {
                continue;
            };
            let m_low = m_int & ((1u64 << k) - 1);
            if !self.compares[&gate].borrow_planned {
                self.plan_borrow(ctx, gate, k, m_low);
                self.compares.get_mut(&gate).unwrap().borrow_planned = true;
                moved = true;
            }
            moved |= self.assemble_compare(ctx, gate, k, m_low, &spec);
        }
        moved
    }

    /// Starts one bit lottery: everyone contributes a random sharing; the
    /// settled sum is squared (a scheduled multiplication) and opened.
    fn start_lottery(&mut self, ctx: &mut Ctx, gate: GateId, bit: u16, round: u16) {
        for dealer in 0..self.n {
            self.dealings.insert(
                DealingId::RandContrib { gate, bit, round, dealer },
                DealingState::new(dealer, self.height),
            );
        }
        let sum = WireId::RandSum { gate, bit, round };
        self.tasks.insert(
            TaskId { gate, sub: SubTask::Square { bit, round } },
            TaskState::new(
                WireId::Square { gate, bit, round },
                LinExpr::wire(sum),
                LinExpr::wire(sum),
            ),
        );
        let id = DealingId::RandContrib { gate, bit, round, dealer: ctx.index };
        if !self.deals_done.contains(&id) {
            ctx.check_silence(ActivationPoint::RandContribution);
            let secret = ctx.field.random(ctx.rng);
            let corrupt =
                ctx.fault_is(FaultBehavior::InconsistentDealing, ActivationPoint::RandContribution);
            self.emit_dealing(ctx, id, secret, corrupt);
        }
    }

    fn settle_rand_sums(&mut self, ctx: &mut Ctx) -> bool {
        let w = ctx.config.dispute_window;
        let mut moved = false;
        let nbits = self.nbits(ctx);
        let gates: Vec<GateId> = self.compares.keys().copied().collect();
        for gate in gates {
            if !self.compares[&gate].activated {
                continue;
            }
            for bit in 0..nbits {
                let round = self.compares[&gate].round[bit as usize];
                let wire = WireId::RandSum { gate, bit, round };
                if self.wires.contains_key(&wire) {
                    continue;
                }
                let ids: Vec<DealingId> = (0..self.n)
                    .map(|dealer| DealingId::RandContrib { gate, bit, round, dealer })
                    .collect();
                if let Some(ws) = self.combine_settled_dealings(ctx, &ids, w) {
                    self.wires.insert(wire, ws);
                    moved = true;
                }
            }
        }
        moved
    }

    /// Unweighted sum over the valid subset of a dealing family, once every
    /// candidate is settled and our own shares are in hand.
    fn combine_settled_dealings(&self, ctx: &Ctx, ids: &[DealingId], w: u64) -> Option<WireState> {
        let mut valid = Vec::new();
        for id in ids {
            let ds = self.dealings.get(id)?;
            if !ds.settled(self.height, w) {
                return None;
            }
            if ds.final_valid(self.height, w) {
                valid.push(ds);
            }
        }
        if valid.is_empty() {
            return None;
        }
        let mut value = FieldElement::ZERO;
        let mut randomness = FieldElement::ZERO;
        let mut commitments = vec![ctx.params.identity(); self.n];
        for ds in valid {
            let share = ds.my_share?;
            let (_, cs) = ds.commitments.as_ref()?;
            value = ctx.field.add(value, share.value);
            randomness = ctx.field.add(randomness, share.randomness);
            for (acc, c) in commitments.iter_mut().zip(cs) {
                *acc = ctx.params.combine(*acc, *c);
            }
        }
        Some(WireState {
            share: Share { party_index: ctx.index + 1, value, randomness },
            commitments,
        })
    }

    /// Creates the equality-chain and borrow-term tasks once the mask is
    /// public.
    fn plan_borrow(&mut self, ctx: &mut Ctx, gate: GateId, k: u16, m_low: u64) {
        // equality chain e_j = e_{j+1} · eqbit_j for j = k-2 .. 1; e_{k-1}
        // itself is affine and derived in assemble_compare
        for bit in (1..k.saturating_sub(1)).rev() {
            self.tasks.insert(
                TaskId { gate, sub: SubTask::EqChain { bit } },
                TaskState::new(
                    WireId::Eq { gate, bit },
                    LinExpr::wire(WireId::Eq { gate, bit: bit + 1 }),
                    eqbit_expr(ctx.field, gate, bit, m_low),
                ),
            );
        }
        // borrow terms r_j · e_{j+1} wherever the mask bit is zero; the top
        // bit's term is affine (e_k = 1) and handled in assemble_compare
        for bit in 0..k.saturating_sub(1) {
            if m_low >> bit & 1 == 0 {
                self.tasks.insert(
                    TaskId { gate, sub: SubTask::Term { bit } },
                    TaskState::new(
                        WireId::Term { gate, bit },
                        LinExpr::wire(WireId::Bit { gate, bit }),
                        LinExpr::wire(WireId::Eq { gate, bit: bit + 1 }),
                    ),
                );
            }
        }
    }

    /// Derives the affine tail of a comparison: top equality wire, the
    /// comparison bit from the borrow, selection products and both outputs.
    fn assemble_compare(
        &mut self,
        ctx: &mut Ctx,
        gate: GateId,
        k: u16,
        m_low: u64,
        spec: &CompareSpec,
    ) -> bool {
        let mut moved = false;
        if k >= 2 {
            let top = k - 1;
            let expr = eqbit_expr(ctx.field, gate, top, m_low);
            moved |= self.try_derive(ctx, WireId::Eq { gate, bit: top }, &expr);
        }
        // borrow u = Σ term_j (+ bit_{k-1} when its mask bit is zero)
        let mut borrow_terms: Vec<WireId> = Vec::new();
        for bit in 0..k.saturating_sub(1) {
            if m_low >> bit & 1 == 0 {
                borrow_terms.push(WireId::Term { gate, bit });
            }
        }
        if k >= 1 && m_low >> (k - 1) & 1 == 0 {
            borrow_terms.push(WireId::Bit { gate, bit: k - 1 });
        }
        let cmp_wire = WireId::CmpBit { gate };
        if !self.wires.contains_key(&cmp_wire)
            && borrow_terms.iter().all(|w| self.wires.contains_key(w))
        {
            // c = inv(2^k) · (2^k - m' + a - b + Σ 2^j r_j) - u
            let two_k = ctx.field.elem(1u64 << k);
            let inv2k = ctx.field.inv(two_k).unwrap();
            let mut terms = vec![
                (inv2k, spec.val_a),
                (ctx.field.neg(inv2k), spec.val_b),
            ];
            for bit in 0..k {
                terms.push((
                    ctx.field.mul(inv2k, ctx.field.elem(1u64 << bit)),
                    WireId::Bit { gate, bit },
                ));
            }
            for w in &borrow_terms {
                terms.push((ctx.field.neg(FieldElement::ONE), *w));
            }
            let constant = ctx.field.mul(inv2k, ctx.field.sub(two_k, ctx.field.elem(m_low)));
            moved |= self.try_derive(ctx, cmp_wire, &LinExpr { constant, terms });
        }
        if !self.wires.contains_key(&cmp_wire) {
            return moved;
        }
        // selection products consume scheduled multiplications
        let selval = TaskId { gate, sub: SubTask::SelVal };
        if !self.tasks.contains_key(&selval) {
            let diff = LinExpr {
                constant: FieldElement::ZERO,
                terms: vec![
                    (FieldElement::ONE, spec.val_a),
                    (ctx.field.neg(FieldElement::ONE), spec.val_b),
                ],
            };
            self.tasks.insert(
                selval,
                TaskState::new(WireId::SelVal { gate }, LinExpr::wire(cmp_wire), diff),
            );
            moved = true;
        }
        // max = b + c · (a - b)
        let out_val_expr = LinExpr {
            constant: FieldElement::ZERO,
            terms: vec![
                (FieldElement::ONE, spec.val_b),
                (FieldElement::ONE, WireId::SelVal { gate }),
            ],
        };
        moved |= self.try_derive(ctx, WireId::gate_value(gate), &out_val_expr);
        // max_id: affine for public leaf ids, one more product otherwise
        match (spec.id_a, spec.id_b) {
            (IdSide::Const(ida), IdSide::Const(idb)) => {
                let ida = ctx.field.elem(ida);
                let idb = ctx.field.elem(idb);
                let expr =
                    LinExpr { constant: idb, terms: vec![(ctx.field.sub(ida, idb), cmp_wire)] };
                moved |= self.try_derive(ctx, WireId::gate_id(gate), &expr);
            }
            _ => {
                let ea = id_side_expr(ctx.field, spec.id_a);
                let eb = id_side_expr(ctx.field, spec.id_b);
                let selid = TaskId { gate, sub: SubTask::SelId };
                if !self.tasks.contains_key(&selid) {
                    let mut diff_terms = ea.terms.clone();
                    for (c, w) in &eb.terms {
                        diff_terms.push((ctx.field.neg(*c), *w));
                    }
                    let diff = LinExpr {
                        constant: ctx.field.sub(ea.constant, eb.constant),
                        terms: diff_terms,
                    };
                    self.tasks.insert(
                        selid,
                        TaskState::new(WireId::SelId { gate }, LinExpr::wire(cmp_wire), diff),
                    );
                    moved = true;
                }
                let mut terms = eb.terms.clone();
                terms.push((FieldElement::ONE, WireId::SelId { gate }));
                let expr = LinExpr { constant: eb.constant, terms };
                moved |= self.try_derive(ctx, WireId::gate_id(gate), &expr);
            }
        }
        moved
    }

    /// Broadcasts readiness for tasks whose operand wires are in.
    fn announce_ready_tasks(&mut self, ctx: &mut Ctx) -> bool {
        let ready: Vec<TaskId> = self
            .tasks
            .iter()
            .filter(|(id, ts)| {
                !self.ready_sent.contains(id)
                    && ts.a.wires().chain(ts.b.wires()).all(|w| self.wires.contains_key(&w))
            })
            .map(|(id, _)| *id)
            .collect();
        let moved = !ready.is_empty();
        for task in ready {
            self.ready_sent.insert(task);
            ctx.out.push(Outbound::Broadcast {
                session: self.id,
                msg: MpcBroadcast::Ready { tasks: vec![task] },
            });
        }
        moved
    }

    /// Once approved and locally ready, re-shares the local product.
    fn deal_products(&mut self, ctx: &mut Ctx) -> bool {
        let due: Vec<(TaskId, FieldElement)> = self
            .tasks
            .iter()
            .filter(|(_, ts)| ts.approved && !ts.dealt)
            .filter_map(|(id, ts)| {
                let a = self.eval_expr(ctx, &ts.a)?;
                let b = self.eval_expr(ctx, &ts.b)?;
                Some((*id, ctx.field.mul(a, b)))
            })
            .collect();
        let moved = !due.is_empty();
        for (task, product) in due {
            ctx.check_silence(ActivationPoint::SubDealing);
            let corrupt =
                ctx.fault_is(FaultBehavior::InconsistentDealing, ActivationPoint::SubDealing);
            let id = DealingId::MultShare { task, dealer: ctx.index };
            self.emit_dealing(ctx, id, product, corrupt);
            self.tasks.get_mut(&task).unwrap().dealt = true;
        }
        moved
    }

    /// Local share value of an affine expression.
    fn eval_expr(&self, ctx: &Ctx, expr: &LinExpr) -> Option<FieldElement> {
        let mut acc = expr.constant;
        for (c, w) in &expr.terms {
            acc = ctx.field.add(acc, ctx.field.mul(*c, self.wires.get(w)?.share.value));
        }
        Some(acc)
    }

    /// Recombines settled product dealings over the first 2t+1 valid
    /// dealers with Lagrange weights at zero.
    fn finalize_mults(&mut self, ctx: &mut Ctx) -> bool {
        let w = ctx.config.dispute_window;
        let mut moved = false;
        let candidates: Vec<TaskId> = self
            .tasks
            .iter()
            .filter(|(_, ts)| ts.approved && !ts.finalized)
            .map(|(id, _)| *id)
            .collect();
        for task in candidates {
            let mut valid: Vec<usize> = Vec::new();
            let mut settled = true;
            for dealer in 0..self.n {
                let Some(ds) = self.dealings.get(&DealingId::MultShare { task, dealer }) else {
                    settled = false;
                    break;
                };
                if !ds.settled(self.height, w) {
                    settled = false;
                    break;
                }
                if ds.final_valid(self.height, w) {
                    valid.push(dealer);
                }
            }
            if !settled || valid.len() < 2 * self.t + 1 {
                continue;
            }
            let dealer_set = &valid[..2 * self.t + 1];
            let xs: Vec<FieldElement> =
                dealer_set.iter().map(|d| ctx.field.elem(*d as u64 + 1)).collect();
            let weights = lagrange_coefficients(ctx.field, &xs, FieldElement::ZERO)
                .expect("distinct dealer indices");
            let mut value = FieldElement::ZERO;
            let mut randomness = FieldElement::ZERO;
            let mut commitments = vec![ctx.params.identity(); self.n];
            let mut complete = true;
            for (lambda, dealer) in weights.iter().zip(dealer_set) {
                let ds = &self.dealings[&DealingId::MultShare { task, dealer: *dealer }];
                let Some(share) = ds.my_share else {
                    complete = false;
                    break;
                };
                let (_, cs) = ds.commitments.as_ref().unwrap();
                value = ctx.field.add(value, ctx.field.mul(*lambda, share.value));
                randomness = ctx.field.add(randomness, ctx.field.mul(*lambda, share.randomness));
                for (acc, c) in commitments.iter_mut().zip(cs) {
                    *acc = ctx.params.combine(*acc, ctx.params.scale(*c, *lambda));
                }
            }
            if !complete {
                continue;
            }
            let ts = self.tasks.get_mut(&task).unwrap();
            ts.finalized = true;
            let out = ts.out;
            self.wires.insert(
                out,
                WireState {
                    share: Share { party_index: ctx.index + 1, value, randomness },
                    commitments,
                },
            );
            if self.done_sent.insert(task) {
                ctx.out.push(Outbound::Broadcast {
                    session: self.id,
                    msg: MpcBroadcast::GateDone { tasks: vec![task] },
                });
            }
            moved = true;
        }
        moved
    }

    /// Publicly opens squares, masks, and output sources.
    fn open_wires(&mut self, ctx: &mut Ctx) -> bool {
        let mut wanted: Vec<(WireId, ActivationPoint)> = Vec::new();
        for wire in self.wires.keys() {
            match wire {
                WireId::Square { .. } => wanted.push((*wire, ActivationPoint::SquareOpening)),
                WireId::Masked { .. } => wanted.push((*wire, ActivationPoint::MaskedOpening)),
                _ => {}
            }
        }
        let circuit = Arc::clone(&self.circuit);
        for gate in &circuit.gates {
            if let GateKind::Output { src, .. } = &gate.kind {
                let w = wire_of(src);
                if self.wires.contains_key(&w) {
                    wanted.push((w, ActivationPoint::OutputOpening));
                }
            }
        }
        let mut moved = false;
        for (wire, point) in wanted {
            if !self.opens_sent.insert(wire) {
                continue;
            }
            ctx.check_silence(point);
            let ws = &self.wires[&wire];
            let mut value = ws.share.value;
            let randomness = ws.share.randomness;
            if ctx.fault_is(FaultBehavior::CorruptOpening, point) {
                value = ctx.field.add(value, FieldElement::ONE);
            }
            ctx.out.push(Outbound::Broadcast {
                session: self.id,
                msg: MpcBroadcast::OpenShares { batch: vec![(wire, value, randomness)] },
            });
            moved = true;
        }
        moved
    }

    /// Verifies buffered openings against wire commitments; reconstructs a
    /// public value at t+1 verified openings; accuses bad openers.
    fn apply_openings(&mut self, ctx: &mut Ctx) -> bool {
        let mut moved = false;
        let pending = std::mem::take(&mut self.pending_openings);
        let mut still_pending = Vec::new();
        let mut accusations = Vec::new();
        for (sender, wire, value, randomness) in pending {
            let Some(ws) = self.wires.get(&wire) else {
                still_pending.push((sender, wire, value, randomness));
                continue;
            };
            let share = Share { party_index: sender + 1, value, randomness };
            if sss::verify_share(ctx.params, &ws.commitments, &share) {
                self.openings.entry(wire).or_default().insert(sender, (value, randomness));
                moved = true;
            } else if self.bad_openers.entry(wire).or_default().insert(sender) {
                accusations.push(sender);
            }
        }
        self.pending_openings = still_pending;
        for party in accusations {
            self.accuse(ctx, party);
        }
        let ready: Vec<WireId> = self
            .openings
            .iter()
            .filter(|(w, m)| !self.public_values.contains_key(w) && m.len() >= self.t + 1)
            .map(|(w, _)| *w)
            .collect();
        for wire in ready {
            let points: Vec<(FieldElement, FieldElement)> = self.openings[&wire]
                .iter()
                .take(self.t + 1)
                .map(|(party, (v, _))| (ctx.field.elem(*party as u64 + 1), *v))
                .collect();
            if let Ok(value) = lagrange_interpolate(ctx.field, &points, FieldElement::ZERO) {
                self.public_values.insert(wire, value);
                moved = true;
            }
        }
        moved
    }

    fn collect_outputs(&mut self, _ctx: &mut Ctx) -> bool {
        let circuit = Arc::clone(&self.circuit);
        let mut moved = false;
        for gate in &circuit.gates {
            if let GateKind::Output { src, slot } = &gate.kind {
                if !self.outputs.contains_key(slot) {
                    if let Some(v) = self.public_values.get(&wire_of(src)) {
                        self.outputs.insert(*slot, *v);
                        moved = true;
                    }
                }
            }
        }
        moved
    }

    fn maybe_attest(&mut self, ctx: &mut Ctx) {
        if self.attest_sent || self.outputs.len() != self.circuit.output_count {
            return;
        }
        ctx.check_silence(ActivationPoint::Attestation);
        self.attest_sent = true;
        let mut outputs: Vec<u64> =
            (0..self.circuit.output_count).map(|slot| self.outputs[&slot].0).collect();
        if ctx.fault_is(FaultBehavior::ForgeAttestation, ActivationPoint::Attestation) {
            outputs[0] = outputs[0].wrapping_add(1);
        }
        ctx.out.push(Outbound::Attest { session: self.id, result: MpcResult::success(outputs) });
    }
}

fn wire_of(w: &WireRef) -> WireId {
    match w.port {
        Port::Value => WireId::gate_value(w.gate),
        Port::CompareId => WireId::gate_id(w.gate),
    }
}

fn id_side_expr(field: &Field, side: IdSide) -> LinExpr {
    match side {
        IdSide::Const(c) => LinExpr::constant(field.elem(c)),
        IdSide::Wire(w) => LinExpr::wire(w),
    }
}

/// Equality of a shared bit with a public mask bit, affine in the bit wire:
/// `bit` when the mask bit is one, `1 - bit` otherwise.
fn eqbit_expr(field: &Field, gate: GateId, bit: u16, m_low: u64) -> LinExpr {
    let w = WireId::Bit { gate, bit };
    if m_low >> bit & 1 == 1 {
        LinExpr::wire(w)
    } else {
        LinExpr { constant: FieldElement::ONE, terms: vec![(field.neg(FieldElement::ONE), w)] }
    }
}
