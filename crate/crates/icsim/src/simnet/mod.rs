//! Deterministic discrete-event network in virtual time.
//!
//! The model is the adversarial one the protocols are analyzed under: a
//! global clock the nodes cannot read, per-node local clocks that may drift
//! from it by at most `delta_drift`, an upper bound `delta_delivery` on
//! honest-to-honest message delay, and a barrier value `End` at which a node's
//! local clock ends the value-dissemination phase. The adversary corrupts a
//! fixed subset of at most `t` nodes and schedules every delivery; traffic
//! touching corrupted nodes can be dropped, reordered, duplicated, delayed or
//! rewritten per the node's scripted behavior.
//!
//! Everything is driven from one event queue ordered by `(time, class, seq)`,
//! so a run is a pure function of `(config, adversary spec, seed)`: replaying
//! with the same inputs yields the identical event trace. Local computation
//! is charged per message-emission act: each act occupies the node for
//! `t_comp` time units, and acts queue behind each other on a per-node busy
//! cursor. Payloads are serialized when the send is performed, not when it is
//! requested.
//!
//! Events at one instant dispatch in class order (crash, init, deliver,
//! emission, barrier, timer), so a message whose delivery lands exactly on
//! the receiver's barrier tick still counts as disseminated.

pub mod adversary;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::config::{ClockParams, QuorumThresholds, SystemConfig};
use crate::crypto::{Endorsement, Keyring, ProofMode};
use crate::types::{NodeId, ResultVector, Value};
use crate::wire::{MessageKind, Root, WireMessage};

use self::adversary::{AdversarySpec, Behavior};

/// How the seeded scheduler picks delivery delays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryMode {
    /// Uniform in `[0, delta_delivery]`.
    Jittered,
    /// Always exactly `delta_delivery`, exercising the bound tightly.
    WorstCase,
}

/// How local coins are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoinMode {
    /// Per `(node, instance, phase)` seeded coin.
    #[default]
    Seeded,
    /// Hostile mode: coins split the nodes every phase.
    SplitWorst,
}

/// A message in flight.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub src: NodeId,
    pub dst: NodeId,
    pub payload: Vec<u8>,
    pub sent_at: u64,
    pub deliver_by: u64,
}

/// Instrumented protocol steps, checked against the clock-bound tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StepKind {
    Initialized,
    ValueSent,
    ValueObtained,
    CSendSent,
    CSendReceived,
    CReadySent,
    CReadyReceived,
    CFinalSent,
    CFinalReceived,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct StepMark {
    pub node: NodeId,
    pub peer: Option<NodeId>,
    pub kind: StepKind,
    pub local: u64,
    pub global: u64,
}

/// What a protocol produced at one node, per parallel run instance.
#[derive(Debug, Clone)]
pub struct NodeOutput {
    pub outcomes: Vec<Option<ResultVector>>,
    pub decided_at_local: Vec<Option<u64>>,
    pub upcalls: Vec<Vec<(NodeId, Value)>>,
    pub late_drops: u64,
    pub spam_drops: u64,
    pub rejected_replies: u64,
    pub max_phase_span: u16,
    /// Highest consensus phase any instance at this node entered.
    pub max_bc_phase: u16,
    pub breach: bool,
}

impl NodeOutput {
    fn new(runs: usize) -> NodeOutput {
        NodeOutput {
            outcomes: vec![None; runs],
            decided_at_local: vec![None; runs],
            upcalls: vec![Vec::new(); runs],
            late_drops: 0,
            spam_drops: 0,
            rejected_replies: 0,
            max_phase_span: 0,
            max_bc_phase: 0,
            breach: false,
        }
    }
}

/// Event-driven per-node protocol state machine.
pub trait Protocol {
    fn on_init(&mut self, ctx: &mut Ctx<'_>);
    fn on_message(&mut self, ctx: &mut Ctx<'_>, src: NodeId, msg: WireMessage);
    fn on_barrier(&mut self, _ctx: &mut Ctx<'_>) {}
    fn on_timer(&mut self, _ctx: &mut Ctx<'_>, _id: u32) {}
    /// Builds the payloads for an emission that was scheduled with
    /// [`Ctx::defer_emit`]; called when the send is actually performed.
    fn build_deferred(&mut self, _ctx: &mut Ctx<'_>, _token: u32) -> Vec<Act> {
        Vec::new()
    }
}

/// One emission act. Each act costs `t_comp` on the emitting node.
#[derive(Debug, Clone)]
pub enum Act {
    Multicast(WireMessage),
    Unicast(NodeId, WireMessage),
    /// Payload to be built by [`Protocol::build_deferred`] at emission time.
    Deferred(u32),
}

#[derive(Debug, Clone)]
enum EventKind {
    Crash,
    Init,
    Deliver(Envelope),
    Emit(Act),
    Barrier,
    Timer(u32),
}

impl EventKind {
    fn class(&self) -> u8 {
        match self {
            EventKind::Crash => 0,
            EventKind::Init => 1,
            EventKind::Deliver(_) => 2,
            EventKind::Emit(_) => 3,
            EventKind::Barrier => 4,
            EventKind::Timer(_) => 5,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            EventKind::Crash => "crash",
            EventKind::Init => "init",
            EventKind::Deliver(_) => "deliver",
            EventKind::Emit(_) => "emit",
            EventKind::Barrier => "barrier",
            EventKind::Timer(_) => "timer",
        }
    }
}

struct Event {
    time: u64,
    class: u8,
    seq: u64,
    node: NodeId,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.class, self.seq) == (other.time, other.class, other.seq)
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.class, self.seq).cmp(&(other.time, other.class, other.seq))
    }
}

/// A processed event, as surfaced by [`Simulation::step`].
#[derive(Debug, Clone)]
pub struct EventRecord {
    pub global: u64,
    pub node: NodeId,
    pub kind: &'static str,
}

/// Everything the simulation owns apart from the protocol states.
pub struct SimState {
    pub cfg: SystemConfig,
    pub clocks: ClockParams,
    quorums: QuorumThresholds,
    pub keyring: Keyring,
    seed: u64,
    delivery: DeliveryMode,
    pub coin_mode: CoinMode,
    has_barrier: bool,
    runs: usize,
    duplicate_corrupt_sends: bool,

    global: u64,
    offsets: Vec<i64>,
    busy_until: Vec<u64>,
    queue: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
    rng: ChaCha8Rng,

    corrupted: Vec<Option<Behavior>>,
    crashed: Vec<bool>,

    messages_by_root: [u64; Root::ALL.len()],
    signature_ops: u64,
    pub outputs: Vec<NodeOutput>,
    step_marks: Vec<StepMark>,
    trace_hasher: Sha256,
    trace_lines: Option<Vec<String>>,
    garbage_drops: u64,
    time_budget: u64,
    truncated: bool,
}

impl SimState {
    fn local_of(&self, node: NodeId, global: u64) -> u64 {
        let raw = global as i64 + self.offsets[node.pos()];
        raw.max(0) as u64
    }

    /// Global instant at which `node`'s local clock first reads `local`.
    fn global_for_local(&self, node: NodeId, local: u64) -> u64 {
        (local as i64 - self.offsets[node.pos()]).max(0) as u64
    }

    pub fn barrier_global(&self, node: NodeId) -> u64 {
        self.global_for_local(node, self.cfg.end_barrier)
    }

    fn push_event(&mut self, time: u64, node: NodeId, kind: EventKind) {
        let class = kind.class();
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Event { time, class, seq, node, kind }));
    }

    fn is_corrupted(&self, node: NodeId) -> bool {
        self.corrupted[node.pos()].is_some()
    }

    fn trace(&mut self, global: u64, node: NodeId, kind: &str, detail: &str) {
        let local = self.local_of(node, global);
        let line = format!("{global},{local},{node},{kind},{detail}");
        self.trace_hasher.update(line.as_bytes());
        self.trace_hasher.update(b"\n");
        if let Some(lines) = &mut self.trace_lines {
            lines.push(line);
        }
    }

    fn count_send(&mut self, root: Root) {
        self.messages_by_root[root as usize - 1] += 1;
    }

    fn delivery_delay(&mut self) -> u64 {
        match self.delivery {
            DeliveryMode::WorstCase => self.clocks.delta_delivery,
            DeliveryMode::Jittered => self.rng.gen_range(0..=self.clocks.delta_delivery),
        }
    }

    /// Applies the sender's scripted behavior and enqueues one send.
    fn finalize_send(&mut self, src: NodeId, dst: NodeId, mut msg: WireMessage, now: u64) {
        assert!(dst.0 >= 1 && dst.index() <= self.cfg.n, "unknown destination {dst}");
        let mut deliver_at = now + self.delivery_delay();
        if let Some(behavior) = &self.corrupted[src.pos()] {
            match adversary::apply_to_send(behavior, dst, &mut msg) {
                adversary::SendFate::Drop => return,
                adversary::SendFate::DelayPastBarrier => {
                    let deadline = if self.has_barrier {
                        self.barrier_global(dst)
                    } else if msg.tag.root == Root::Pease {
                        // Past the addressed round's deadline on the
                        // recipient's clock.
                        self.global_for_local(
                            dst,
                            u64::from(msg.tag.phase) * self.cfg.round_timeout,
                        )
                    } else {
                        deliver_at
                    };
                    deliver_at = deliver_at.max(deadline + 1);
                }
                adversary::SendFate::Deliver => {}
            }
        }
        let payload = msg.encode();
        self.count_send(msg.tag.root);
        self.mark_wire_step(src, None, msg.body.kind(), true, now);
        self.trace(now, src, "send", &format!("{}>{},{}", msg.tag.root.name(), dst, msg.tag.slot));
        let env = Envelope {
            src,
            dst,
            payload,
            sent_at: now,
            deliver_by: now + self.clocks.delta_delivery,
        };
        if self.duplicate_corrupt_sends && self.is_corrupted(src) {
            let extra = self.delivery_delay();
            self.push_event(deliver_at + extra, dst, EventKind::Deliver(env.clone()));
        }
        self.push_event(deliver_at, dst, EventKind::Deliver(env));
    }

    fn schedule_acts(&mut self, node: NodeId, now: u64, acts: Vec<Act>) {
        for act in acts {
            let at = self.busy_until[node.pos()].max(now) + self.clocks.t_comp;
            self.busy_until[node.pos()] = at;
            self.push_event(at, node, EventKind::Emit(act));
        }
    }

    /// Timing probes for the dissemination steps the clock tables bound.
    /// Send marks are stamped when the send is performed, receive marks when
    /// the delivery dispatches.
    fn mark_wire_step(&mut self, node: NodeId, peer: Option<NodeId>, kind: MessageKind, send: bool, global: u64) {
        use MessageKind::*;
        let step = match (kind, send) {
            (MuValue, true) => StepKind::ValueSent,
            (MuValue, false) => StepKind::ValueObtained,
            (CSend, true) => StepKind::CSendSent,
            (CSend, false) => StepKind::CSendReceived,
            (CReady, true) => StepKind::CReadySent,
            (CReady, false) => StepKind::CReadyReceived,
            (CFinal, true) => StepKind::CFinalSent,
            (CFinal, false) => StepKind::CFinalReceived,
            _ => return,
        };
        let local = self.local_of(node, global);
        self.step_marks.push(StepMark { node, peer, kind: step, local, global });
    }
}

/// Handler-side view of the simulation.
pub struct Ctx<'a> {
    st: &'a mut SimState,
    node: NodeId,
    run: usize,
    global: u64,
    acts: Vec<Act>,
    timers: Vec<(u64, u32)>,
}

impl Ctx<'_> {
    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn now_global(&self) -> u64 {
        self.global
    }

    pub fn now_local(&self) -> u64 {
        self.st.local_of(self.node, self.global)
    }

    pub fn config(&self) -> &SystemConfig {
        &self.st.cfg
    }

    pub fn quorums(&self) -> QuorumThresholds {
        self.st.quorums
    }

    pub fn proof_mode(&self) -> ProofMode {
        self.st.keyring.mode()
    }

    /// Sets the run-instance index subsequent records are attributed to.
    pub fn set_run(&mut self, run: usize) {
        self.run = run;
    }

    pub fn multicast(&mut self, msg: WireMessage) {
        self.acts.push(Act::Multicast(msg));
    }

    pub fn unicast(&mut self, dst: NodeId, msg: WireMessage) {
        self.acts.push(Act::Unicast(dst, msg));
    }

    pub fn defer_emit(&mut self, token: u32) {
        self.acts.push(Act::Deferred(token));
    }

    /// Schedules a timer for the first instant the node's local clock reads
    /// `local_time`.
    pub fn set_timer_at_local(&mut self, local_time: u64, id: u32) {
        self.timers.push((local_time, id));
    }

    /// Local coin for randomized consensus, per `(node, run, slot, phase)`.
    pub fn coin(&mut self, slot: NodeId, phase: u16) -> bool {
        match self.st.coin_mode {
            CoinMode::SplitWorst => self.node.0 & 1 == 1,
            CoinMode::Seeded => {
                let mut h = Sha256::new();
                h.update(b"icsim-coin");
                h.update(self.st.seed.to_le_bytes());
                h.update([self.node.0, self.run as u8, slot.0]);
                h.update(phase.to_le_bytes());
                h.finalize()[0] & 1 == 1
            }
        }
    }

    pub fn endorse(&mut self, subject: NodeId, value: &Value) -> Endorsement {
        self.st.signature_ops += 1;
        self.st.keyring.endorse(self.node, subject, value)
    }

    pub fn verify_endorsement(&mut self, e: &Endorsement) -> bool {
        self.st.signature_ops += 1;
        self.st.keyring.verify_endorsement(self.node, e)
    }

    /// Verifies a full certificate: every endorsement is checked (and
    /// counted), then the distinct valid endorsements over `(subject, value)`
    /// must reach `n - t`.
    pub fn verify_certificate(
        &mut self,
        subject: NodeId,
        value: &Value,
        endorsements: &[(NodeId, crate::crypto::Proof)],
    ) -> bool {
        let mut valid = std::collections::BTreeSet::new();
        for (endorser, proof) in endorsements {
            let e = Endorsement {
                endorser: *endorser,
                subject,
                value: value.clone(),
                proof: proof.clone(),
            };
            if self.verify_endorsement(&e) {
                valid.insert(*endorser);
            }
        }
        valid.len() >= self.st.quorums.n_minus_t
    }

    pub fn mark_step(&mut self, kind: StepKind, peer: Option<NodeId>) {
        let mark = StepMark {
            node: self.node,
            peer,
            kind,
            local: self.now_local(),
            global: self.global,
        };
        self.st.step_marks.push(mark);
    }

    pub fn record_upcall(&mut self, slot: NodeId, value: Value) {
        let run = self.run;
        self.st.outputs[self.node.pos()].upcalls[run].push((slot, value));
    }

    /// Final vector for this node's run instance; also stamps decision time.
    /// Incremental protocols may call this repeatedly; the last write wins.
    pub fn set_outcome(&mut self, vector: ResultVector) {
        let run = self.run;
        let local = self.now_local();
        let out = &mut self.st.outputs[self.node.pos()];
        out.outcomes[run] = Some(vector);
        out.decided_at_local[run] = Some(local);
    }

    pub fn note_late_drop(&mut self) {
        self.st.outputs[self.node.pos()].late_drops += 1;
    }

    pub fn note_spam_drop(&mut self) {
        self.st.outputs[self.node.pos()].spam_drops += 1;
    }

    /// An invalid recovery reply was discarded.
    pub fn note_rejected_reply(&mut self) {
        self.st.outputs[self.node.pos()].rejected_replies += 1;
    }

    /// Records how many distinct consensus phases a node held buffered
    /// messages for, to check the memory bound.
    pub fn note_phase_span(&mut self, span: u16) {
        let out = &mut self.st.outputs[self.node.pos()];
        out.max_phase_span = out.max_phase_span.max(span);
    }

    pub fn note_bc_phase(&mut self, phase: u16) {
        let out = &mut self.st.outputs[self.node.pos()];
        out.max_bc_phase = out.max_bc_phase.max(phase);
    }

    pub fn report_breach(&mut self) {
        self.st.outputs[self.node.pos()].breach = true;
    }
}

/// A full deterministic run: protocols plus the event machinery.
pub struct Simulation {
    st: SimState,
    nodes: Vec<Option<Box<dyn Protocol>>>,
}

pub struct SimParams {
    pub cfg: SystemConfig,
    pub clocks: ClockParams,
    pub adversary: AdversarySpec,
    pub seed: u64,
    pub delivery: DeliveryMode,
    pub coin_mode: CoinMode,
    pub proof_mode: ProofMode,
    pub has_barrier: bool,
    pub runs: usize,
    pub time_budget: u64,
    pub collect_trace: bool,
    /// Deliver every corrupted-source send twice.
    pub duplicate_corrupt_sends: bool,
}

impl Simulation {
    pub fn new(params: SimParams, nodes: Vec<Box<dyn Protocol>>) -> Simulation {
        let n = params.cfg.n;
        assert_eq!(nodes.len(), n);
        params.adversary.validate(&params.cfg).expect("adversary spec within bounds");

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let drift = params.clocks.delta_drift as i64;
        let offsets: Vec<i64> = match params.delivery {
            // Spread the clocks as far as the drift bound allows.
            DeliveryMode::WorstCase => (0..n)
                .map(|i| if i % 2 == 0 { drift } else { -drift })
                .collect(),
            DeliveryMode::Jittered => (0..n).map(|_| rng.gen_range(-drift..=drift)).collect(),
        };

        let mut corrupted = vec![None; n];
        for (id, behavior) in &params.adversary.behaviors {
            corrupted[id.pos()] = Some(behavior.clone());
        }

        let keyring = Keyring::new(n, params.seed, params.proof_mode);
        let mut st = SimState {
            quorums: params.cfg.quorums(),
            cfg: params.cfg,
            clocks: params.clocks,
            keyring,
            seed: params.seed,
            delivery: params.delivery,
            coin_mode: params.coin_mode,
            has_barrier: params.has_barrier,
            runs: params.runs,
            duplicate_corrupt_sends: params.duplicate_corrupt_sends,
            global: 0,
            offsets,
            busy_until: vec![0; n],
            queue: BinaryHeap::new(),
            next_seq: 0,
            rng,
            corrupted,
            crashed: vec![false; n],
            messages_by_root: [0; Root::ALL.len()],
            signature_ops: 0,
            outputs: (0..n).map(|_| NodeOutput::new(params.runs)).collect(),
            step_marks: Vec::new(),
            trace_hasher: Sha256::new(),
            trace_lines: params.collect_trace.then(Vec::new),
            garbage_drops: 0,
            time_budget: params.time_budget,
            truncated: false,
        };

        for id in NodeId::all(n) {
            st.push_event(0, id, EventKind::Init);
        }
        if st.has_barrier {
            for id in NodeId::all(n) {
                let at = st.barrier_global(id);
                st.push_event(at, id, EventKind::Barrier);
            }
        }
        for (id, behavior) in &params.adversary.behaviors {
            if let Behavior::CrashAt { time } = behavior {
                st.push_event(*time, *id, EventKind::Crash);
            }
        }

        Simulation { st, nodes: nodes.into_iter().map(Some).collect() }
    }

    pub fn state(&self) -> &SimState {
        &self.st
    }

    /// Pops and dispatches the least pending event.
    pub fn step(&mut self) -> Option<EventRecord> {
        let Reverse(event) = self.st.queue.pop()?;
        if event.time > self.st.time_budget {
            self.st.truncated = true;
            self.st.queue.clear();
            return None;
        }
        debug_assert!(event.time >= self.st.global, "time must not run backwards");
        self.st.global = event.time;
        let node = event.node;
        let global = event.time;
        let record = EventRecord { global, node, kind: event.kind.name() };

        if cfg!(debug_assertions) {
            // Drift safety, checked at every event.
            let local = self.st.local_of(node, global);
            let drift = (local as i64 - global as i64).unsigned_abs();
            debug_assert!(drift <= self.st.clocks.delta_drift);
        }

        match event.kind {
            EventKind::Crash => {
                self.st.crashed[node.pos()] = true;
                self.st.trace(global, node, "crash", "");
            }
            EventKind::Init => {
                self.st.trace(global, node, "init", "");
                let local = self.st.local_of(node, global);
                self.st.step_marks.push(StepMark {
                    node,
                    peer: None,
                    kind: StepKind::Initialized,
                    local,
                    global,
                });
                self.dispatch(node, global, |proto, ctx| proto.on_init(ctx));
            }
            EventKind::Deliver(env) => {
                let detail = format!("{}>{}", env.src, env.dst);
                self.st.trace(global, node, "deliver", &detail);
                if !self.st.crashed[node.pos()] {
                    if env.src.0 == 0 || env.src.index() > self.st.cfg.n {
                        self.st.garbage_drops += 1;
                    } else {
                        let honest_pair =
                            !self.st.is_corrupted(env.src) && !self.st.is_corrupted(env.dst);
                        if honest_pair {
                            debug_assert!(
                                global <= env.deliver_by,
                                "honest delivery past the delay bound"
                            );
                        }
                        match WireMessage::decode(&env.payload) {
                            // Authenticated channels: the claimed sender must
                            // match the channel the message arrived on.
                            Some(msg) if msg.sender == env.src => {
                                self.st.mark_wire_step(
                                    node,
                                    Some(env.src),
                                    msg.body.kind(),
                                    false,
                                    global,
                                );
                                self.dispatch(node, global, |proto, ctx| {
                                    proto.on_message(ctx, env.src, msg)
                                });
                            }
                            _ => self.st.garbage_drops += 1,
                        }
                    }
                }
            }
            EventKind::Emit(act) => {
                self.st.trace(global, node, "emit", "");
                if !self.st.crashed[node.pos()] {
                    let built = match act {
                        Act::Deferred(token) => {
                            let mut out = Vec::new();
                            self.dispatch(node, global, |proto, ctx| {
                                out = proto.build_deferred(ctx, token);
                            });
                            out
                        }
                        other => vec![other],
                    };
                    for act in built {
                        match act {
                            Act::Multicast(msg) => {
                                for dst in NodeId::all(self.st.cfg.n) {
                                    self.st.finalize_send(node, dst, msg.clone(), global);
                                }
                            }
                            Act::Unicast(dst, msg) => {
                                self.st.finalize_send(node, dst, msg, global);
                            }
                            Act::Deferred(_) => {}
                        }
                    }
                }
            }
            EventKind::Barrier => {
                self.st.trace(global, node, "barrier", "");
                if !self.st.crashed[node.pos()] {
                    let injections = match &self.st.corrupted[node.pos()] {
                        Some(behavior) => adversary::injections_at_barrier(
                            behavior,
                            node,
                            &self.st.cfg,
                            self.st.runs,
                        ),
                        None => Vec::new(),
                    };
                    self.st.schedule_acts(node, global, injections);
                    self.dispatch(node, global, |proto, ctx| proto.on_barrier(ctx));
                }
            }
            EventKind::Timer(id) => {
                self.st.trace(global, node, "timer", &id.to_string());
                if !self.st.crashed[node.pos()] {
                    self.dispatch(node, global, |proto, ctx| proto.on_timer(ctx, id));
                }
            }
        }
        Some(record)
    }

    fn dispatch(
        &mut self,
        node: NodeId,
        global: u64,
        f: impl FnOnce(&mut Box<dyn Protocol>, &mut Ctx<'_>),
    ) {
        let mut proto = self.nodes[node.pos()].take().expect("protocol present");
        let mut ctx = Ctx {
            st: &mut self.st,
            node,
            run: 0,
            global,
            acts: Vec::new(),
            timers: Vec::new(),
        };
        f(&mut proto, &mut ctx);
        let Ctx { acts, timers, .. } = ctx;
        self.nodes[node.pos()] = Some(proto);
        self.st.schedule_acts(node, global, acts);
        for (local_time, id) in timers {
            let at = self.st.global_for_local(node, local_time).max(global);
            self.st.push_event(at, node, EventKind::Timer(id));
        }
    }

    /// Runs to quiescence or until the time budget is exhausted.
    pub fn run_to_completion(&mut self) {
        while self.step().is_some() {}
    }

    pub fn into_results(self) -> SimResults {
        let st = self.st;
        let trace_hash = {
            let digest = st.trace_hasher.finalize();
            let mut s = String::with_capacity(64);
            for b in digest {
                s.push_str(&format!("{b:02x}"));
            }
            s
        };
        SimResults {
            messages_by_root: st.messages_by_root,
            signature_ops: st.signature_ops,
            outputs: st.outputs,
            step_marks: st.step_marks,
            trace_hash,
            trace_lines: st.trace_lines,
            garbage_drops: st.garbage_drops,
            final_global: st.global,
            truncated: st.truncated,
        }
    }
}

/// Raw per-run results, before report assembly.
pub struct SimResults {
    pub messages_by_root: [u64; Root::ALL.len()],
    pub signature_ops: u64,
    pub outputs: Vec<NodeOutput>,
    pub step_marks: Vec<StepMark>,
    pub trace_hash: String,
    pub trace_lines: Option<Vec<String>>,
    pub garbage_drops: u64,
    pub final_global: u64,
    pub truncated: bool,
}

impl SimResults {
    pub fn messages_for(&self, root: Root) -> u64 {
        self.messages_by_root[root as usize - 1]
    }

    pub fn total_messages(&self) -> u64 {
        self.messages_by_root.iter().sum()
    }
}
