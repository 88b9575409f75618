//! Interactive consistency from consistent broadcast plus binary consensus.
//!
//! Until the barrier, every node runs consistent broadcast for its value and
//! records each delivered `(value, certificate)` pair. At the barrier it
//! starts n binary consensus instances, voting 1 for slot i exactly when it
//! holds node i's certified value. Once all n outcomes are in, the vector is
//! finalized: slots decided 0 are nulled (discarding any held value), and a
//! slot decided 1 without a held value is recovered by asking everyone and
//! accepting the first reply whose certificate verifies. At least one honest
//! holder must exist for such a slot, and the certificate pins the value, so
//! recovery terminates with the broadcast value.

use std::collections::BTreeSet;

use crate::broadcast::CbNode;
use crate::consensus::BcInstance;
use crate::crypto::Proof;
use crate::simnet::{Act, Ctx, Protocol};
use crate::types::{NodeId, ResultVector, Value};
use crate::wire::{Body, Root, Tag, WireMessage};

struct RunState {
    run_index: u8,
    value: Value,
    cb: CbNode,
    held: Vec<Option<(Value, Vec<(NodeId, Proof)>)>>,
    barrier_crossed: bool,
    buffered: Vec<(NodeId, WireMessage)>,
    bc: Vec<BcInstance>,
    bits: Vec<Option<bool>>,
    agreed: usize,
    finalized: bool,
    retrieving: BTreeSet<NodeId>,
    vector: ResultVector,
    done: bool,
}

pub struct BcRbbNode {
    me: NodeId,
    runs: Vec<RunState>,
}

impl BcRbbNode {
    pub fn new(me: NodeId, n: usize, values: Vec<Value>) -> BcRbbNode {
        let runs = values
            .into_iter()
            .enumerate()
            .map(|(r, value)| RunState {
                run_index: r as u8,
                value,
                cb: CbNode::new(me, n, r as u8, r as u32),
                held: vec![None; n],
                barrier_crossed: false,
                buffered: Vec::new(),
                bc: Vec::new(),
                bits: vec![None; n],
                agreed: 0,
                finalized: false,
                retrieving: BTreeSet::new(),
                vector: ResultVector::new(n),
                done: false,
            })
            .collect();
        BcRbbNode { me, runs }
    }

    fn apply_bit(me: NodeId, ctx: &mut Ctx<'_>, run: &mut RunState, slot: NodeId, bit: bool) {
        if run.bits[slot.pos()].is_some() {
            return;
        }
        run.bits[slot.pos()] = Some(bit);
        ctx.record_upcall(slot, Value::bytes([bit as u8]));
        run.agreed += 1;
        if run.agreed == run.vector.len() {
            Self::finalize(me, ctx, run);
        }
    }

    /// `Finalize_V`: null out refused slots, keep certified ones, and start
    /// recovery for accepted slots we lack.
    fn finalize(me: NodeId, ctx: &mut Ctx<'_>, run: &mut RunState) {
        run.finalized = true;
        for slot in NodeId::all(run.vector.len()) {
            match (run.bits[slot.pos()] == Some(true), &run.held[slot.pos()]) {
                (false, _) => {
                    run.held[slot.pos()] = None;
                    run.vector.set(slot, Value::Null);
                }
                (true, Some((value, _))) => {
                    run.vector.set(slot, value.clone());
                }
                (true, None) => {
                    run.retrieving.insert(slot);
                    let msg = WireMessage {
                        sender: me,
                        tag: Tag::new(run.cb_run(), Root::Retrieve).slot(slot),
                        body: Body::Retrieve,
                    };
                    ctx.multicast(msg);
                }
            }
        }
        Self::maybe_done(ctx, run);
    }

    fn maybe_done(ctx: &mut Ctx<'_>, run: &mut RunState) {
        if run.finalized && run.retrieving.is_empty() && !run.done {
            run.done = true;
            ctx.set_outcome(run.vector.clone());
        }
    }

    fn route_consensus(
        me: NodeId,
        ctx: &mut Ctx<'_>,
        run: &mut RunState,
        src: NodeId,
        msg: &WireMessage,
    ) {
        let slot = NodeId(msg.tag.slot);
        if slot.0 == 0 || slot.index() > run.vector.len() {
            return;
        }
        if let Some(bit) = run.bc[slot.pos()].on_message(ctx, src, msg) {
            Self::apply_bit(me, ctx, run, slot, bit);
        }
    }
}

impl RunState {
    fn cb_run(&self) -> u8 {
        self.run_index
    }
}

impl Protocol for BcRbbNode {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        for (r, run) in self.runs.iter_mut().enumerate() {
            ctx.set_run(r);
            run.cb.broadcast(ctx, run.value.clone());
        }
    }

    fn on_message(&mut self, ctx: &mut Ctx<'_>, src: NodeId, msg: WireMessage) {
        let me = self.me;
        let Some(run) = self.runs.get_mut(msg.tag.run as usize) else {
            return;
        };
        ctx.set_run(msg.tag.run as usize);
        if msg.body.kind().is_dissemination() {
            if run.barrier_crossed {
                ctx.note_late_drop();
                return;
            }
            if let Some((subject, _)) = run.cb.on_message(ctx, src, &msg) {
                run.held[subject.pos()] = run.cb.delivered(subject).cloned();
            }
            return;
        }
        match (&msg.body, msg.tag.root) {
            (_, Root::Bc) => {
                if run.barrier_crossed {
                    Self::route_consensus(me, ctx, run, src, &msg);
                } else {
                    run.buffered.push((src, msg));
                }
            }
            (Body::Retrieve, Root::Retrieve) => {
                let slot = NodeId(msg.tag.slot);
                if slot.0 == 0 || slot.index() > run.vector.len() {
                    return;
                }
                if let Some((value, endorsements)) = &run.held[slot.pos()] {
                    let reply = WireMessage {
                        sender: me,
                        tag: Tag::new(msg.tag.run, Root::Retrieve).slot(slot),
                        body: Body::RetrievedValue {
                            value: value.clone(),
                            endorsements: endorsements.clone(),
                        },
                    };
                    ctx.unicast(src, reply);
                }
            }
            (Body::RetrievedValue { value, endorsements }, Root::Retrieve) => {
                let slot = NodeId(msg.tag.slot);
                if !run.retrieving.contains(&slot) {
                    return;
                }
                if ctx.verify_certificate(slot, value, endorsements) {
                    run.held[slot.pos()] = Some((value.clone(), endorsements.clone()));
                    run.vector.set(slot, value.clone());
                    run.retrieving.remove(&slot);
                    Self::maybe_done(ctx, run);
                } else {
                    ctx.note_rejected_reply();
                }
            }
            _ => {}
        }
    }

    fn on_barrier(&mut self, ctx: &mut Ctx<'_>) {
        let me = self.me;
        let n = ctx.config().n;
        let quorums = ctx.quorums();
        let h = ctx.config().buffer_window;
        for (r, run) in self.runs.iter_mut().enumerate() {
            if run.barrier_crossed {
                continue;
            }
            ctx.set_run(r);
            run.barrier_crossed = true;
            run.bc = NodeId::all(n)
                .map(|slot| BcInstance::new(me, slot, r as u8, Root::Bc, n, quorums, h))
                .collect();
            for slot in NodeId::all(n) {
                let vote = run.held[slot.pos()].is_some();
                if let Ok(Some(bit)) = run.bc[slot.pos()].propose(ctx, vote) {
                    Self::apply_bit(me, ctx, run, slot, bit);
                }
            }
            let buffered = std::mem::take(&mut run.buffered);
            for (src, msg) in buffered {
                Self::route_consensus(me, ctx, run, src, &msg);
            }
        }
    }

    fn build_deferred(&mut self, _ctx: &mut Ctx<'_>, token: u32) -> Vec<Act> {
        match self.runs.get_mut(token as usize) {
            Some(run) => run.cb.build_final(),
            None => Vec::new(),
        }
    }
}
