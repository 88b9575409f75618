//! Interactive consistency from multicast plus multi-valued consensus.
//!
//! Until the barrier, every node announces its private value and records the
//! first value heard per peer. At the barrier it starts n multi-valued
//! consensus instances, proposing for slot i whatever it obtained from node
//! i (null if nothing). Each agreed value fills its slot; the node is done
//! when all n slots are agreed. Dissemination messages arriving after the
//! barrier are dropped and counted, never buffered; consensus messages
//! arriving before it are buffered until the task switch.

use crate::broadcast::multicast_value;
use crate::consensus::McInstance;
use crate::simnet::{Ctx, Protocol};
use crate::types::{NodeId, ResultVector, Value};
use crate::wire::{Body, Root, WireMessage};

struct RunState {
    value: Value,
    obtained: Vec<Option<Value>>,
    barrier_crossed: bool,
    buffered: Vec<(NodeId, WireMessage)>,
    mc: Vec<McInstance>,
    slot_done: Vec<bool>,
    vector: ResultVector,
    agreed: usize,
    done: bool,
}

pub struct McRbbNode {
    me: NodeId,
    runs: Vec<RunState>,
}

impl McRbbNode {
    pub fn new(me: NodeId, n: usize, values: Vec<Value>) -> McRbbNode {
        let runs = values
            .into_iter()
            .map(|value| RunState {
                value,
                obtained: vec![None; n],
                barrier_crossed: false,
                buffered: Vec::new(),
                mc: Vec::new(),
                slot_done: vec![false; n],
                vector: ResultVector::new(n),
                agreed: usize::MAX, // set at barrier
                done: false,
            })
            .collect();
        McRbbNode { me, runs }
    }

    fn apply_decision(ctx: &mut Ctx<'_>, run: &mut RunState, slot: NodeId, value: Value) {
        if run.slot_done[slot.pos()] || run.done {
            return;
        }
        run.slot_done[slot.pos()] = true;
        run.vector.set(slot, value.clone());
        ctx.record_upcall(slot, value);
        run.agreed += 1;
        if run.agreed == run.vector.len() {
            run.done = true;
            ctx.set_outcome(run.vector.clone());
        }
    }

    fn route_consensus(ctx: &mut Ctx<'_>, run: &mut RunState, src: NodeId, msg: &WireMessage) {
        let slot = NodeId(msg.tag.slot);
        if slot.0 == 0 || slot.index() > run.vector.len() {
            return;
        }
        if let Some(value) = run.mc[slot.pos()].on_message(ctx, src, msg) {
            Self::apply_decision(ctx, run, slot, value);
        }
    }
}

impl Protocol for McRbbNode {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        for (r, run) in self.runs.iter_mut().enumerate() {
            ctx.set_run(r);
            multicast_value(ctx, self.me, r as u8, run.value.clone());
        }
    }

    fn on_message(&mut self, ctx: &mut Ctx<'_>, src: NodeId, msg: WireMessage) {
        let Some(run) = self.runs.get_mut(msg.tag.run as usize) else {
            return;
        };
        ctx.set_run(msg.tag.run as usize);
        match (&msg.body, msg.tag.root) {
            (Body::MuValue { value }, _) => {
                if run.barrier_crossed {
                    ctx.note_late_drop();
                } else if msg.tag.slot == src.0 {
                    let slot = run.obtained[src.pos()].get_or_insert_with(|| value.clone());
                    let _ = slot;
                }
            }
            (_, Root::Mc) => {
                if run.barrier_crossed {
                    Self::route_consensus(ctx, run, src, &msg);
                } else {
                    run.buffered.push((src, msg));
                }
            }
            _ => {}
        }
    }

    fn on_barrier(&mut self, ctx: &mut Ctx<'_>) {
        let n = ctx.config().n;
        let t = ctx.config().t;
        let quorums = ctx.quorums();
        let h = ctx.config().buffer_window;
        for (r, run) in self.runs.iter_mut().enumerate() {
            if run.barrier_crossed {
                continue;
            }
            ctx.set_run(r);
            run.barrier_crossed = true;
            run.agreed = 0;
            run.mc = NodeId::all(n)
                .map(|slot| McInstance::new(self.me, slot, r as u8, Root::Mc, n, t, quorums, h))
                .collect();
            for slot in NodeId::all(n) {
                let proposal = run.obtained[slot.pos()].clone().unwrap_or(Value::Null);
                if let Some(value) = run.mc[slot.pos()].propose(ctx, proposal) {
                    Self::apply_decision(ctx, run, slot, value);
                }
            }
            let buffered = std::mem::take(&mut run.buffered);
            for (src, msg) in buffered {
                Self::route_consensus(ctx, run, src, &msg);
            }
        }
    }
}
