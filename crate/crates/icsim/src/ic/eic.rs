//! Eventual interactive consistency: no barrier, one reliable broadcast per
//! node, and an up-call every time a slot fills. Slots only ever go from
//! null to a value; a read between up-calls always includes everything
//! reported so far.

use std::collections::BTreeMap;

use crate::broadcast::{rbb_broadcast, rbb_emit_to_message, rbb_step_of, RbbInstance};
use crate::simnet::{Ctx, Protocol};
use crate::types::{NodeId, ResultVector, Value};
use crate::wire::{Body, Root, Tag, WireMessage};

struct RunState {
    value: Value,
    rbb: BTreeMap<NodeId, RbbInstance>,
    vector: ResultVector,
}

pub struct EicNode {
    me: NodeId,
    runs: Vec<RunState>,
}

impl EicNode {
    pub fn new(me: NodeId, n: usize, values: Vec<Value>) -> EicNode {
        let runs = values
            .into_iter()
            .map(|value| RunState {
                value,
                rbb: BTreeMap::new(),
                vector: ResultVector::new(n),
            })
            .collect();
        EicNode { me, runs }
    }

    fn tag(run: u8, origin: NodeId) -> Tag {
        Tag::new(run, Root::Eic).slot(origin).origin(origin)
    }
}

impl Protocol for EicNode {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        for (r, run) in self.runs.iter_mut().enumerate() {
            ctx.set_run(r);
            let mut payload = Vec::new();
            run.value.encode(&mut payload);
            rbb_broadcast(ctx, self.me, Self::tag(r as u8, self.me), payload);
        }
    }

    fn on_message(&mut self, ctx: &mut Ctx<'_>, src: NodeId, msg: WireMessage) {
        let Some(run) = self.runs.get_mut(msg.tag.run as usize) else {
            return;
        };
        ctx.set_run(msg.tag.run as usize);
        let Some(step) = rbb_step_of(msg.body.kind()) else {
            return;
        };
        let payload = match &msg.body {
            Body::RbbInit { payload } | Body::RbbEcho { payload } | Body::RbbReady { payload } => {
                payload
            }
            _ => return,
        };
        let origin = NodeId(msg.tag.origin);
        if origin.0 == 0 || origin.index() > run.vector.len() {
            return;
        }
        let inst = run.rbb.entry(origin).or_default();
        let (emits, delivered) = inst.on_message(&ctx.quorums(), origin, src, step, payload);
        let tag = Self::tag(msg.tag.run, origin);
        for emit in emits {
            ctx.multicast(rbb_emit_to_message(self.me, tag, emit));
        }
        if let Some(body) = delivered {
            if let Some((value, rest)) = Value::decode(&body) {
                if rest.is_empty() && run.vector.get(origin).is_null() && !value.is_null() {
                    run.vector.set(origin, value.clone());
                    ctx.record_upcall(origin, value);
                    ctx.set_outcome(run.vector.clone());
                }
            }
        }
    }
}
