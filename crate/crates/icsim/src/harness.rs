//! Single-primitive drivers, used to check one protocol instance in
//! isolation against the closed-form message counts.

use crate::broadcast::{
    multicast_value, rbb_broadcast, rbb_emit_to_message, rbb_step_of, CbNode, RbbInstance,
};
use crate::consensus::{BcInstance, McInstance};
use crate::simnet::{Act, Ctx, Protocol};
use crate::types::{NodeId, ResultVector, Value};
use crate::wire::{Body, Root, Tag, WireMessage};

/// One plain multicast from node 1.
pub struct MuOnlyNode {
    me: NodeId,
    sender: NodeId,
    value: Value,
}

impl MuOnlyNode {
    pub fn new(me: NodeId, value: Value) -> MuOnlyNode {
        MuOnlyNode { me, sender: NodeId(1), value }
    }
}

impl Protocol for MuOnlyNode {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        if self.me == self.sender {
            multicast_value(ctx, self.me, 0, self.value.clone());
        }
    }

    fn on_message(&mut self, ctx: &mut Ctx<'_>, src: NodeId, msg: WireMessage) {
        if let Body::MuValue { value } = &msg.body {
            if src == self.sender {
                let mut vector = ResultVector::new(ctx.config().n);
                vector.set(self.sender, value.clone());
                ctx.set_outcome(vector);
            }
        }
    }
}

/// One reliable broadcast from node 1.
pub struct RbbOnlyNode {
    me: NodeId,
    sender: NodeId,
    value: Value,
    rbb: RbbInstance,
}

impl RbbOnlyNode {
    pub fn new(me: NodeId, value: Value) -> RbbOnlyNode {
        RbbOnlyNode { me, sender: NodeId(1), value, rbb: RbbInstance::new() }
    }

    fn tag(&self) -> Tag {
        Tag::new(0, Root::Rbb).slot(self.sender).origin(self.sender)
    }
}

impl Protocol for RbbOnlyNode {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        if self.me == self.sender {
            let mut payload = Vec::new();
            self.value.encode(&mut payload);
            rbb_broadcast(ctx, self.me, self.tag(), payload);
        }
    }

    fn on_message(&mut self, ctx: &mut Ctx<'_>, src: NodeId, msg: WireMessage) {
        let Some(step) = rbb_step_of(msg.body.kind()) else {
            return;
        };
        let payload = match &msg.body {
            Body::RbbInit { payload } | Body::RbbEcho { payload } | Body::RbbReady { payload } => {
                payload
            }
            _ => return,
        };
        let (emits, delivered) =
            self.rbb.on_message(&ctx.quorums(), self.sender, src, step, payload);
        let tag = self.tag();
        for emit in emits {
            ctx.multicast(rbb_emit_to_message(self.me, tag, emit));
        }
        if let Some(body) = delivered {
            if let Some((value, _)) = Value::decode(&body) {
                let mut vector = ResultVector::new(ctx.config().n);
                vector.set(self.sender, value);
                ctx.set_outcome(vector);
            }
        }
    }
}

/// One consistent broadcast from node 1.
pub struct CbOnlyNode {
    me: NodeId,
    sender: NodeId,
    value: Value,
    cb: CbNode,
}

impl CbOnlyNode {
    pub fn new(me: NodeId, n: usize, value: Value) -> CbOnlyNode {
        CbOnlyNode { me, sender: NodeId(1), value, cb: CbNode::new(me, n, 0, 0) }
    }
}

impl Protocol for CbOnlyNode {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        if self.me == self.sender {
            self.cb.broadcast(ctx, self.value.clone());
        }
    }

    fn on_message(&mut self, ctx: &mut Ctx<'_>, src: NodeId, msg: WireMessage) {
        if let Some((subject, value)) = self.cb.on_message(ctx, src, &msg) {
            let mut vector = ResultVector::new(ctx.config().n);
            vector.set(subject, value);
            ctx.set_outcome(vector);
        }
    }

    fn build_deferred(&mut self, _ctx: &mut Ctx<'_>, _token: u32) -> Vec<Act> {
        self.cb.build_final()
    }
}

/// One binary consensus among all nodes.
pub struct BcOnlyNode {
    input: bool,
    done: bool,
    bc: BcInstance,
}

impl BcOnlyNode {
    pub fn new(me: NodeId, n: usize, q: crate::config::QuorumThresholds, h: u16, input: bool) -> BcOnlyNode {
        BcOnlyNode { input, done: false, bc: BcInstance::new(me, NodeId(1), 0, Root::Bc, n, q, h) }
    }

    pub fn with_phase_cap(mut self, cap: u16) -> BcOnlyNode {
        self.bc.limit_phases(cap);
        self
    }

    fn finish(ctx: &mut Ctx<'_>, bit: bool) {
        let mut vector = ResultVector::new(ctx.config().n);
        vector.set(NodeId(1), Value::bytes([bit as u8]));
        ctx.set_outcome(vector);
    }
}

impl Protocol for BcOnlyNode {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        if let Ok(Some(bit)) = self.bc.propose(ctx, self.input) {
            if !std::mem::replace(&mut self.done, true) {
                Self::finish(ctx, bit);
            }
        }
    }

    fn on_message(&mut self, ctx: &mut Ctx<'_>, src: NodeId, msg: WireMessage) {
        if let Some(bit) = self.bc.on_message(ctx, src, &msg) {
            if !std::mem::replace(&mut self.done, true) {
                Self::finish(ctx, bit);
            }
        }
    }
}

/// One multi-valued consensus among all nodes.
pub struct McOnlyNode {
    input: Value,
    done: bool,
    mc: McInstance,
}

impl McOnlyNode {
    pub fn new(
        me: NodeId,
        n: usize,
        t: usize,
        q: crate::config::QuorumThresholds,
        h: u16,
        input: Value,
    ) -> McOnlyNode {
        McOnlyNode { input, done: false, mc: McInstance::new(me, NodeId(1), 0, Root::Mc, n, t, q, h) }
    }

    fn finish(ctx: &mut Ctx<'_>, value: Value) {
        let mut vector = ResultVector::new(ctx.config().n);
        vector.set(NodeId(1), value);
        ctx.set_outcome(vector);
    }
}

impl Protocol for McOnlyNode {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        if let Some(v) = self.mc.propose(ctx, self.input.clone()) {
            if !std::mem::replace(&mut self.done, true) {
                Self::finish(ctx, v);
            }
        }
    }

    fn on_message(&mut self, ctx: &mut Ctx<'_>, src: NodeId, msg: WireMessage) {
        if let Some(v) = self.mc.on_message(ctx, src, &msg) {
            if !std::mem::replace(&mut self.done, true) {
                Self::finish(ctx, v);
            }
        }
    }
}
