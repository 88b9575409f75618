//! Dissemination primitives: plain multicast, consistent broadcast, and
//! Bracha's reliable broadcast.

pub mod cb;
pub mod rbb;

pub use cb::{cb_verify_certificate, Certificate, CbNode};
pub use rbb::{RbbEmit, RbbInstance, RbbStep};

use crate::simnet::Ctx;
use crate::types::{NodeId, Value};
use crate::wire::{Body, MessageKind, Root, Tag, WireMessage};

/// Best-effort announcement of one value: a single message per node, no
/// agreement guarantee of any kind.
pub fn multicast_value(ctx: &mut Ctx<'_>, me: NodeId, run: u8, value: Value) {
    let msg = WireMessage {
        sender: me,
        tag: Tag::new(run, Root::Mu).slot(me),
        body: Body::MuValue { value },
    };
    ctx.multicast(msg);
}

/// Maps a wire kind onto the reliable-broadcast step, if it is one.
pub fn rbb_step_of(kind: MessageKind) -> Option<RbbStep> {
    match kind {
        MessageKind::RbbInit => Some(RbbStep::Initial),
        MessageKind::RbbEcho => Some(RbbStep::Echo),
        MessageKind::RbbReady => Some(RbbStep::Ready),
        _ => None,
    }
}

/// Wraps an instance emission back into wire messages under the same tag.
pub fn rbb_emit_to_message(me: NodeId, tag: Tag, emit: RbbEmit) -> WireMessage {
    let body = match emit {
        RbbEmit::Echo(payload) => Body::RbbEcho { payload },
        RbbEmit::Ready(payload) => Body::RbbReady { payload },
    };
    WireMessage { sender: me, tag, body }
}

/// Starts a reliable broadcast as its origin: multicasts the initial message.
pub fn rbb_broadcast(ctx: &mut Ctx<'_>, me: NodeId, tag: Tag, payload: Vec<u8>) {
    debug_assert_eq!(tag.origin, me.0, "initial messages carry their origin");
    let msg = WireMessage { sender: me, tag, body: Body::RbbInit { payload } };
    ctx.multicast(msg);
}
