//! Wire payloads: length-prefixed tagged records.
//!
//! Every message is laid out as a fixed 9-byte header followed by a
//! kind-specific body:
//!
//! ```text
//! offset size  field
//! 0      1     kind          message kind discriminant
//! 1      1     run           parallel-instance index
//! 2      1     root          accounting root (owning protocol)
//! 3      1     sender        protocol-level sender index, 1-based
//! 4      1     slot          consensus slot / broadcast subject, 0 if unused
//! 5      1     origin        sub-broadcast instance origin, 0 if unused
//! 6      2     phase (LE)    consensus phase or round number, 0 if unused
//! 8      1     step          step within a phase, 0 if unused
//! 9      ...   body          kind-specific sections, each length-prefixed
//! ```
//!
//! Values encode as a presence flag plus `u32`-LE length plus bytes; proofs
//! and endorsement lists carry their own prefixes. Layout stability matters
//! only within a run.

use crate::crypto::{Authenticator, Proof};
use crate::types::{NodeId, Value};

pub const HEADER_LEN: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MessageKind {
    MuValue = 1,
    CSend = 2,
    CReady = 3,
    CFinal = 4,
    RbbInit = 5,
    RbbEcho = 6,
    RbbReady = 7,
    PeaseRound = 8,
    Retrieve = 9,
    RetrievedValue = 10,
}

impl MessageKind {
    fn from_u8(b: u8) -> Option<MessageKind> {
        use MessageKind::*;
        Some(match b {
            1 => MuValue,
            2 => CSend,
            3 => CReady,
            4 => CFinal,
            5 => RbbInit,
            6 => RbbEcho,
            7 => RbbReady,
            8 => PeaseRound,
            9 => Retrieve,
            10 => RetrievedValue,
            _ => return None,
        })
    }

    /// Value-dissemination kinds are dropped once a node crosses the barrier.
    pub fn is_dissemination(self) -> bool {
        matches!(
            self,
            MessageKind::MuValue | MessageKind::CSend | MessageKind::CReady | MessageKind::CFinal
        )
    }
}

/// Which protocol a message is accounted under. Sub-broadcasts launched by a
/// consensus layer inherit the launcher's root, so per-root totals line up
/// with the closed-form counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Root {
    Mu = 1,
    Rbb = 2,
    Cb = 3,
    Bc = 4,
    Mc = 5,
    Pease = 6,
    Retrieve = 7,
    Eic = 8,
}

impl Root {
    pub const ALL: [Root; 8] = [
        Root::Mu,
        Root::Rbb,
        Root::Cb,
        Root::Bc,
        Root::Mc,
        Root::Pease,
        Root::Retrieve,
        Root::Eic,
    ];

    fn from_u8(b: u8) -> Option<Root> {
        use Root::*;
        Some(match b {
            1 => Mu,
            2 => Rbb,
            3 => Cb,
            4 => Bc,
            5 => Mc,
            6 => Pease,
            7 => Retrieve,
            8 => Eic,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Root::Mu => "multicast",
            Root::Rbb => "rbb",
            Root::Cb => "cb",
            Root::Bc => "bc",
            Root::Mc => "mc",
            Root::Pease => "pease",
            Root::Retrieve => "retrieve",
            Root::Eic => "eic",
        }
    }
}

/// Instance addressing carried by every message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag {
    pub run: u8,
    pub root: Root,
    pub slot: u8,
    pub origin: u8,
    pub phase: u16,
    pub step: u8,
}

impl Tag {
    pub fn new(run: u8, root: Root) -> Tag {
        Tag { run, root, slot: 0, origin: 0, phase: 0, step: 0 }
    }

    pub fn slot(mut self, slot: NodeId) -> Tag {
        self.slot = slot.0;
        self
    }

    pub fn origin(mut self, origin: NodeId) -> Tag {
        self.origin = origin.0;
        self
    }

    pub fn phase_step(mut self, phase: u16, step: u8) -> Tag {
        self.phase = phase;
        self.step = step;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    MuValue { value: Value },
    CSend { value: Value },
    CReady { value: Value, proof: Proof },
    CFinal { value: Value, endorsements: Vec<(NodeId, Proof)> },
    /// Sub-broadcast payloads are opaque to the broadcast layer.
    RbbInit { payload: Vec<u8> },
    RbbEcho { payload: Vec<u8> },
    RbbReady { payload: Vec<u8> },
    /// One batched relay round: `(path, value)` pairs keyed by the chain of
    /// relayers the value travelled through.
    PeaseRound { relays: Vec<(Vec<u8>, Value)> },
    Retrieve,
    RetrievedValue { value: Value, endorsements: Vec<(NodeId, Proof)> },
}

impl Body {
    pub fn kind(&self) -> MessageKind {
        match self {
            Body::MuValue { .. } => MessageKind::MuValue,
            Body::CSend { .. } => MessageKind::CSend,
            Body::CReady { .. } => MessageKind::CReady,
            Body::CFinal { .. } => MessageKind::CFinal,
            Body::RbbInit { .. } => MessageKind::RbbInit,
            Body::RbbEcho { .. } => MessageKind::RbbEcho,
            Body::RbbReady { .. } => MessageKind::RbbReady,
            Body::PeaseRound { .. } => MessageKind::PeaseRound,
            Body::Retrieve => MessageKind::Retrieve,
            Body::RetrievedValue { .. } => MessageKind::RetrievedValue,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireMessage {
    pub sender: NodeId,
    pub tag: Tag,
    pub body: Body,
}

impl WireMessage {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 16);
        out.push(self.body.kind() as u8);
        out.push(self.tag.run);
        out.push(self.tag.root as u8);
        out.push(self.sender.0);
        out.push(self.tag.slot);
        out.push(self.tag.origin);
        out.extend_from_slice(&self.tag.phase.to_le_bytes());
        out.push(self.tag.step);
        match &self.body {
            Body::MuValue { value } | Body::CSend { value } => value.encode(&mut out),
            Body::CReady { value, proof } => {
                value.encode(&mut out);
                encode_proof(proof, &mut out);
            }
            Body::CFinal { value, endorsements }
            | Body::RetrievedValue { value, endorsements } => {
                value.encode(&mut out);
                encode_endorsements(endorsements, &mut out);
            }
            Body::RbbInit { payload } | Body::RbbEcho { payload } | Body::RbbReady { payload } => {
                out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
                out.extend_from_slice(payload);
            }
            Body::PeaseRound { relays } => {
                out.extend_from_slice(&(relays.len() as u32).to_le_bytes());
                for (path, value) in relays {
                    out.push(path.len() as u8);
                    out.extend_from_slice(path);
                    value.encode(&mut out);
                }
            }
            Body::Retrieve => {}
        }
        out
    }

    /// Strict decode; anything malformed is rejected as a whole.
    pub fn decode(bytes: &[u8]) -> Option<WireMessage> {
        if bytes.len() < HEADER_LEN {
            return None;
        }
        let kind = MessageKind::from_u8(bytes[0])?;
        let tag = Tag {
            run: bytes[1],
            root: Root::from_u8(bytes[2])?,
            slot: bytes[4],
            origin: bytes[5],
            phase: u16::from_le_bytes([bytes[6], bytes[7]]),
            step: bytes[8],
        };
        let sender = NodeId(bytes[3]);
        let mut rest = &bytes[HEADER_LEN..];
        let body = match kind {
            MessageKind::MuValue => {
                let (value, r) = Value::decode(rest)?;
                rest = r;
                Body::MuValue { value }
            }
            MessageKind::CSend => {
                let (value, r) = Value::decode(rest)?;
                rest = r;
                Body::CSend { value }
            }
            MessageKind::CReady => {
                let (value, r) = Value::decode(rest)?;
                let (proof, r) = decode_proof(r)?;
                rest = r;
                Body::CReady { value, proof }
            }
            MessageKind::CFinal | MessageKind::RetrievedValue => {
                let (value, r) = Value::decode(rest)?;
                let (endorsements, r) = decode_endorsements(r)?;
                rest = r;
                if kind == MessageKind::CFinal {
                    Body::CFinal { value, endorsements }
                } else {
                    Body::RetrievedValue { value, endorsements }
                }
            }
            MessageKind::RbbInit | MessageKind::RbbEcho | MessageKind::RbbReady => {
                let len = u32::from_le_bytes(rest.get(..4)?.try_into().ok()?) as usize;
                let payload = rest.get(4..4 + len)?.to_vec();
                rest = &rest[4 + len..];
                match kind {
                    MessageKind::RbbInit => Body::RbbInit { payload },
                    MessageKind::RbbEcho => Body::RbbEcho { payload },
                    _ => Body::RbbReady { payload },
                }
            }
            MessageKind::PeaseRound => {
                let count = u32::from_le_bytes(rest.get(..4)?.try_into().ok()?) as usize;
                rest = &rest[4..];
                if count > 1 << 20 {
                    return None;
                }
                let mut relays = Vec::with_capacity(count);
                for _ in 0..count {
                    let plen = *rest.first()? as usize;
                    let path = rest.get(1..1 + plen)?.to_vec();
                    let (value, r) = Value::decode(&rest[1 + plen..])?;
                    rest = r;
                    relays.push((path, value));
                }
                Body::PeaseRound { relays }
            }
            MessageKind::Retrieve => Body::Retrieve,
        };
        if !rest.is_empty() {
            return None;
        }
        Some(WireMessage { sender, tag, body })
    }
}

fn encode_proof(proof: &Proof, out: &mut Vec<u8>) {
    match proof {
        Proof::Signature(sig) => {
            out.push(0x01);
            out.extend_from_slice(&(sig.len() as u32).to_le_bytes());
            out.extend_from_slice(sig);
        }
        Proof::Authenticator(auth) => {
            out.push(0x02);
            out.extend_from_slice(&(auth.entries.len() as u32).to_le_bytes());
            for e in &auth.entries {
                out.extend_from_slice(e);
            }
        }
    }
}

fn decode_proof(input: &[u8]) -> Option<(Proof, &[u8])> {
    match input.first()? {
        0x01 => {
            let len = u32::from_le_bytes(input.get(1..5)?.try_into().ok()?) as usize;
            if len > 1 << 16 {
                return None;
            }
            let sig = input.get(5..5 + len)?.to_vec();
            Some((Proof::Signature(sig), &input[5 + len..]))
        }
        0x02 => {
            let count = u32::from_le_bytes(input.get(1..5)?.try_into().ok()?) as usize;
            if count > 255 {
                return None;
            }
            let mut entries = Vec::with_capacity(count);
            let mut rest = &input[5..];
            for _ in 0..count {
                let entry: [u8; 32] = rest.get(..32)?.try_into().ok()?;
                entries.push(entry);
                rest = &rest[32..];
            }
            Some((Proof::Authenticator(Authenticator { entries }), rest))
        }
        _ => None,
    }
}

fn encode_endorsements(endorsements: &[(NodeId, Proof)], out: &mut Vec<u8>) {
    out.extend_from_slice(&(endorsements.len() as u32).to_le_bytes());
    for (endorser, proof) in endorsements {
        out.push(endorser.0);
        encode_proof(proof, out);
    }
}

fn decode_endorsements(input: &[u8]) -> Option<(Vec<(NodeId, Proof)>, &[u8])> {
    let count = u32::from_le_bytes(input.get(..4)?.try_into().ok()?) as usize;
    if count > 255 {
        return None;
    }
    let mut rest = &input[4..];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let endorser = NodeId(*rest.first()?);
        let (proof, r) = decode_proof(&rest[1..])?;
        out.push((endorser, proof));
        rest = r;
    }
    Some((out, rest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_value() -> impl Strategy<Value = Value> {
        prop_oneof![
            Just(Value::Null),
            proptest::collection::vec(any::<u8>(), 0..24).prop_map(Value::Bytes),
        ]
    }

    fn arb_proof() -> BoxedStrategy<Proof> {
        prop_oneof![
            proptest::collection::vec(any::<u8>(), 64..=64).prop_map(Proof::Signature),
            proptest::collection::vec(any::<[u8; 32]>(), 1..6)
                .prop_map(|entries| Proof::Authenticator(Authenticator { entries })),
        ]
        .boxed()
    }

    fn arb_body() -> impl Strategy<Value = Body> {
        let endorsements = proptest::collection::vec((1u8..8, arb_proof()), 0..5)
            .prop_map(|v| v.into_iter().map(|(i, p)| (NodeId(i), p)).collect::<Vec<_>>())
            .boxed();
        prop_oneof![
            arb_value().prop_map(|value| Body::MuValue { value }),
            arb_value().prop_map(|value| Body::CSend { value }),
            (arb_value(), arb_proof()).prop_map(|(value, proof)| Body::CReady { value, proof }),
            (arb_value(), endorsements.clone())
                .prop_map(|(value, endorsements)| Body::CFinal { value, endorsements }),
            (arb_value(), endorsements)
                .prop_map(|(value, endorsements)| Body::RetrievedValue { value, endorsements }),
            proptest::collection::vec(any::<u8>(), 0..32)
                .prop_map(|payload| Body::RbbInit { payload }),
            proptest::collection::vec(any::<u8>(), 0..32)
                .prop_map(|payload| Body::RbbEcho { payload }),
            proptest::collection::vec(any::<u8>(), 0..32)
                .prop_map(|payload| Body::RbbReady { payload }),
            proptest::collection::vec((proptest::collection::vec(1u8..8, 0..4), arb_value()), 0..4)
                .prop_map(|relays| Body::PeaseRound { relays }),
            Just(Body::Retrieve),
        ]
    }

    proptest! {
        #[test]
        fn round_trip(
            body in arb_body(),
            sender in 1u8..16,
            run in 0u8..4,
            slot in 0u8..16,
            origin in 0u8..16,
            phase in 0u16..100,
            step in 0u8..4,
        ) {
            let msg = WireMessage {
                sender: NodeId(sender),
                tag: Tag { run, root: Root::Bc, slot, origin, phase, step },
                body,
            };
            let bytes = msg.encode();
            prop_assert_eq!(WireMessage::decode(&bytes), Some(msg));
        }

        #[test]
        fn truncation_never_panics(body in arb_body(), cut in 0usize..40) {
            let msg = WireMessage {
                sender: NodeId(1),
                tag: Tag::new(0, Root::Cb),
                body,
            };
            let bytes = msg.encode();
            let cut = cut.min(bytes.len());
            let _ = WireMessage::decode(&bytes[..bytes.len() - cut]);
        }
    }

    #[test]
    fn garbage_is_rejected() {
        assert_eq!(WireMessage::decode(&[]), None);
        assert_eq!(WireMessage::decode(&[0xff; 9]), None);
        assert_eq!(WireMessage::decode(&[1, 0, 0, 1, 0, 0, 0, 0, 0, 0x44]), None);
    }
}
