//! Consistent broadcast with uniqueness certificates.
//!
//! The source multicasts a `c-send` with its value; each node endorses only
//! the first value it sees per source and returns a signed `c-ready`; once
//! `n - t` valid endorsements are in, the source multicasts a `c-final`
//! carrying the certificate. A node delivers `(source, value)` at most once,
//! exactly when the certificate checks out. Some honest nodes may deliver
//! while others deliver nothing, but no two valid certificates can exist for
//! one source with different values: endorsements are first-value-only, and
//! two disjoint sets of `n - t` endorsers cannot fit in `n` nodes.
//!
//! The `c-final` payload is assembled when the send is performed, so any
//! endorsements validated while the send was being prepared ride along.

use crate::crypto::{Endorsement, Keyring, Proof};
use crate::simnet::{Act, Ctx, StepKind};
use crate::types::{NodeId, Value};
use crate::wire::{Body, Root, Tag, WireMessage};

/// A uniqueness certificate: `n - t` endorsements binding one source to one
/// value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub subject: NodeId,
    pub value: Value,
    pub endorsements: Vec<(NodeId, Proof)>,
}

/// Checks a certificate from `verifier`'s point of view: all endorsements
/// must verify over `(subject, value)`, endorsers must be distinct, and at
/// least `n - t` must remain.
pub fn cb_verify_certificate(
    keyring: &Keyring,
    verifier: NodeId,
    cert: &Certificate,
    n: usize,
    t: usize,
) -> bool {
    let mut valid = std::collections::BTreeSet::new();
    for (endorser, proof) in &cert.endorsements {
        let e = Endorsement {
            endorser: *endorser,
            subject: cert.subject,
            value: cert.value.clone(),
            proof: proof.clone(),
        };
        if keyring.verify_endorsement(verifier, &e) {
            valid.insert(*endorser);
        }
    }
    valid.len() >= n - t
}

/// The consistent-broadcast role of one node across all n source instances.
pub struct CbNode {
    me: NodeId,
    run: u8,
    deferred_token: u32,
    /// First value endorsed per source.
    endorsed: Vec<Option<Value>>,
    /// Delivered `(value, certificate)` per source.
    delivered: Vec<Option<(Value, Vec<(NodeId, Proof)>)>>,
    own_value: Option<Value>,
    ready_seen: Vec<bool>,
    endorsements: Vec<(NodeId, Proof)>,
    final_requested: bool,
}

impl CbNode {
    pub fn new(me: NodeId, n: usize, run: u8, deferred_token: u32) -> CbNode {
        CbNode {
            me,
            run,
            deferred_token,
            endorsed: vec![None; n],
            delivered: vec![None; n],
            own_value: None,
            ready_seen: vec![false; n],
            endorsements: Vec::new(),
            final_requested: false,
        }
    }

    fn tag(&self, subject: NodeId) -> Tag {
        Tag::new(self.run, Root::Cb).slot(subject)
    }

    /// `c-broadcast`: announce our own value to everyone.
    pub fn broadcast(&mut self, ctx: &mut Ctx<'_>, value: Value) {
        self.own_value = Some(value.clone());
        let msg = WireMessage {
            sender: self.me,
            tag: self.tag(self.me),
            body: Body::CSend { value },
        };
        ctx.multicast(msg);
    }

    pub fn delivered(&self, subject: NodeId) -> Option<&(Value, Vec<(NodeId, Proof)>)> {
        self.delivered[subject.pos()].as_ref()
    }

    /// Feeds one dissemination message; returns a delivery if one happened.
    pub fn on_message(
        &mut self,
        ctx: &mut Ctx<'_>,
        src: NodeId,
        msg: &WireMessage,
    ) -> Option<(NodeId, Value)> {
        let subject = NodeId(msg.tag.slot);
        match &msg.body {
            Body::CSend { value } => {
                // Endorse only when the channel the message arrived on is the
                // claimed source, and only the first value per source.
                if src == subject && self.endorsed[subject.pos()].is_none() {
                    self.endorsed[subject.pos()] = Some(value.clone());
                    let endorsement = ctx.endorse(subject, value);
                    let reply = WireMessage {
                        sender: self.me,
                        tag: self.tag(subject),
                        body: Body::CReady { value: value.clone(), proof: endorsement.proof },
                    };
                    ctx.unicast(src, reply);
                }
                None
            }
            Body::CReady { value, proof } => {
                if subject != self.me || self.ready_seen[src.pos()] {
                    return None;
                }
                self.ready_seen[src.pos()] = true;
                if self.own_value.as_ref() != Some(value) {
                    return None;
                }
                let endorsement = Endorsement {
                    endorser: src,
                    subject: self.me,
                    value: value.clone(),
                    proof: proof.clone(),
                };
                if ctx.verify_endorsement(&endorsement) {
                    self.endorsements.push((src, proof.clone()));
                    if self.endorsements.len() == ctx.quorums().n_minus_t && !self.final_requested
                    {
                        self.final_requested = true;
                        ctx.defer_emit(self.deferred_token);
                    }
                }
                None
            }
            Body::CFinal { value, endorsements } => {
                if self.delivered[subject.pos()].is_some() {
                    return None;
                }
                if !ctx.verify_certificate(subject, value, endorsements) {
                    return None;
                }
                self.delivered[subject.pos()] = Some((value.clone(), endorsements.clone()));
                ctx.mark_step(StepKind::ValueObtained, Some(subject));
                Some((subject, value.clone()))
            }
            _ => None,
        }
    }

    /// Builds the `c-final`, enclosing every endorsement held right now.
    pub fn build_final(&mut self) -> Vec<Act> {
        let Some(value) = self.own_value.clone() else {
            return Vec::new();
        };
        let msg = WireMessage {
            sender: self.me,
            tag: self.tag(self.me),
            body: Body::CFinal { value, endorsements: self.endorsements.clone() },
        };
        vec![Act::Multicast(msg)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::ProofMode;

    fn make_cert(keyring: &Keyring, endorsers: &[u8], subject: NodeId, value: &Value) -> Certificate {
        let endorsements = endorsers
            .iter()
            .map(|e| {
                let endorsement = keyring.endorse(NodeId(*e), subject, value);
                (NodeId(*e), endorsement.proof)
            })
            .collect();
        Certificate { subject, value: value.clone(), endorsements }
    }

    #[test]
    fn certificate_threshold_is_n_minus_t() {
        let ring = Keyring::new(4, 1, ProofMode::Signature);
        let v = Value::bytes("v");
        let ok = make_cert(&ring, &[1, 2, 3], NodeId(1), &v);
        assert!(cb_verify_certificate(&ring, NodeId(4), &ok, 4, 1));
        let short = make_cert(&ring, &[1, 2], NodeId(1), &v);
        assert!(!cb_verify_certificate(&ring, NodeId(4), &short, 4, 1));
    }

    #[test]
    fn endorsement_over_wrong_value_does_not_count() {
        let ring = Keyring::new(4, 1, ProofMode::Signature);
        let v = Value::bytes("v");
        let mut cert = make_cert(&ring, &[1, 2], NodeId(1), &v);
        let stray = ring.endorse(NodeId(3), NodeId(1), &Value::bytes("w"));
        cert.endorsements.push((NodeId(3), stray.proof));
        assert!(!cb_verify_certificate(&ring, NodeId(4), &cert, 4, 1));
    }

    #[test]
    fn duplicate_endorsers_count_once() {
        let ring = Keyring::new(4, 1, ProofMode::Signature);
        let v = Value::bytes("v");
        let mut cert = make_cert(&ring, &[1, 2], NodeId(1), &v);
        let dup = ring.endorse(NodeId(2), NodeId(1), &v);
        cert.endorsements.push((NodeId(2), dup.proof));
        assert!(!cb_verify_certificate(&ring, NodeId(4), &cert, 4, 1));
    }

    #[test]
    fn stolen_certificate_cannot_be_rebound_to_a_new_value() {
        let ring = Keyring::new(4, 1, ProofMode::Signature);
        let cert = make_cert(&ring, &[1, 2, 3], NodeId(1), &Value::bytes("v"));
        let rebound = Certificate { value: Value::bytes("w"), ..cert };
        assert!(!cb_verify_certificate(&ring, NodeId(4), &rebound, 4, 1));
    }

    #[test]
    fn transferable_in_authenticator_mode() {
        let ring = Keyring::new(4, 9, ProofMode::Authenticator);
        let cert = make_cert(&ring, &[1, 2, 4], NodeId(1), &Value::bytes("v"));
        for verifier in NodeId::all(4) {
            assert!(cb_verify_certificate(&ring, verifier, &cert, 4, 1));
        }
    }
}
