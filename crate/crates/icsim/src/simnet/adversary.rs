//! Scripted byzantine behaviors.
//!
//! The adversary corrupts a fixed subset of nodes for the whole run. A
//! corrupted node runs the honest protocol core, with its scripted deviation
//! applied at the send boundary (and, for spam, as extra injected traffic),
//! so a behavior composes with any protocol stack.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, SystemConfig};
use crate::types::{NodeId, Value};
use crate::wire::{Body, MessageKind, Root, Tag, WireMessage};

use super::Act;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Behavior {
    /// Sends nothing at all.
    Silent,
    /// Behaves honestly until the given global time, then stops entirely.
    CrashAt { time: u64 },
    /// Presents a different value to each recipient during dissemination.
    Equivocate,
    /// Completes consistent broadcast but sends the certificate message only
    /// to the listed recipients; recovery requests get a junk reply.
    WithholdFinal { recipients: Vec<NodeId> },
    /// Delays dissemination traffic to the listed recipients until just after
    /// their barrier (or round deadline).
    DelayToBarrier { recipients: Vec<NodeId> },
    /// Floods consensus broadcasts for phases up to `count` ahead.
    SpamPhases { count: u16 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdversarySpec {
    pub behaviors: BTreeMap<NodeId, Behavior>,
}

impl AdversarySpec {
    pub fn honest() -> AdversarySpec {
        AdversarySpec::default()
    }

    pub fn single(node: NodeId, behavior: Behavior) -> AdversarySpec {
        let mut behaviors = BTreeMap::new();
        behaviors.insert(node, behavior);
        AdversarySpec { behaviors }
    }

    pub fn corrupted(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.behaviors.keys().copied()
    }

    pub fn is_corrupted(&self, node: NodeId) -> bool {
        self.behaviors.contains_key(&node)
    }

    pub fn validate(&self, cfg: &SystemConfig) -> Result<(), ConfigError> {
        if self.behaviors.len() > cfg.t {
            return Err(ConfigError::FaultBoundExceeded {
                n: cfg.n,
                t: self.behaviors.len(),
                max: cfg.t,
            });
        }
        for id in self.behaviors.keys() {
            if id.0 == 0 || id.index() > cfg.n {
                return Err(ConfigError::TooFewNodes(cfg.n));
            }
        }
        Ok(())
    }
}

pub enum SendFate {
    Deliver,
    Drop,
    DelayPastBarrier,
}

/// Applies a behavior to one outgoing send, possibly rewriting it in place.
pub fn apply_to_send(behavior: &Behavior, dst: NodeId, msg: &mut WireMessage) -> SendFate {
    match behavior {
        Behavior::Silent => SendFate::Drop,
        Behavior::CrashAt { .. } => SendFate::Deliver,
        Behavior::Equivocate => {
            equivocate_rewrite(dst, msg);
            SendFate::Deliver
        }
        Behavior::WithholdFinal { recipients } => match &mut msg.body {
            Body::CFinal { .. } if !recipients.contains(&dst) => SendFate::Drop,
            Body::RetrievedValue { endorsements, .. } => {
                // A junk reply: too few endorsements to verify.
                endorsements.truncate(1);
                SendFate::Deliver
            }
            _ => SendFate::Deliver,
        },
        Behavior::DelayToBarrier { recipients } => {
            let kind = msg.body.kind();
            if recipients.contains(&dst)
                && (kind.is_dissemination() || kind == MessageKind::PeaseRound)
            {
                SendFate::DelayPastBarrier
            } else {
                SendFate::Deliver
            }
        }
        Behavior::SpamPhases { .. } => SendFate::Deliver,
    }
}

fn perturb(value: &Value, dst: NodeId) -> Value {
    match value {
        Value::Null => Value::Null,
        Value::Bytes(b) => {
            // Two variants, split by recipient parity, so disjoint halves of
            // the system see conflicting but internally consistent values.
            let mut forged = b.clone();
            forged.push(0xe0 | (dst.0 & 1));
            Value::Bytes(forged)
        }
    }
}

fn equivocate_rewrite(dst: NodeId, msg: &mut WireMessage) {
    match &mut msg.body {
        Body::MuValue { value } | Body::CSend { value } => *value = perturb(value, dst),
        Body::PeaseRound { relays } => {
            for (_, value) in relays.iter_mut() {
                *value = perturb(value, dst);
            }
        }
        Body::RbbInit { payload } => {
            // Initial messages carry either an encoded value or a consensus
            // bit; disagree per recipient either way.
            if let Some((value, rest)) = Value::decode(payload) {
                if rest.is_empty() {
                    let mut out = Vec::new();
                    perturb(&value, dst).encode(&mut out);
                    *payload = out;
                    return;
                }
            }
            if let Some(first) = payload.first_mut() {
                *first ^= dst.0 & 1;
            }
        }
        _ => {}
    }
}

/// Extra traffic a corrupted node pumps out when it switches to the result
/// consensus phase.
pub fn injections_at_barrier(
    behavior: &Behavior,
    node: NodeId,
    cfg: &SystemConfig,
    runs: usize,
) -> Vec<Act> {
    let Behavior::SpamPhases { count } = behavior else {
        return Vec::new();
    };
    let mut acts = Vec::new();
    for run in 0..runs as u8 {
        for root in [Root::Bc, Root::Mc] {
            for slot in NodeId::all(cfg.n) {
                for phase in 1..=*count {
                    let tag = Tag::new(run, root).slot(slot).origin(node).phase_step(phase, 1);
                    let msg = WireMessage {
                        sender: node,
                        tag,
                        body: Body::RbbInit { payload: vec![1, 0] },
                    };
                    acts.push(Act::Multicast(msg));
                }
            }
        }
    }
    acts
}
