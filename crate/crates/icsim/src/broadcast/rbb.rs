//! Bracha's reliable broadcast, one instance per `(origin, tag)`.
//!
//! Three steps: the origin multicasts an `initial` message; every node that
//! receives the first initial from the origin multicasts an `echo`; a node
//! that collects `floor((n+t)/2) + 1` echoes for one payload, or `t + 1`
//! readies for it, multicasts a `ready`; collecting `2t + 1` readies delivers
//! the payload. Echo and ready are each sent at most once per instance, and
//! an instance delivers at most once; messages for already-delivered
//! instances are ignored.
//!
//! Resilience is the usual one: two different payloads can never both reach
//! the echo quorum, and `t + 1` readies contain an honest one, so honest
//! nodes either all deliver the same payload or none delivers at all.

use std::collections::BTreeMap;

use crate::config::QuorumThresholds;
use crate::types::NodeId;

/// What the owning node must multicast in response to an instance event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RbbEmit {
    Echo(Vec<u8>),
    Ready(Vec<u8>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbbStep {
    Initial,
    Echo,
    Ready,
}

/// Per-instance receiver state at one node.
#[derive(Debug, Clone, Default)]
pub struct RbbInstance {
    initial_seen: bool,
    echo_sent: bool,
    ready_sent: bool,
    delivered: bool,
    echoes: BTreeMap<NodeId, Vec<u8>>,
    readies: BTreeMap<NodeId, Vec<u8>>,
}

impl RbbInstance {
    pub fn new() -> RbbInstance {
        RbbInstance::default()
    }

    pub fn is_delivered(&self) -> bool {
        self.delivered
    }

    /// Feeds one message into the instance. `origin` is the instance's
    /// designated broadcaster; initial messages from anyone else are ignored.
    /// Returns messages to multicast and, at most once, the delivered payload.
    pub fn on_message(
        &mut self,
        q: &QuorumThresholds,
        origin: NodeId,
        src: NodeId,
        step: RbbStep,
        payload: &[u8],
    ) -> (Vec<RbbEmit>, Option<Vec<u8>>) {
        if self.delivered {
            return (Vec::new(), None);
        }
        let mut emits = Vec::new();
        match step {
            RbbStep::Initial => {
                if src == origin && !self.initial_seen {
                    self.initial_seen = true;
                    if !self.echo_sent {
                        self.echo_sent = true;
                        emits.push(RbbEmit::Echo(payload.to_vec()));
                    }
                }
            }
            RbbStep::Echo => {
                self.echoes.entry(src).or_insert_with(|| payload.to_vec());
                if !self.ready_sent {
                    let same = self.echoes.values().filter(|p| *p == payload).count();
                    if same >= q.echo_threshold {
                        self.ready_sent = true;
                        emits.push(RbbEmit::Ready(payload.to_vec()));
                    }
                }
            }
            RbbStep::Ready => {
                self.readies.entry(src).or_insert_with(|| payload.to_vec());
                let same = self.readies.values().filter(|p| *p == payload).count();
                if !self.ready_sent && same >= q.ready_threshold {
                    self.ready_sent = true;
                    emits.push(RbbEmit::Ready(payload.to_vec()));
                }
                if same >= q.decide_threshold {
                    self.delivered = true;
                    return (emits, Some(payload.to_vec()));
                }
            }
        }
        (emits, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::quorum_thresholds;

    fn q4() -> QuorumThresholds {
        quorum_thresholds(4, 1).unwrap()
    }

    #[test]
    fn echoes_only_first_initial_from_origin() {
        let q = q4();
        let mut inst = RbbInstance::new();
        let (emits, _) = inst.on_message(&q, NodeId(1), NodeId(2), RbbStep::Initial, b"a");
        assert!(emits.is_empty(), "initial from a non-origin is ignored");
        let (emits, _) = inst.on_message(&q, NodeId(1), NodeId(1), RbbStep::Initial, b"a");
        assert_eq!(emits, vec![RbbEmit::Echo(b"a".to_vec())]);
        let (emits, _) = inst.on_message(&q, NodeId(1), NodeId(1), RbbStep::Initial, b"b");
        assert!(emits.is_empty(), "second initial is ignored");
    }

    #[test]
    fn ready_on_echo_quorum_then_deliver_on_readies() {
        let q = q4();
        let mut inst = RbbInstance::new();
        for src in [2, 3] {
            let (emits, d) = inst.on_message(&q, NodeId(1), NodeId(src), RbbStep::Echo, b"a");
            assert!(emits.is_empty() && d.is_none());
        }
        let (emits, d) = inst.on_message(&q, NodeId(1), NodeId(4), RbbStep::Echo, b"a");
        assert_eq!(emits, vec![RbbEmit::Ready(b"a".to_vec())]);
        assert!(d.is_none());

        for src in [2, 3] {
            let (_, d) = inst.on_message(&q, NodeId(1), NodeId(src), RbbStep::Ready, b"a");
            assert!(d.is_none());
        }
        let (_, d) = inst.on_message(&q, NodeId(1), NodeId(4), RbbStep::Ready, b"a");
        assert_eq!(d, Some(b"a".to_vec()));
        // Delivered instances ignore further traffic.
        let (emits, d) = inst.on_message(&q, NodeId(1), NodeId(1), RbbStep::Ready, b"a");
        assert!(emits.is_empty() && d.is_none());
    }

    #[test]
    fn ready_amplification_from_t_plus_one_readies() {
        let q = q4();
        let mut inst = RbbInstance::new();
        let (emits, _) = inst.on_message(&q, NodeId(1), NodeId(2), RbbStep::Ready, b"a");
        assert!(emits.is_empty());
        let (emits, _) = inst.on_message(&q, NodeId(1), NodeId(3), RbbStep::Ready, b"a");
        assert_eq!(emits, vec![RbbEmit::Ready(b"a".to_vec())], "t+1 readies amplify");
    }

    #[test]
    fn split_echoes_cannot_reach_two_quorums() {
        // n=4: echo quorum is 3, so 2/2 split yields no ready at all.
        let q = q4();
        let mut inst = RbbInstance::new();
        inst.on_message(&q, NodeId(1), NodeId(1), RbbStep::Echo, b"a");
        inst.on_message(&q, NodeId(1), NodeId(2), RbbStep::Echo, b"a");
        inst.on_message(&q, NodeId(1), NodeId(3), RbbStep::Echo, b"b");
        let (emits, _) = inst.on_message(&q, NodeId(1), NodeId(4), RbbStep::Echo, b"b");
        assert!(emits.is_empty());
        assert!(!inst.ready_sent);
    }

    #[test]
    fn duplicate_sender_messages_count_once() {
        let q = q4();
        let mut inst = RbbInstance::new();
        for _ in 0..5 {
            inst.on_message(&q, NodeId(1), NodeId(2), RbbStep::Echo, b"a");
        }
        assert_eq!(inst.echoes.len(), 1);
        assert!(!inst.ready_sent);
    }
}
