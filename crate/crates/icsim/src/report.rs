//! Per-run reports: message and signature accounting, per-node outcomes and
//! decision latencies, drop counters, and the event-trace hash.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::types::{NodeId, ResultVector, Value};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    pub corrupted: Vec<NodeId>,
    pub inputs: Vec<Value>,

    /// Sends per owning protocol, keyed by root name.
    pub messages_by_primitive: BTreeMap<String, u64>,
    pub total_messages: u64,
    /// Proof generations plus verifications.
    pub signature_ops: u64,

    /// `[node][instance]`, local clock at the (last) decision.
    pub decision_time: Vec<Vec<Option<u64>>>,
    /// `[node][instance]`, final vectors of nodes that decided.
    pub outcomes: Vec<Vec<Option<ResultVector>>>,
    /// `[node][instance]`, ordered per-slot agreement up-calls.
    pub upcalls: Vec<Vec<Vec<(NodeId, Value)>>>,

    pub late_drops: u64,
    pub spam_drops: u64,
    pub rejected_replies: u64,
    pub garbage_drops: u64,
    /// Largest number of distinct consensus phases any instance held
    /// buffered messages for.
    pub max_phase_span: u16,
    /// Highest consensus phase any instance entered.
    pub max_bc_phase: u16,
    /// Some node observed more effective faults than the bound allows.
    pub assumption_breach: bool,

    pub final_global_time: u64,
    /// The run hit its virtual-time budget before going quiet.
    pub truncated: bool,
    pub trace_hash: String,
}

impl RunReport {
    pub fn is_honest(&self, node: NodeId) -> bool {
        !self.corrupted.contains(&node)
    }

    pub fn honest_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        NodeId::all(self.n).filter(|id| self.is_honest(*id))
    }

    /// All honest nodes decided every instance.
    pub fn all_honest_decided(&self) -> bool {
        self.honest_nodes()
            .all(|id| self.decision_time[id.pos()].iter().all(|d| d.is_some()))
    }

    /// Byte-identical outcomes across honest nodes, per instance.
    pub fn honest_agreement(&self) -> bool {
        let honest: Vec<NodeId> = self.honest_nodes().collect();
        let Some(first) = honest.first() else {
            return true;
        };
        let runs = self.outcomes[first.pos()].len();
        (0..runs).all(|r| {
            let reference = &self.outcomes[first.pos()][r];
            honest.iter().all(|id| &self.outcomes[id.pos()][r] == reference)
        })
    }

    /// Every honest node's slot carries that node's input, in every honest
    /// outcome.
    pub fn honest_validity(&self) -> bool {
        let honest: Vec<NodeId> = self.honest_nodes().collect();
        honest.iter().all(|id| {
            self.outcomes[id.pos()].iter().all(|outcome| match outcome {
                Some(vector) => honest
                    .iter()
                    .all(|slot| vector.get(*slot) == &self.inputs[slot.pos()]),
                None => false,
            })
        })
    }

    pub fn messages(&self, root: &str) -> u64 {
        self.messages_by_primitive.get(root).copied().unwrap_or(0)
    }

    /// Worst decision latency across honest nodes and instances, if all
    /// decided.
    pub fn worst_honest_latency(&self) -> Option<u64> {
        let mut worst = 0;
        for id in self.honest_nodes() {
            for d in &self.decision_time[id.pos()] {
                worst = worst.max((*d)?);
            }
        }
        Some(worst)
    }
}
