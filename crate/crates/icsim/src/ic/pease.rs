//! The classical `t + 1`-round algorithm, run over timeouts.
//!
//! Nodes exchange relayed values over an exponential information-gathering
//! tree: round 1 announces each node's own value, and round `r` relays
//! everything learned in round `r - 1`, labelled by the chain of relayers.
//! Each round closes on the local clock at `r * round_timeout`, or early
//! once all n round messages are in, so fault-free runs never wait for a
//! timeout. A round message arriving after its round closed is dropped and
//! the sender counted toward the fault budget; when real plus timeout-induced
//! faults exceed `t`, the node flags the run as outside its assumptions. One
//! multicast per node per round gives `(t + 1) * n^2` messages in fault-free
//! runs.
//!
//! After round `t + 1`, each slot is resolved bottom-up: a leaf is the value
//! stored on its path, an inner label resolves to the strict majority of its
//! children (null when there is none), and slot j is the resolution of the
//! label `(j)`.

use std::collections::{BTreeMap, BTreeSet};

use crate::simnet::{Ctx, Protocol};
use crate::types::{NodeId, ResultVector, Value};
use crate::wire::{Body, Root, Tag, WireMessage};

struct RunState {
    value: Value,
    round: u16,
    tree: BTreeMap<Vec<u8>, Value>,
    round_seen: BTreeMap<u16, BTreeSet<NodeId>>,
    fault_suspects: BTreeSet<NodeId>,
    done: bool,
}

pub struct PeaseNode {
    me: NodeId,
    runs: Vec<RunState>,
}

impl PeaseNode {
    pub fn new(me: NodeId, values: Vec<Value>) -> PeaseNode {
        let runs = values
            .into_iter()
            .map(|value| RunState {
                value,
                round: 1,
                tree: BTreeMap::new(),
                round_seen: BTreeMap::new(),
                fault_suspects: BTreeSet::new(),
                done: false,
            })
            .collect();
        PeaseNode { me, runs }
    }

    fn timer_id(run: usize, round: u16) -> u32 {
        ((run as u32) << 16) | u32::from(round)
    }

    fn send_round(me: NodeId, ctx: &mut Ctx<'_>, run_index: usize, run: &mut RunState) {
        let round = run.round;
        let relays: Vec<(Vec<u8>, Value)> = if round == 1 {
            vec![(Vec::new(), run.value.clone())]
        } else {
            run.tree
                .iter()
                .filter(|(path, _)| {
                    path.len() == (round - 1) as usize && !path.contains(&me.0)
                })
                .map(|(path, value)| (path.clone(), value.clone()))
                .collect()
        };
        let msg = WireMessage {
            sender: me,
            tag: Tag::new(run_index as u8, Root::Pease).phase_step(round, 0),
            body: Body::PeaseRound { relays },
        };
        ctx.multicast(msg);
        let deadline = u64::from(round) * ctx.config().round_timeout;
        ctx.set_timer_at_local(deadline, Self::timer_id(run_index, round));
    }

    /// Closes the current round: anyone silent is a suspect, and past the
    /// last round the tree is resolved into the result vector.
    fn close_round(me: NodeId, ctx: &mut Ctx<'_>, run_index: usize, run: &mut RunState) {
        let n = ctx.config().n;
        let t = ctx.config().t;
        let seen = run.round_seen.entry(run.round).or_default();
        for id in NodeId::all(n) {
            if !seen.contains(&id) {
                run.fault_suspects.insert(id);
            }
        }
        if run.fault_suspects.len() > t {
            ctx.report_breach();
        }
        if run.round as usize == t + 1 {
            run.done = true;
            let mut vector = ResultVector::new(n);
            for slot in NodeId::all(n) {
                let value = resolve(&run.tree, &[slot.0], n, t);
                ctx.record_upcall(slot, value.clone());
                vector.set(slot, value);
            }
            ctx.set_outcome(vector);
        } else {
            run.round += 1;
            Self::send_round(me, ctx, run_index, run);
        }
    }

    fn maybe_short_circuit(me: NodeId, ctx: &mut Ctx<'_>, run_index: usize, run: &mut RunState) {
        let n = ctx.config().n;
        while !run.done
            && run.round_seen.get(&run.round).map_or(false, |seen| seen.len() == n)
        {
            Self::close_round(me, ctx, run_index, run);
        }
    }
}

/// Bottom-up majority resolution of one tree label.
fn resolve(tree: &BTreeMap<Vec<u8>, Value>, path: &[u8], n: usize, t: usize) -> Value {
    if path.len() == t + 1 {
        return tree.get(path).cloned().unwrap_or(Value::Null);
    }
    let mut counts: BTreeMap<Value, usize> = BTreeMap::new();
    let mut total = 0usize;
    for k in 1..=n as u8 {
        if path.contains(&k) {
            continue;
        }
        let mut child = path.to_vec();
        child.push(k);
        *counts.entry(resolve(tree, &child, n, t)).or_default() += 1;
        total += 1;
    }
    counts
        .into_iter()
        .find(|(_, c)| 2 * c > total)
        .map(|(v, _)| v)
        .unwrap_or(Value::Null)
}

impl Protocol for PeaseNode {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        let me = self.me;
        for (r, run) in self.runs.iter_mut().enumerate() {
            ctx.set_run(r);
            Self::send_round(me, ctx, r, run);
        }
    }

    fn on_message(&mut self, ctx: &mut Ctx<'_>, src: NodeId, msg: WireMessage) {
        let me = self.me;
        let Some(run) = self.runs.get_mut(msg.tag.run as usize) else {
            return;
        };
        let Body::PeaseRound { relays } = &msg.body else {
            return;
        };
        ctx.set_run(msg.tag.run as usize);
        let round = msg.tag.phase;
        if run.done || round == 0 {
            return;
        }
        if round < run.round {
            // Too late: this round already closed here. The sender joins the
            // effective-fault tally.
            ctx.note_late_drop();
            run.fault_suspects.insert(src);
            if run.fault_suspects.len() > ctx.config().t {
                ctx.report_breach();
            }
            return;
        }
        let n = ctx.config().n;
        let expected_len = (round - 1) as usize;
        for (path, value) in relays {
            let well_formed = path.len() == expected_len
                && !path.contains(&src.0)
                && path.iter().all(|k| (1..=n as u8).contains(k))
                && path.iter().collect::<BTreeSet<_>>().len() == path.len();
            if !well_formed {
                continue;
            }
            let mut stored = path.clone();
            stored.push(src.0);
            run.tree.entry(stored).or_insert_with(|| value.clone());
        }
        run.round_seen.entry(round).or_default().insert(src);
        Self::maybe_short_circuit(me, ctx, msg.tag.run as usize, run);
    }

    fn on_timer(&mut self, ctx: &mut Ctx<'_>, id: u32) {
        let me = self.me;
        let run_index = (id >> 16) as usize;
        let round = (id & 0xffff) as u16;
        let Some(run) = self.runs.get_mut(run_index) else {
            return;
        };
        ctx.set_run(run_index);
        if !run.done && run.round == round {
            Self::close_round(me, ctx, run_index, run);
            Self::maybe_short_circuit(me, ctx, run_index, run);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_majority_and_default() {
        let n = 4;
        let t = 1;
        let mut tree = BTreeMap::new();
        // Slot 1: children (1,2), (1,3), (1,4) at leaf depth.
        tree.insert(vec![1, 2], Value::bytes("a"));
        tree.insert(vec![1, 3], Value::bytes("a"));
        tree.insert(vec![1, 4], Value::bytes("b"));
        assert_eq!(resolve(&tree, &[1], n, t), Value::bytes("a"));
        // No strict majority resolves to null.
        tree.insert(vec![2, 1], Value::bytes("a"));
        tree.insert(vec![2, 3], Value::bytes("b"));
        tree.insert(vec![2, 4], Value::bytes("c"));
        assert_eq!(resolve(&tree, &[2], n, t), Value::Null);
        // Missing children count as null.
        assert_eq!(resolve(&tree, &[3], n, t), Value::Null);
    }
}
