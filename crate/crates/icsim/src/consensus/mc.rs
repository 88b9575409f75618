//! Multi-valued consensus from two reliable-broadcast rounds and one binary
//! consensus.
//!
//! Stage 1: every node reliably broadcasts its proposal and collects `n - t`
//! of them; if at least `n - 2t` of those carry one identical value it votes
//! for that value, otherwise it votes null. Stage 2: votes are reliably
//! broadcast too. A vote for `v` only counts once the receiver has itself
//! seen `n - 2t` proposals for `v`, and a null vote only counts once the
//! receiver can account for some `n - t` proposals among which no value
//! reaches `n - 2t`; both conditions are monotone and eventually hold for
//! every honest vote. Having collected `n - t` countable votes, a node
//! enters binary consensus with 1 exactly when some value holds a strict
//! majority (`> n/2`) of them. An outcome of 0 decides null; an outcome of 1
//! decides the unique value that ever gathers a strict majority of countable
//! votes.
//!
//! The majority threshold is what makes the decision unambiguous: votes ride
//! on reliable broadcast, so each node contributes one vote system-wide and
//! two values can never both clear `n/2`. It is still reachable whenever it
//! matters: with every honest node proposing `v`, contrary votes never
//! become countable, so the `n - t` honest votes for `v` clear the majority
//! at every node; and an outcome of 1 means some honest node already saw a
//! majority, whose votes and justifying proposals reach everyone.

use std::collections::{BTreeMap, BTreeSet};

use crate::broadcast::{rbb_broadcast, rbb_emit_to_message, rbb_step_of, RbbInstance};
use crate::config::QuorumThresholds;
use crate::simnet::Ctx;
use crate::types::{NodeId, Value};
use crate::wire::{Body, Root, Tag, WireMessage};

use super::bc::BcInstance;

const STAGE_PROPOSAL: u8 = 1;
const STAGE_VOTE: u8 = 2;

/// One multi-valued consensus instance at one node.
pub struct McInstance {
    me: NodeId,
    slot: NodeId,
    run: u8,
    root: Root,
    n: usize,
    t: usize,
    quorums: QuorumThresholds,

    proposal: Option<Value>,
    proposals: BTreeMap<NodeId, Value>,
    votes: BTreeMap<NodeId, Value>,
    votes_valid: BTreeSet<NodeId>,
    voted: bool,
    bc: BcInstance,
    bc_entered: bool,
    bc_outcome: Option<bool>,
    decided: Option<Value>,

    rbb: BTreeMap<(u8, NodeId), RbbInstance>,
}

impl McInstance {
    pub fn new(
        me: NodeId,
        slot: NodeId,
        run: u8,
        root: Root,
        n: usize,
        t: usize,
        quorums: QuorumThresholds,
        h_window: u16,
    ) -> McInstance {
        McInstance {
            me,
            slot,
            run,
            root,
            n,
            t,
            quorums,
            proposal: None,
            proposals: BTreeMap::new(),
            votes: BTreeMap::new(),
            votes_valid: BTreeSet::new(),
            voted: false,
            bc: BcInstance::new(me, slot, run, root, n, quorums, h_window),
            bc_entered: false,
            bc_outcome: None,
            decided: None,
            rbb: BTreeMap::new(),
        }
    }

    pub fn decided(&self) -> Option<&Value> {
        self.decided.as_ref()
    }

    pub fn bc_phase(&self) -> u16 {
        self.bc.current_phase()
    }

    fn support(&self) -> usize {
        self.n - 2 * self.t
    }

    fn majority(&self) -> usize {
        self.n / 2 + 1
    }

    fn stage_tag(&self, stage: u8, origin: NodeId) -> Tag {
        Tag::new(self.run, self.root).slot(self.slot).origin(origin).phase_step(0, stage)
    }

    pub fn propose(&mut self, ctx: &mut Ctx<'_>, value: Value) -> Option<Value> {
        if self.proposal.is_some() {
            return None;
        }
        self.proposal = Some(value.clone());
        let mut payload = Vec::new();
        value.encode(&mut payload);
        rbb_broadcast(ctx, self.me, self.stage_tag(STAGE_PROPOSAL, self.me), payload);
        self.advance(ctx)
    }

    /// Feeds one wire message; returns the decision when it happens.
    pub fn on_message(
        &mut self,
        ctx: &mut Ctx<'_>,
        src: NodeId,
        msg: &WireMessage,
    ) -> Option<Value> {
        if msg.tag.phase > 0 {
            // Binary consensus traffic.
            if let Some(outcome) = self.bc.on_message(ctx, src, msg) {
                self.bc_outcome = Some(outcome);
            }
            return self.advance(ctx);
        }
        let stage = msg.tag.step;
        if !(stage == STAGE_PROPOSAL || stage == STAGE_VOTE) {
            return None;
        }
        let Some(step) = rbb_step_of(msg.body.kind()) else {
            return None;
        };
        let payload = match &msg.body {
            Body::RbbInit { payload } | Body::RbbEcho { payload } | Body::RbbReady { payload } => {
                payload
            }
            _ => return None,
        };
        let origin = NodeId(msg.tag.origin);
        if origin.0 == 0 || origin.index() > self.n {
            return None;
        }
        let inst = self.rbb.entry((stage, origin)).or_default();
        let (emits, delivered) = inst.on_message(&self.quorums, origin, src, step, payload);
        let tag = self.stage_tag(stage, origin);
        for emit in emits {
            ctx.multicast(rbb_emit_to_message(self.me, tag, emit));
        }
        if let Some(body) = delivered {
            if let Some((value, rest)) = Value::decode(&body) {
                if rest.is_empty() {
                    match stage {
                        STAGE_PROPOSAL => {
                            self.proposals.entry(origin).or_insert(value);
                        }
                        _ => {
                            self.votes.entry(origin).or_insert(value);
                        }
                    }
                }
            }
        }
        self.advance(ctx)
    }

    /// Runs every enabled once-only transition.
    fn advance(&mut self, ctx: &mut Ctx<'_>) -> Option<Value> {
        self.revalidate_votes();

        if !self.voted && self.proposal.is_some() && self.proposals.len() >= self.quorums.n_minus_t
        {
            self.voted = true;
            let vote = self.derive_vote();
            let mut payload = Vec::new();
            vote.encode(&mut payload);
            rbb_broadcast(ctx, self.me, self.stage_tag(STAGE_VOTE, self.me), payload);
            self.revalidate_votes();
        }

        if self.voted && !self.bc_entered && self.votes_valid.len() >= self.quorums.n_minus_t {
            self.bc_entered = true;
            let input = self.countable_majority_value().is_some();
            if let Ok(Some(outcome)) = self.bc.propose(ctx, input) {
                self.bc_outcome = Some(outcome);
            }
        }

        if self.decided.is_none() {
            match self.bc_outcome {
                Some(false) => self.decided = Some(Value::Null),
                Some(true) => {
                    if let Some(v) = self.countable_majority_value() {
                        self.decided = Some(v);
                    }
                }
                None => {}
            }
        }
        self.decided.clone()
    }

    /// Vote derivation over the proposals collected so far: the value with
    /// `n - 2t` support, if any.
    fn derive_vote(&self) -> Value {
        let mut counts: BTreeMap<&Value, usize> = BTreeMap::new();
        for v in self.proposals.values() {
            if !v.is_null() {
                *counts.entry(v).or_default() += 1;
            }
        }
        counts
            .into_iter()
            .find(|(_, c)| *c >= self.support())
            .map(|(v, _)| v.clone())
            .unwrap_or(Value::Null)
    }

    fn revalidate_votes(&mut self) {
        let support = self.support();
        let n_minus_t = self.quorums.n_minus_t;
        let mut counts: BTreeMap<&Value, usize> = BTreeMap::new();
        let mut nulls = 0usize;
        for v in self.proposals.values() {
            if v.is_null() {
                nulls += 1;
            } else {
                *counts.entry(v).or_default() += 1;
            }
        }
        let mut newly_valid = Vec::new();
        for (id, vote) in &self.votes {
            if self.votes_valid.contains(id) {
                continue;
            }
            let ok = if vote.is_null() {
                // Some n-t proposals among which no value reaches support:
                // cap every value below the support threshold.
                let capped: usize =
                    counts.values().map(|c| (*c).min(support.saturating_sub(1))).sum();
                capped + nulls >= n_minus_t
            } else {
                counts.get(vote).copied().unwrap_or(0) >= support
            };
            if ok {
                newly_valid.push(*id);
            }
        }
        self.votes_valid.extend(newly_valid);
    }

    /// The unique value holding a strict majority of countable votes, if any.
    fn countable_majority_value(&self) -> Option<Value> {
        let mut counts: BTreeMap<&Value, usize> = BTreeMap::new();
        for id in &self.votes_valid {
            let v = &self.votes[id];
            if !v.is_null() {
                *counts.entry(v).or_default() += 1;
            }
        }
        counts
            .into_iter()
            .find(|(_, c)| *c >= self.majority())
            .map(|(v, _)| v.clone())
    }
}
