//! Randomized binary consensus over reliable broadcast.
//!
//! Each phase has three reliable-broadcast rounds per node:
//!
//! 1. broadcast the current bit; collect `n - t` round-1 messages and adopt
//!    their majority;
//! 2. broadcast the adopted bit; collect `n - t` *valid* round-2 messages;
//!    if one bit holds a strict majority of the whole system (`> n/2`) the
//!    round-3 message proposes it for decision;
//! 3. broadcast the round-3 message; collect `n - t` valid ones; decide on
//!    `2t + 1` matching decision proposals, adopt the bit on `t + 1`, and
//!    toss the local coin otherwise.
//!
//! Incoming round-2 and round-3 messages only count once they are
//! *plausible*: a round-2 bit must be a possible majority of some `n - t`
//! round-1 subset the receiver can account for, a decision proposal must be
//! backed by a possible `> n/2` round-2 quorum of valid messages, and a
//! non-proposing round-3 message must fit some quorum in which no bit
//! cleared `n/2`. Plausibility only grows as messages arrive, and every
//! honest message eventually becomes plausible at every honest node because
//! reliable broadcast delivers the justifying messages everywhere. These
//! checks are what keeps a decision stable: in a phase where every honest
//! node holds bit `b`, no round-2 message for the other bit and no
//! non-proposing round-3 message can ever validate, so every honest node
//! re-decides `b` in that phase.
//!
//! A node that decides stops initiating phases. If traffic for the phase
//! right after its decision still shows up (someone missed the `2t + 1`
//! decision proposals), it rejoins that single phase with its decided bit,
//! which carries everyone else to the same decision without adding any
//! traffic to runs that decide cleanly.
//!
//! Messages more than `buffer_window` phases ahead of the receiver are
//! dropped and logged rather than buffered; entering a phase discards all
//! buffered state of earlier phases.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::broadcast::{rbb_broadcast, rbb_emit_to_message, rbb_step_of, RbbInstance};
use crate::config::QuorumThresholds;
use crate::simnet::Ctx;
use crate::types::NodeId;
use crate::wire::{Body, Root, Tag, WireMessage};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("instance already has a proposal")]
pub struct AlreadyProposed;

#[derive(Debug, Default)]
struct PhaseRecv {
    round1: BTreeMap<NodeId, bool>,
    round2: BTreeMap<NodeId, bool>,
    round2_valid: BTreeSet<NodeId>,
    round3: BTreeMap<NodeId, (bool, bool)>,
    round3_valid: BTreeSet<NodeId>,
}

impl PhaseRecv {
    fn round1_counts(&self) -> (usize, usize) {
        let trues = self.round1.values().filter(|v| **v).count();
        (trues, self.round1.len() - trues)
    }

    fn round2_valid_counts(&self) -> (usize, usize) {
        let trues = self
            .round2_valid
            .iter()
            .filter(|id| self.round2.get(id) == Some(&true))
            .count();
        (trues, self.round2_valid.len() - trues)
    }

    fn round3_proposals(&self, bit: bool) -> usize {
        self.round3_valid
            .iter()
            .filter(|id| self.round3.get(id) == Some(&(bit, true)))
            .count()
    }
}

enum Transition {
    Wait,
    Advance { bit: bool, proposal: bool },
    PhaseDone { bit: bool, decided: bool },
}

/// One binary-consensus instance at one node.
pub struct BcInstance {
    me: NodeId,
    slot: NodeId,
    run: u8,
    root: Root,
    n: usize,
    quorums: QuorumThresholds,
    h_window: u16,
    max_phases: Option<u16>,

    phase: u16,
    round: u8,
    bit: bool,
    propose3: bool,
    proposed: bool,
    decided: Option<bool>,
    halted: bool,
    stuck: bool,

    rbb: BTreeMap<(u16, u8, NodeId), RbbInstance>,
    recv: BTreeMap<u16, PhaseRecv>,
    sent: BTreeSet<(u16, u8)>,
}

impl BcInstance {
    pub fn new(
        me: NodeId,
        slot: NodeId,
        run: u8,
        root: Root,
        n: usize,
        quorums: QuorumThresholds,
        h_window: u16,
    ) -> BcInstance {
        BcInstance {
            me,
            slot,
            run,
            root,
            n,
            quorums,
            h_window,
            max_phases: None,
            phase: 1,
            round: 1,
            bit: false,
            propose3: false,
            proposed: false,
            decided: None,
            halted: false,
            stuck: false,
            rbb: BTreeMap::new(),
            recv: BTreeMap::new(),
            sent: BTreeSet::new(),
        }
    }

    /// Caps how many phases the instance will run; used by hostile-coin
    /// experiments that only assert safety.
    pub fn limit_phases(&mut self, cap: u16) {
        self.max_phases = Some(cap);
    }

    pub fn decided(&self) -> Option<bool> {
        self.decided
    }

    pub fn current_phase(&self) -> u16 {
        self.phase
    }

    pub fn is_stuck(&self) -> bool {
        self.stuck
    }

    pub fn propose(
        &mut self,
        ctx: &mut Ctx<'_>,
        bit: bool,
    ) -> Result<Option<bool>, AlreadyProposed> {
        if self.proposed {
            return Err(AlreadyProposed);
        }
        self.proposed = true;
        self.bit = bit;
        ctx.note_bc_phase(1);
        self.broadcast_round(ctx, 1);
        Ok(self.try_progress(ctx))
    }

    fn tag(&self, phase: u16, round: u8, origin: NodeId) -> Tag {
        Tag::new(self.run, self.root).slot(self.slot).origin(origin).phase_step(phase, round)
    }

    fn broadcast_round(&mut self, ctx: &mut Ctx<'_>, round: u8) {
        if !self.sent.insert((self.phase, round)) {
            return;
        }
        let proposal = round == 3 && self.propose3;
        let payload = vec![self.bit as u8, proposal as u8];
        let tag = self.tag(self.phase, round, self.me);
        rbb_broadcast(ctx, self.me, tag, payload);
    }

    /// Feeds one wire message; returns a fresh decision if one happened.
    pub fn on_message(
        &mut self,
        ctx: &mut Ctx<'_>,
        src: NodeId,
        msg: &WireMessage,
    ) -> Option<bool> {
        let Some(step) = rbb_step_of(msg.body.kind()) else {
            return None;
        };
        let phase = msg.tag.phase;
        let round = msg.tag.step;
        if !(1..=3).contains(&round) || phase == 0 {
            return None;
        }
        if phase < self.phase {
            return None;
        }
        if phase > self.phase + self.h_window {
            ctx.note_spam_drop();
            return None;
        }
        let payload = match &msg.body {
            Body::RbbInit { payload } | Body::RbbEcho { payload } | Body::RbbReady { payload } => {
                payload.clone()
            }
            _ => return None,
        };
        let origin = NodeId(msg.tag.origin);
        if origin.0 == 0 || origin.index() > self.n {
            return None;
        }

        let inst = self.rbb.entry((phase, round, origin)).or_default();
        let (emits, delivered) = inst.on_message(&self.quorums, origin, src, step, &payload);
        let tag = self.tag(phase, round, origin);
        for emit in emits {
            ctx.multicast(rbb_emit_to_message(self.me, tag, emit));
        }
        self.note_span(ctx);

        let mut newly_decided = None;
        if let Some(body) = delivered {
            if body.len() == 2 && body[0] <= 1 && body[1] <= 1 {
                self.record(phase, round, origin, body[0] == 1, body[1] == 1);
                if self.halted && phase == self.phase {
                    // Someone is still working on the phase after our
                    // decision; rejoin it with the decided bit.
                    self.halted = false;
                    self.round = 1;
                    self.bit = self.decided.unwrap_or(self.bit);
                    self.propose3 = false;
                    self.broadcast_round(ctx, 1);
                }
                newly_decided = self.try_progress(ctx);
            }
        }
        newly_decided
    }

    fn record(&mut self, phase: u16, round: u8, origin: NodeId, bit: bool, proposal: bool) {
        let recv = self.recv.entry(phase).or_default();
        match round {
            1 => {
                recv.round1.entry(origin).or_insert(bit);
            }
            2 => {
                recv.round2.entry(origin).or_insert(bit);
            }
            3 => {
                recv.round3.entry(origin).or_insert((bit, proposal));
            }
            _ => {}
        }
        self.revalidate(phase);
    }

    /// Plausibility checks; every count only grows, so validity is monotone.
    fn revalidate(&mut self, phase: u16) {
        let n = self.n;
        let n_minus_t = self.quorums.n_minus_t;
        let Some(recv) = self.recv.get_mut(&phase) else {
            return;
        };

        let (r1_true, r1_false) = recv.round1_counts();
        let r1_total = r1_true + r1_false;
        let need_half = n_minus_t.div_ceil(2);
        let pending: Vec<(NodeId, bool)> = recv
            .round2
            .iter()
            .filter(|(id, _)| !recv.round2_valid.contains(*id))
            .map(|(id, b)| (*id, *b))
            .collect();
        for (id, w) in pending {
            let support = if w { r1_true } else { r1_false };
            if r1_total >= n_minus_t && support >= need_half {
                recv.round2_valid.insert(id);
            }
        }

        let (c2_true, c2_false) = recv.round2_valid_counts();
        let c2_total = c2_true + c2_false;
        let majority = n / 2 + 1;
        let half = n / 2;
        let pending: Vec<(NodeId, (bool, bool))> = recv
            .round3
            .iter()
            .filter(|(id, _)| !recv.round3_valid.contains(*id))
            .map(|(id, m)| (*id, *m))
            .collect();
        for (id, (w, proposal)) in pending {
            let ok = if proposal {
                let support = if w { c2_true } else { c2_false };
                c2_total >= n_minus_t && support >= majority
            } else {
                // Some n-t subset of valid round-2 messages where neither bit
                // clears n/2: pick `a` falses and `n-t-a` trues.
                let lo = n_minus_t.saturating_sub(c2_true).max(n_minus_t.saturating_sub(half));
                let hi = c2_false.min(half);
                c2_total >= n_minus_t && lo <= hi
            };
            if ok {
                recv.round3_valid.insert(id);
            }
        }
    }

    fn try_progress(&mut self, ctx: &mut Ctx<'_>) -> Option<bool> {
        let mut newly_decided = None;
        while self.proposed && !self.stuck && !self.halted {
            let transition = self.evaluate();
            match transition {
                Transition::Wait => break,
                Transition::Advance { bit, proposal } => {
                    self.bit = bit;
                    self.propose3 = proposal;
                    self.round += 1;
                    let round = self.round;
                    self.broadcast_round(ctx, round);
                }
                Transition::PhaseDone { bit, decided } => {
                    self.bit = if decided {
                        bit
                    } else {
                        let q = self.quorums;
                        let recv = &self.recv[&self.phase];
                        if recv.round3_proposals(true) >= q.ready_threshold {
                            true
                        } else if recv.round3_proposals(false) >= q.ready_threshold {
                            false
                        } else {
                            ctx.coin(self.slot, self.phase)
                        }
                    };
                    if decided && self.decided.is_none() {
                        self.decided = Some(bit);
                        newly_decided = Some(bit);
                    }
                    self.enter_next_phase(ctx);
                }
            }
        }
        newly_decided
    }

    fn evaluate(&self) -> Transition {
        let q = &self.quorums;
        let Some(recv) = self.recv.get(&self.phase) else {
            return Transition::Wait;
        };
        match self.round {
            1 => {
                if recv.round1.len() < q.n_minus_t {
                    return Transition::Wait;
                }
                let (trues, falses) = recv.round1_counts();
                let bit = match trues.cmp(&falses) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Less => false,
                    std::cmp::Ordering::Equal => self.bit,
                };
                Transition::Advance { bit, proposal: false }
            }
            2 => {
                if recv.round2_valid.len() < q.n_minus_t {
                    return Transition::Wait;
                }
                let (trues, falses) = recv.round2_valid_counts();
                let majority = self.n / 2 + 1;
                if trues >= majority {
                    Transition::Advance { bit: true, proposal: true }
                } else if falses >= majority {
                    Transition::Advance { bit: false, proposal: true }
                } else {
                    let bit = match trues.cmp(&falses) {
                        std::cmp::Ordering::Greater => true,
                        std::cmp::Ordering::Less => false,
                        std::cmp::Ordering::Equal => self.bit,
                    };
                    Transition::Advance { bit, proposal: false }
                }
            }
            3 => {
                if recv.round3_valid.len() < q.n_minus_t {
                    return Transition::Wait;
                }
                let (p_true, p_false) =
                    (recv.round3_proposals(true), recv.round3_proposals(false));
                if p_true >= q.decide_threshold {
                    Transition::PhaseDone { bit: true, decided: true }
                } else if p_false >= q.decide_threshold {
                    Transition::PhaseDone { bit: false, decided: true }
                } else {
                    Transition::PhaseDone { bit: self.bit, decided: false }
                }
            }
            _ => Transition::Wait,
        }
    }

    fn enter_next_phase(&mut self, ctx: &mut Ctx<'_>) {
        self.phase += 1;
        self.round = 1;
        self.propose3 = false;
        let phase = self.phase;
        self.rbb.retain(|(p, _, _), _| *p >= phase);
        self.recv.retain(|p, _| *p >= phase);
        self.sent.retain(|(p, _)| *p >= phase);
        if self.decided.is_some() {
            self.halted = true;
            return;
        }
        if let Some(cap) = self.max_phases {
            if self.phase > cap {
                self.stuck = true;
                return;
            }
        }
        ctx.note_bc_phase(self.phase);
        self.broadcast_round(ctx, 1);
    }

    fn note_span(&mut self, ctx: &mut Ctx<'_>) {
        let hi = self
            .rbb
            .keys()
            .map(|(p, _, _)| *p)
            .chain(self.recv.keys().copied())
            .max()
            .unwrap_or(self.phase);
        let span = hi.saturating_sub(self.phase) + 1;
        ctx.note_phase_span(span as u16);
    }
}
