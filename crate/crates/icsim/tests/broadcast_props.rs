//! Broadcast-layer behavior under faulty senders.

use std::collections::BTreeSet;

use icsim::config::{ClockParams, SystemConfig};
use icsim::runner::{run, Algorithm, RunSpec};
use icsim::simnet::adversary::{AdversarySpec, Behavior};
use icsim::types::{NodeId, Value};

fn spec(algorithm: Algorithm, seed: u64) -> RunSpec {
    let mut cfg = SystemConfig::new(4, 1).unwrap();
    let clocks = ClockParams::new(1, 2, 10);
    cfg.end_barrier = clocks.cb_dissemination_bound(4) + 1;
    let mut s = RunSpec::new(cfg, clocks, algorithm);
    s.seed = seed;
    s
}

/// Values delivered for the broadcast sender's slot, per honest node:
/// `None` when the node delivered nothing.
fn slot_one_outcomes(report: &icsim::RunReport) -> Vec<Option<Value>> {
    report
        .honest_nodes()
        .map(|id| {
            report.outcomes[id.pos()][0]
                .as_ref()
                .map(|v| v.get(NodeId(1)).clone())
        })
        .collect()
}

#[test]
fn equivocating_multicast_reaches_conflicting_values() {
    let mut s = spec(Algorithm::MuOnly, 7);
    s.adversary = AdversarySpec::single(NodeId(1), Behavior::Equivocate);
    let r = run(&s).unwrap().report;
    let values: BTreeSet<Option<Value>> = slot_one_outcomes(&r).into_iter().collect();
    assert!(values.len() > 1, "plain multicast offers no agreement: {values:?}");
}

#[test]
fn crashed_multicaster_reaches_no_one() {
    let mut s = spec(Algorithm::MuOnly, 7);
    s.adversary = AdversarySpec::single(NodeId(1), Behavior::Silent);
    let r = run(&s).unwrap().report;
    assert_eq!(r.total_messages, 0, "silent sender enqueues nothing");
    assert!(slot_one_outcomes(&r).iter().all(|v| v.is_none()));
}

#[test]
fn rbb_all_or_nothing_across_sender_crash_points() {
    for crash_at in 0..36 {
        for seed in 0..6 {
            let mut s = spec(Algorithm::RbbOnly, seed);
            s.adversary =
                AdversarySpec::single(NodeId(1), Behavior::CrashAt { time: crash_at });
            let r = run(&s).unwrap().report;
            let outcomes = slot_one_outcomes(&r);
            let delivered: BTreeSet<&Value> = outcomes.iter().flatten().collect();
            assert!(delivered.len() <= 1, "two values delivered at crash {crash_at}");
            let some = outcomes.iter().filter(|v| v.is_some()).count();
            assert!(
                some == 0 || some == outcomes.len(),
                "partial delivery at crash {crash_at} seed {seed}: {outcomes:?}"
            );
        }
    }
}

#[test]
fn rbb_equivocating_sender_delivers_at_most_one_value() {
    for seed in 0..40 {
        let mut s = spec(Algorithm::RbbOnly, seed);
        s.adversary = AdversarySpec::single(NodeId(1), Behavior::Equivocate);
        let r = run(&s).unwrap().report;
        let outcomes = slot_one_outcomes(&r);
        let delivered: BTreeSet<&Value> = outcomes.iter().flatten().collect();
        assert!(delivered.len() <= 1, "seed {seed}: {outcomes:?}");
        let some = outcomes.iter().filter(|v| v.is_some()).count();
        assert!(some == 0 || some == outcomes.len(), "seed {seed}: {outcomes:?}");
    }
}

#[test]
fn cb_withheld_final_deprives_the_rest() {
    let mut s = spec(Algorithm::CbOnly, 3);
    s.adversary = AdversarySpec::single(
        NodeId(1),
        Behavior::WithholdFinal { recipients: vec![NodeId(1), NodeId(2)] },
    );
    let r = run(&s).unwrap().report;
    // Honest nodes are 2, 3, 4; only node 2 was sent the certificate.
    let outcomes = slot_one_outcomes(&r);
    assert!(outcomes[0].is_some());
    assert!(outcomes[1].is_none() && outcomes[2].is_none());
    let delivered: BTreeSet<&Value> = outcomes.iter().flatten().collect();
    assert_eq!(delivered.len(), 1, "no conflicting deliveries possible");
}

#[test]
fn cb_equivocating_sender_certifies_at_most_one_value() {
    for seed in 0..40 {
        let mut s = spec(Algorithm::CbOnly, seed);
        s.adversary = AdversarySpec::single(NodeId(1), Behavior::Equivocate);
        let r = run(&s).unwrap().report;
        let delivered: BTreeSet<Option<Value>> =
            slot_one_outcomes(&r).into_iter().filter(|v| v.is_some()).collect();
        assert!(delivered.len() <= 1, "seed {seed}: {delivered:?}");
    }
}
