//! Examples and invariants for the interactive-consistency compositions.

use std::collections::BTreeSet;

use icsim::config::{ClockParams, SystemConfig};
use icsim::runner::{default_values, run, Algorithm, RunSpec};
use icsim::simnet::adversary::{AdversarySpec, Behavior};
use icsim::types::{NodeId, Value};

fn spec(n: usize, t: usize, algorithm: Algorithm, seed: u64) -> RunSpec {
    let mut cfg = SystemConfig::new(n, t).unwrap();
    let clocks = ClockParams::new(1, 2, 10);
    cfg.end_barrier = match &algorithm {
        Algorithm::BcRbb => clocks.cb_dissemination_bound(n) + 1,
        _ => clocks.multicast_dissemination_bound() + 1,
    };
    cfg.round_timeout = 3000;
    let mut s = RunSpec::new(cfg, clocks, algorithm);
    s.seed = seed;
    s
}

#[test]
fn pease_single_crash_latency_is_timeout_bound_and_worst() {
    let t_r = 3000;
    let mut crash = spec(4, 1, Algorithm::Pease, 5);
    crash.cfg.round_timeout = t_r;
    crash.adversary = AdversarySpec::single(NodeId(4), Behavior::Silent);
    let pease = run(&crash).unwrap().report;
    assert!(pease.all_honest_decided());
    assert!(pease.honest_agreement() && pease.honest_validity());
    let pease_latency = pease.worst_honest_latency().unwrap();
    // One silent node forces every round to wait out its timeout.
    assert!(pease_latency >= (1 + 1) * t_r, "latency {pease_latency}");

    let mut crash = spec(4, 1, Algorithm::BcRbb, 5);
    crash.adversary = AdversarySpec::single(NodeId(4), Behavior::Silent);
    let bc_rbb = run(&crash).unwrap().report;
    let bc_latency = bc_rbb.worst_honest_latency().unwrap();
    assert!(
        bc_latency < pease_latency,
        "timeout chains dominate: {bc_latency} vs {pease_latency}"
    );
}

#[test]
fn pease_delayed_relay_is_treated_as_absent_but_resolved() {
    for seed in 0..20 {
        let mut s = spec(4, 1, Algorithm::Pease, seed);
        s.cfg.round_timeout = 60;
        s.adversary = AdversarySpec::single(
            NodeId(4),
            Behavior::DelayToBarrier { recipients: vec![NodeId(2)] },
        );
        let r = run(&s).unwrap().report;
        assert!(r.late_drops > 0, "seed {seed}: the delayed relay lands after the deadline");
        assert!(r.all_honest_decided() && r.honest_agreement() && r.honest_validity());
    }
}

#[test]
fn bc_rbb_recovery_fills_deprived_nodes() {
    let mut covered_recovery = false;
    for seed in 0..40 {
        let mut s = spec(4, 1, Algorithm::BcRbb, seed);
        s.adversary = AdversarySpec::single(
            NodeId(4),
            Behavior::WithholdFinal { recipients: vec![NodeId(1), NodeId(2)] },
        );
        let r = run(&s).unwrap().report;
        assert!(r.all_honest_decided(), "seed {seed}");
        assert!(r.honest_agreement() && r.honest_validity(), "seed {seed}");
        // Consensus outcome for slot 4 is surfaced as an up-call.
        let bit = r.upcalls[0][0]
            .iter()
            .find(|(slot, _)| *slot == NodeId(4))
            .map(|(_, v)| v.clone())
            .unwrap();
        if bit == Value::bytes([1u8]) {
            covered_recovery = true;
            let vector = r.outcomes[0][0].as_ref().unwrap();
            assert!(!vector.get(NodeId(4)).is_null(), "seed {seed}: recovered value present");
            assert!(r.messages("retrieve") > 0, "seed {seed}: recovery traffic flowed");
        }
    }
    assert!(covered_recovery, "at least one seed must accept the withheld slot");
}

#[test]
fn bc_rbb_zero_outcome_overwrites_held_values() {
    let mut covered = false;
    for seed in 0..60 {
        let mut s = spec(4, 1, Algorithm::BcRbb, seed);
        // Only node 1 gets the certificate: 1 votes yes, the rest vote no.
        s.adversary = AdversarySpec::single(
            NodeId(4),
            Behavior::WithholdFinal { recipients: vec![NodeId(1)] },
        );
        let r = run(&s).unwrap().report;
        assert!(r.honest_agreement(), "seed {seed}");
        let bit = r.upcalls[0][0]
            .iter()
            .find(|(slot, _)| *slot == NodeId(4))
            .map(|(_, v)| v.clone())
            .unwrap();
        if bit == Value::bytes([0u8]) {
            covered = true;
            for id in r.honest_nodes() {
                let vector = r.outcomes[id.pos()][0].as_ref().unwrap();
                assert!(vector.get(NodeId(4)).is_null(), "seed {seed}: refused slot is null");
            }
        }
    }
    assert!(covered, "some seed must refuse the slot node 1 held");
}

#[test]
fn bc_rbb_rejects_junk_recovery_replies() {
    let mut saw_rejection = false;
    for seed in 0..60 {
        let mut s = spec(4, 1, Algorithm::BcRbb, seed);
        // The withholder keeps its own certificate, so its recovery replies
        // (which it truncates into junk) race the honest holders'.
        s.adversary = AdversarySpec::single(
            NodeId(4),
            Behavior::WithholdFinal { recipients: vec![NodeId(1), NodeId(2), NodeId(4)] },
        );
        let r = run(&s).unwrap().report;
        saw_rejection |= r.rejected_replies > 0;
        assert!(r.all_honest_decided() && r.honest_agreement(), "seed {seed}");
    }
    assert!(saw_rejection, "the withholder's truncated replies must get rejected somewhere");
}

#[test]
fn equivocator_slot_settles_on_one_value_everywhere() {
    for algorithm in [Algorithm::McRbb, Algorithm::BcRbb, Algorithm::Pease] {
        for seed in 0..25 {
            let mut s = spec(4, 1, algorithm.clone(), seed);
            s.adversary = AdversarySpec::single(NodeId(4), Behavior::Equivocate);
            let r = run(&s).unwrap().report;
            assert!(r.all_honest_decided(), "{algorithm:?} seed {seed}");
            assert!(r.honest_agreement(), "{algorithm:?} seed {seed}");
            assert!(r.honest_validity(), "{algorithm:?} seed {seed}");
            let slot_values: BTreeSet<Value> = r
                .honest_nodes()
                .map(|id| r.outcomes[id.pos()][0].as_ref().unwrap().get(NodeId(4)).clone())
                .collect();
            assert_eq!(slot_values.len(), 1, "{algorithm:?} seed {seed}: {slot_values:?}");
        }
    }
}

#[test]
fn crashed_node_slot_is_null_in_mc_rbb() {
    for seed in 0..20 {
        let mut s = spec(4, 1, Algorithm::McRbb, seed);
        s.adversary = AdversarySpec::single(NodeId(3), Behavior::Silent);
        let r = run(&s).unwrap().report;
        assert!(r.all_honest_decided() && r.honest_agreement() && r.honest_validity());
        for id in r.honest_nodes() {
            assert!(r.outcomes[id.pos()][0].as_ref().unwrap().get(NodeId(3)).is_null());
        }
    }
}

#[test]
fn eic_crashed_node_leaves_its_slot_empty() {
    let mut s = spec(4, 1, Algorithm::Eic, 9);
    s.adversary = AdversarySpec::single(NodeId(2), Behavior::Silent);
    let r = run(&s).unwrap().report;
    for id in r.honest_nodes() {
        assert_eq!(r.upcalls[id.pos()][0].len(), 3, "three up-calls for three live nodes");
        let vector = r.outcomes[id.pos()][0].as_ref().unwrap();
        assert!(vector.get(NodeId(2)).is_null());
    }
}

#[test]
fn eic_slot_filling_is_monotone() {
    // Replaying the up-call stream must only ever add slots, and the final
    // vector must contain exactly the up-called values.
    let s = spec(4, 1, Algorithm::Eic, 3);
    let r = run(&s).unwrap().report;
    for id in r.honest_nodes() {
        let mut seen = BTreeSet::new();
        for (slot, value) in &r.upcalls[id.pos()][0] {
            assert!(seen.insert(*slot), "slot filled twice");
            assert!(!value.is_null());
        }
        let vector = r.outcomes[id.pos()][0].as_ref().unwrap();
        for (slot, value) in &r.upcalls[id.pos()][0] {
            assert_eq!(vector.get(*slot), value, "earlier entries still present");
        }
    }
}

#[test]
fn parallel_instances_match_sequential_outcomes() {
    for algorithm in [Algorithm::McRbb, Algorithm::BcRbb] {
        let mut parallel = spec(4, 1, algorithm.clone(), 17);
        parallel.parallel_instances = 3;
        let p = run(&parallel).unwrap().report;
        assert!(p.all_honest_decided());

        let sequential = run(&spec(4, 1, algorithm.clone(), 17)).unwrap().report;
        for id in p.honest_nodes() {
            for instance in 0..3 {
                assert_eq!(
                    p.outcomes[id.pos()][instance],
                    sequential.outcomes[id.pos()][0],
                    "{algorithm:?} instance {instance} diverged from a lone run"
                );
            }
        }
    }
}

#[test]
fn values_can_be_supplied_explicitly() {
    let mut s = spec(4, 1, Algorithm::McRbb, 1);
    s.values = Some(vec![
        Value::bytes("alpha"),
        Value::bytes("beta"),
        Value::bytes("gamma"),
        Value::bytes("delta"),
    ]);
    let r = run(&s).unwrap().report;
    assert!(r.honest_validity());
    let vector = r.outcomes[0][0].as_ref().unwrap();
    assert_eq!(vector.get(NodeId(3)), &Value::bytes("gamma"));
    assert_ne!(s.values.as_ref().unwrap()[0], default_values(4, 1)[1]);
}
