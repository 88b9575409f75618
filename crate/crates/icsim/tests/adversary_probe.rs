//! Early probes of adversarial scenarios across seeds; the full sweeps live
//! in the acceptance suite.

use icsim::config::{ClockParams, SystemConfig};
use icsim::oracle::{expected_messages, Primitive};
use icsim::runner::{run, Algorithm, RunSpec};
use icsim::simnet::adversary::{AdversarySpec, Behavior};
use icsim::simnet::DeliveryMode;
use icsim::types::NodeId;

fn spec(n: usize, t: usize, algorithm: Algorithm, seed: u64) -> RunSpec {
    let mut cfg = SystemConfig::new(n, t).unwrap();
    let clocks = ClockParams::new(1, 2, 10);
    cfg.end_barrier = match &algorithm {
        Algorithm::BcRbb => clocks.cb_dissemination_bound(n) + 1,
        _ => clocks.multicast_dissemination_bound() + 1,
    };
    cfg.round_timeout = 200;
    let mut s = RunSpec::new(cfg, clocks, algorithm);
    s.seed = seed;
    s
}

#[test]
fn oracle_counts_hold_at_larger_n() {
    for (n, t) in [(7, 2), (10, 3), (13, 4)] {
        let mut s = spec(n, t, Algorithm::McRbb, 3);
        s.clocks = ClockParams::new(1, 0, 10);
        s.cfg.end_barrier = s.clocks.multicast_dissemination_bound() + 1;
        s.delivery = DeliveryMode::WorstCase;
        let r = run(&s).unwrap().report;
        assert_eq!(r.total_messages, expected_messages(Primitive::IcMcRbb, n as u64), "n={n}");
        assert!(r.honest_agreement() && r.honest_validity(), "n={n}");

        let mut s = spec(n, t, Algorithm::BcRbb, 3);
        s.clocks = ClockParams::new(1, 0, 10);
        s.cfg.end_barrier = s.clocks.cb_dissemination_bound(n) + 1;
        s.delivery = DeliveryMode::WorstCase;
        let r = run(&s).unwrap().report;
        assert_eq!(r.total_messages, expected_messages(Primitive::IcBcRbb, n as u64), "n={n}");
        assert!(r.honest_agreement() && r.honest_validity(), "n={n}");
    }
}

#[test]
fn jittered_runs_agree_across_seeds() {
    for seed in 0..30 {
        for algorithm in [Algorithm::Pease, Algorithm::McRbb, Algorithm::BcRbb, Algorithm::Eic] {
            let s = spec(4, 1, algorithm.clone(), seed);
            let r = run(&s).unwrap().report;
            assert!(r.all_honest_decided(), "{algorithm:?} seed {seed} undecided");
            assert!(r.honest_agreement(), "{algorithm:?} seed {seed} split");
            assert!(r.honest_validity(), "{algorithm:?} seed {seed} validity");
        }
    }
}

#[test]
fn behaviors_never_break_agreement() {
    let behaviors = [
        Behavior::Silent,
        Behavior::CrashAt { time: 12 },
        Behavior::Equivocate,
        Behavior::WithholdFinal { recipients: vec![NodeId(1), NodeId(2)] },
        Behavior::DelayToBarrier { recipients: vec![NodeId(1), NodeId(3)] },
        Behavior::SpamPhases { count: 12 },
    ];
    for behavior in &behaviors {
        for seed in 0..20 {
            for algorithm in [Algorithm::Pease, Algorithm::McRbb, Algorithm::BcRbb, Algorithm::Eic]
            {
                let mut s = spec(4, 1, algorithm.clone(), seed);
                s.adversary = AdversarySpec::single(NodeId(4), behavior.clone());
                let r = run(&s).unwrap().report;
                assert!(
                    r.honest_agreement(),
                    "{algorithm:?} {behavior:?} seed {seed} split: {:?}",
                    r.outcomes
                );
                if matches!(algorithm, Algorithm::Pease | Algorithm::McRbb | Algorithm::BcRbb) {
                    assert!(
                        r.all_honest_decided(),
                        "{algorithm:?} {behavior:?} seed {seed} undecided (final={}, truncated={})",
                        r.final_global_time,
                        r.truncated,
                    );
                    assert!(
                        r.honest_validity(),
                        "{algorithm:?} {behavior:?} seed {seed} validity: {:?}",
                        r.outcomes
                    );
                }
            }
        }
    }
}
