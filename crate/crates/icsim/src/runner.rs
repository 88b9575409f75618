//! Builds and executes one seeded simulation from a run specification.

use serde::{Deserialize, Serialize};

use crate::config::{ClockParams, ConfigError, SystemConfig};
use crate::crypto::ProofMode;
use crate::harness::{BcOnlyNode, CbOnlyNode, McOnlyNode, MuOnlyNode, RbbOnlyNode};
use crate::ic::{BcRbbNode, EicNode, McRbbNode, PeaseNode};
use crate::report::RunReport;
use crate::simnet::adversary::AdversarySpec;
use crate::simnet::{CoinMode, DeliveryMode, Protocol, SimParams, Simulation, StepMark};
use crate::types::{NodeId, Value};
use crate::wire::Root;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Pease,
    McRbb,
    BcRbb,
    Eic,
    MuOnly,
    RbbOnly,
    CbOnly,
    BcOnly { inputs: Vec<bool> },
    McOnly { inputs: Vec<String> },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Pease => "pease",
            Algorithm::McRbb => "mc-rbb",
            Algorithm::BcRbb => "bc-rbb",
            Algorithm::Eic => "eic",
            Algorithm::MuOnly => "mu",
            Algorithm::RbbOnly => "rbb",
            Algorithm::CbOnly => "cb",
            Algorithm::BcOnly { .. } => "bc",
            Algorithm::McOnly { .. } => "mc",
        }
    }

    pub fn has_barrier(&self) -> bool {
        matches!(self, Algorithm::McRbb | Algorithm::BcRbb)
    }

    fn is_composition(&self) -> bool {
        matches!(
            self,
            Algorithm::Pease | Algorithm::McRbb | Algorithm::BcRbb | Algorithm::Eic
        )
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub cfg: SystemConfig,
    pub clocks: ClockParams,
    pub algorithm: Algorithm,
    pub adversary: AdversarySpec,
    pub seed: u64,
    pub parallel_instances: usize,
    pub delivery: DeliveryMode,
    pub coin_mode: CoinMode,
    pub proof_mode: ProofMode,
    /// Per-node private values; generated from the seed when absent.
    pub values: Option<Vec<Value>>,
    pub time_budget: u64,
    /// Phase cap for the standalone binary-consensus harness.
    pub max_phases: Option<u16>,
    /// Deliver every corrupted-source send twice.
    pub duplicate_corrupt_sends: bool,
    pub collect_trace: bool,
}

impl RunSpec {
    pub fn new(cfg: SystemConfig, clocks: ClockParams, algorithm: Algorithm) -> RunSpec {
        RunSpec {
            cfg,
            clocks,
            algorithm,
            adversary: AdversarySpec::honest(),
            seed: 1,
            parallel_instances: 1,
            delivery: DeliveryMode::Jittered,
            coin_mode: CoinMode::Seeded,
            proof_mode: ProofMode::Signature,
            values: None,
            time_budget: 1_000_000,
            max_phases: None,
            duplicate_corrupt_sends: false,
            collect_trace: false,
        }
    }
}

pub fn default_values(n: usize, seed: u64) -> Vec<Value> {
    NodeId::all(n).map(|id| Value::bytes(format!("v{}s{}", id.0, seed))).collect()
}

/// Executes one seeded run and assembles its report.
pub fn run(spec: &RunSpec) -> Result<RunOutput, ConfigError> {
    spec.cfg.validate()?;
    spec.adversary.validate(&spec.cfg)?;
    let n = spec.cfg.n;
    let values = match &spec.values {
        Some(v) => {
            assert_eq!(v.len(), n, "one value per node");
            v.clone()
        }
        None => default_values(n, spec.seed),
    };
    let runs = if spec.algorithm.is_composition() { spec.parallel_instances.max(1) } else { 1 };
    let quorums = spec.cfg.quorums();
    let h = spec.cfg.buffer_window;

    let nodes: Vec<Box<dyn Protocol>> = NodeId::all(n)
        .map(|me| -> Box<dyn Protocol> {
            // Parallel instances share the node's value; isolation comes from
            // the instance index on every message.
            let per_run = vec![values[me.pos()].clone(); runs];
            match &spec.algorithm {
                Algorithm::Pease => Box::new(PeaseNode::new(me, per_run)),
                Algorithm::McRbb => Box::new(McRbbNode::new(me, n, per_run)),
                Algorithm::BcRbb => Box::new(BcRbbNode::new(me, n, per_run)),
                Algorithm::Eic => Box::new(EicNode::new(me, n, per_run)),
                Algorithm::MuOnly => Box::new(MuOnlyNode::new(me, values[me.pos()].clone())),
                Algorithm::RbbOnly => Box::new(RbbOnlyNode::new(me, values[me.pos()].clone())),
                Algorithm::CbOnly => Box::new(CbOnlyNode::new(me, n, values[me.pos()].clone())),
                Algorithm::BcOnly { inputs } => {
                    let node = BcOnlyNode::new(me, n, quorums, h, inputs[me.pos()]);
                    Box::new(match spec.max_phases {
                        Some(cap) => node.with_phase_cap(cap),
                        None => node,
                    })
                }
                Algorithm::McOnly { inputs } => Box::new(McOnlyNode::new(
                    me,
                    n,
                    spec.cfg.t,
                    quorums,
                    h,
                    Value::bytes(inputs[me.pos()].clone()),
                )),
            }
        })
        .collect();

    let params = SimParams {
        cfg: spec.cfg,
        clocks: spec.clocks,
        adversary: spec.adversary.clone(),
        seed: spec.seed,
        delivery: spec.delivery,
        coin_mode: spec.coin_mode,
        proof_mode: spec.proof_mode,
        has_barrier: spec.algorithm.has_barrier(),
        runs,
        time_budget: spec.time_budget,
        collect_trace: spec.collect_trace,
        duplicate_corrupt_sends: spec.duplicate_corrupt_sends,
    };
    let mut sim = Simulation::new(params, nodes);
    sim.run_to_completion();
    let results = sim.into_results();

    let mut messages_by_primitive = std::collections::BTreeMap::new();
    for root in Root::ALL {
        let count = results.messages_for(root);
        if count > 0 {
            messages_by_primitive.insert(root.name().to_string(), count);
        }
    }
    let report = RunReport {
        algorithm: spec.algorithm.name().to_string(),
        n,
        t: spec.cfg.t,
        seed: spec.seed,
        corrupted: spec.adversary.corrupted().collect(),
        inputs: values,
        total_messages: results.total_messages(),
        messages_by_primitive,
        signature_ops: results.signature_ops,
        decision_time: results.outputs.iter().map(|o| o.decided_at_local.clone()).collect(),
        outcomes: results.outputs.iter().map(|o| o.outcomes.clone()).collect(),
        upcalls: results.outputs.iter().map(|o| o.upcalls.clone()).collect(),
        late_drops: results.outputs.iter().map(|o| o.late_drops).sum(),
        spam_drops: results.outputs.iter().map(|o| o.spam_drops).sum(),
        rejected_replies: results.outputs.iter().map(|o| o.rejected_replies).sum(),
        garbage_drops: results.garbage_drops,
        max_phase_span: results.outputs.iter().map(|o| o.max_phase_span).max().unwrap_or(0),
        max_bc_phase: results.outputs.iter().map(|o| o.max_bc_phase).max().unwrap_or(0),
        assumption_breach: results.outputs.iter().any(|o| o.breach),
        final_global_time: results.final_global,
        truncated: results.truncated,
        trace_hash: results.trace_hash,
    };
    Ok(RunOutput { report, step_marks: results.step_marks, trace: results.trace_lines })
}

/// A run's report plus instrumentation that does not belong in it.
pub struct RunOutput {
    pub report: RunReport,
    pub step_marks: Vec<StepMark>,
    pub trace: Option<Vec<String>>,
}
