//! A deterministic virtual-time simulator for interactive-consistency
//! protocols: consistent broadcast, reliable broadcast, randomized binary
//! and multi-valued consensus, and the interactive-consistency compositions
//! built from them, driven by an adversary-controlled discrete-event network
//! with bounded clock drift and bounded honest-message delay.
//!
//! Runs are pure functions of `(configuration, adversary script, seed)`:
//! replaying one yields a byte-identical event trace. The accounting layer
//! counts every send and every proof operation so runs can be checked
//! against the closed-form complexity polynomials in [`oracle`].

pub mod broadcast;
pub mod config;
pub mod consensus;
pub mod crypto;
pub mod harness;
pub mod ic;
pub mod oracle;
pub mod report;
pub mod runner;
pub mod simnet;
pub mod types;
pub mod wire;

pub use config::{quorum_thresholds, ClockParams, ConfigError, SystemConfig};
pub use report::RunReport;
pub use runner::{default_values, run, Algorithm, RunSpec};
pub use types::{NodeId, ResultVector, Value};
