//! System configuration and quorum arithmetic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("node count n={0} is below the minimum of 4")]
    TooFewNodes(usize),
    #[error("fault bound t={t} exceeds floor((n-1)/3)={max} for n={n}")]
    FaultBoundExceeded { n: usize, t: usize, max: usize },
    #[error("fault bound t must be at least 1")]
    FaultBoundZero,
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

/// Static run parameters shared by every node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Node count.
    pub n: usize,
    /// Fault bound; at most `floor((n-1)/3)`.
    pub t: usize,
    /// Local-clock reading at which nodes switch from value dissemination to
    /// result consensus.
    pub end_barrier: u64,
    /// Per-round timeout for the timeout-driven vector algorithm.
    pub round_timeout: u64,
    /// How many consensus phases ahead of the current one a node will buffer.
    pub buffer_window: u16,
}

pub const DEFAULT_BUFFER_WINDOW: u16 = 8;

impl SystemConfig {
    pub fn new(n: usize, t: usize) -> Result<SystemConfig, ConfigError> {
        let cfg = SystemConfig {
            n,
            t,
            end_barrier: 1,
            round_timeout: 1,
            buffer_window: DEFAULT_BUFFER_WINDOW,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 4 {
            return Err(ConfigError::TooFewNodes(self.n));
        }
        if self.t == 0 {
            return Err(ConfigError::FaultBoundZero);
        }
        let max = (self.n - 1) / 3;
        if self.t > max {
            return Err(ConfigError::FaultBoundExceeded { n: self.n, t: self.t, max });
        }
        if self.end_barrier == 0 {
            return Err(ConfigError::NonPositive("end_barrier"));
        }
        if self.round_timeout == 0 {
            return Err(ConfigError::NonPositive("round_timeout"));
        }
        if self.buffer_window == 0 {
            return Err(ConfigError::NonPositive("buffer_window"));
        }
        Ok(())
    }

    pub fn quorums(&self) -> QuorumThresholds {
        quorum_thresholds(self.n, self.t).expect("validated config")
    }
}

/// Quorum sizes used across the broadcast and consensus layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuorumThresholds {
    /// Certificate size for consistent broadcast: `n - t` endorsements.
    pub n_minus_t: usize,
    /// Echoes required before sending a ready: `floor((n+t)/2) + 1`.
    pub echo_threshold: usize,
    /// Readies required before sending a ready: `t + 1`.
    pub ready_threshold: usize,
    /// Readies required to deliver: `2t + 1`.
    pub decide_threshold: usize,
}

/// Derives the standard quorum sizes from `(n, t)`.
pub fn quorum_thresholds(n: usize, t: usize) -> Result<QuorumThresholds, ConfigError> {
    if n < 4 {
        return Err(ConfigError::TooFewNodes(n));
    }
    if t == 0 {
        return Err(ConfigError::FaultBoundZero);
    }
    let max = (n - 1) / 3;
    if t > max {
        return Err(ConfigError::FaultBoundExceeded { n, t, max });
    }
    Ok(QuorumThresholds {
        n_minus_t: n - t,
        echo_threshold: (n + t) / 2 + 1,
        ready_threshold: t + 1,
        decide_threshold: 2 * t + 1,
    })
}

/// Virtual-clock parameters: per-step computation charge, drift bound, and
/// the honest-to-honest delivery bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockParams {
    /// Local computation time charged per message-emission act.
    pub t_comp: u64,
    /// Upper bound on local-clock drift from the global clock.
    pub delta_drift: u64,
    /// Upper bound on honest-to-honest message delay.
    pub delta_delivery: u64,
}

impl ClockParams {
    pub fn new(t_comp: u64, delta_drift: u64, delta_delivery: u64) -> ClockParams {
        ClockParams { t_comp, delta_drift, delta_delivery }
    }

    /// Least barrier value under which a plain multicast dissemination is
    /// guaranteed to complete at every honest node.
    pub fn multicast_dissemination_bound(&self) -> u64 {
        self.t_comp + 3 * self.delta_drift + self.delta_delivery
    }

    /// Least barrier value under which a consistent-broadcast dissemination is
    /// guaranteed to complete at every honest node.
    pub fn cb_dissemination_bound(&self, n: usize) -> u64 {
        (n as u64 + 2) * self.t_comp + 7 * self.delta_drift + 3 * self.delta_delivery
    }
}
