//! Closed-form message and signature-operation counts for graceful runs.
//!
//! A graceful run is one where every consensus instance decides in its first
//! phase and no recovery traffic is needed. The polynomials below count every
//! point-to-point send (multicasts count as n sends, self-delivery included)
//! and are used as the reference the simulator's accounting is checked
//! against.

use serde::{Deserialize, Serialize};

/// The protocols the oracle covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Primitive {
    /// Plain best-effort multicast of one value.
    Mu,
    /// Bracha's reliable broadcast, one instance.
    Rbb,
    /// Consistent broadcast with a uniqueness certificate, one instance.
    Cb,
    /// Binary consensus (n participants, graceful single phase).
    BcRbb,
    /// Multi-valued consensus (n participants, graceful).
    McRbb,
    /// Interactive consistency from consistent broadcast plus n binary
    /// consensus instances.
    IcBcRbb,
    /// Interactive consistency from multicast plus n multi-valued consensus
    /// instances.
    IcMcRbb,
}

impl Primitive {
    pub const ALL: [Primitive; 7] = [
        Primitive::Mu,
        Primitive::Rbb,
        Primitive::Cb,
        Primitive::BcRbb,
        Primitive::McRbb,
        Primitive::IcBcRbb,
        Primitive::IcMcRbb,
    ];
}

/// Messages sent by one graceful instance of `primitive` over `n` nodes.
pub fn expected_messages(primitive: Primitive, n: u64) -> u64 {
    match primitive {
        Primitive::Mu => n,
        Primitive::Rbb => 2 * n * n + n,
        Primitive::Cb => 3 * n,
        Primitive::BcRbb => 6 * n.pow(3) + 3 * n * n,
        Primitive::McRbb => 10 * n.pow(3) + 5 * n * n,
        Primitive::IcBcRbb => 6 * n.pow(4) + 3 * n.pow(3) + 3 * n * n,
        Primitive::IcMcRbb => 10 * n.pow(4) + 5 * n.pow(3) + n * n,
    }
}

/// Signature operations (generations plus verifications) for one graceful
/// instance. Only the certificate-bearing protocols perform any.
pub fn expected_signature_ops(primitive: Primitive, n: u64) -> u64 {
    match primitive {
        Primitive::Cb => n * n + 2 * n,
        Primitive::IcBcRbb => n.pow(3) + 2 * n * n,
        _ => 0,
    }
}
