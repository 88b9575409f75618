//! The interactive-consistency compositions.
//!
//! Three barrier-based algorithms plus the eventual variant:
//!
//! * [`pease::PeaseNode`]: `t + 1` timeout-delimited relay rounds.
//! * [`mc_rbb::McRbbNode`]: plain multicast dissemination, then one
//!   multi-valued consensus per slot.
//! * [`bc_rbb::BcRbbNode`]: consistent-broadcast dissemination, then one
//!   binary consensus per slot plus value recovery.
//! * [`eic::EicNode`]: no barrier at all; one reliable broadcast per node and
//!   an up-call per filled slot.

pub mod bc_rbb;
pub mod eic;
pub mod mc_rbb;
pub mod pease;

pub use bc_rbb::BcRbbNode;
pub use eic::EicNode;
pub use mc_rbb::McRbbNode;
pub use pease::PeaseNode;
