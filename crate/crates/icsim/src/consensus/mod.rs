//! Consensus layers: randomized binary consensus and the multi-valued
//! consensus composed from it.

pub mod bc;
pub mod mc;

pub use bc::{AlreadyProposed, BcInstance};
pub use mc::McInstance;
