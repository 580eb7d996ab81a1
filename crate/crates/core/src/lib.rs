//! Publicly verifiable quantum money with a bounded number of verifications,
//! built from conjugate-coding one-time memories, hash pre-image tags and
//! hash-based mint signatures, plus quantum tokens for signing single bits.
//!
//! Quantum states are simulated by [`qsim::QubitStore`]; everything above it
//! is ordinary classical protocol code.

pub mod banknote;
pub(crate) mod codec;
pub mod harness;
pub mod hashsig;
pub mod otm;
pub mod qsim;
pub mod qtds;
pub mod stats;

pub use codec::DecodeError;
