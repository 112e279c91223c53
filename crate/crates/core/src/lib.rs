//! Exact simulation of stoquastic Merlin-Arthur verifiers with unentangled,
//! non-negative provers.
//!
//! Every verifier is a reversible circuit over X, CNOT and Toffoli gates with
//! `|0>` and `|+>` ancillas and a Hadamard-basis output measurement. Acceptance
//! probabilities are evaluated by enumerating basis branches, so they are exact
//! rationals whenever the witness weights are rational.

pub mod cleancc;
pub mod error;
pub mod npcert;
pub mod protocols;
pub mod rectclosure;
pub mod revsim;
pub mod scalar;
pub mod sepval;
pub mod sosround;
pub mod states;
pub mod verifier;

pub use error::{Error, Result};
pub use revsim::{Gate, ReversibleCircuit};
pub use scalar::{Rational, Scalar};
pub use states::{DensityMatrix, Distribution, NonNegativeState};
pub use verifier::builder::Builder;
pub use verifier::{StoqVerifier, Thresholds, VerifierLayout};

/// Version tag written into every JSON report.
pub const SCHEMA_VERSION: u32 = 1;
