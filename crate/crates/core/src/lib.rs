//! Toolkit for multipartite processes with and without definite causal
//! order.
//!
//! The crate models an environment interacting with `N` parties as a channel
//! from the joint party outputs `X_1 ... X_N` (plus an optional global past
//! `P`) to the joint party inputs `A_1 ... A_N` (plus an optional global
//! future `F`), represented by its Choi matrix over labeled tensor factors.
//! On top of that representation it provides:
//!
//! - validation of process matrices (positivity, trace normalization, and
//!   the per-subset reduction conditions), with projection onto the valid
//!   subspace and seeded random generators for both generic and causally
//!   ordered processes;
//! - parity-erasure checks: classical and quantum detectors for whether any
//!   subset of parties can jointly learn the parity of the inputs chosen by
//!   that subset, a property equivalent to the validity conditions above;
//! - one-way-signaling decompositions of classical tables and quantum
//!   channels, channel insertion, and full supermap application built by
//!   recursive insertion;
//! - exhaustive exploration of the two-bit-party polytope: deterministic
//!   census, exact vertex enumeration, and an exact-arithmetic membership
//!   program for causal separability.

pub mod channel;
pub mod decompose;
pub mod error;
pub mod explore;
pub mod io;
pub mod label;
pub mod linprog;
pub mod operator;
pub mod process;
pub mod random;
pub mod reduction;

pub use error::{Error, Result};
pub use label::{Role, SystemLabel, TensorSpace};
pub use operator::LabeledOperator;

/// Default tolerance for Hermiticity, positivity, and residual-zero checks.
pub const DEFAULT_TOL: f64 = 1e-9;
