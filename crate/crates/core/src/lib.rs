//! Entanglement protection of qutrit pairs by local quantum feedback.
//!
//! [`qcore`] holds the linear algebra, [`channels`] the decay channels,
//! [`codes`] the two feedback codes, [`trajectories`] the conditional and
//! unconditional dynamics, [`analysis`] the sudden-change classification and
//! [`harness`] configuration and file output.

// `!(x > 0.0)` also rejects NaN in parameter validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channels;
pub mod codes;
pub mod error;
pub mod harness;
pub mod qcore;
pub mod trajectories;

pub use error::{QecError, Result};
