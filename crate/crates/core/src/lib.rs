//! Policy decomposition for discounted optimal control problems.
//!
//! A decomposition replaces one full-state, full-input policy by a forest of
//! lower-dimensional sub-policies that are either decoupled or cascaded. The
//! crate enumerates pure decompositions, predicts their suboptimality with
//! linearized (LQR) and trajectory-based (DDP) estimates, and verifies the
//! predictions by solving the sub-policies with grid-based policy iteration.

pub mod ddp;
pub mod decomp;
pub mod gps;
pub mod grid;
pub mod linalg;
pub mod lqr;
pub mod pipeline;
pub mod report;
mod serde_util;
pub mod sim;
pub mod systems;

pub use decomp::{Decomposition, DecompositionKind, SubPolicyNode};
pub use systems::{load_benchmark, BenchmarkId, ControlSystem, SystemError};
