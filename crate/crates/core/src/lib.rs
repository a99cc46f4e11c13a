//! Learning control of unknown partially observable linear-quadratic-Gaussian
//! systems with the explore-then-commit (ExpCommit) scheme.
//!
//! Modules follow the pipeline: [`system`] simulates the plant, [`riccati`]
//! synthesizes the optimal controller and filter for a known model,
//! [`estimator`] runs them online, [`sysid`] identifies a model from an
//! exploration trajectory, [`ofu`] picks an optimistic model from the
//! confidence set and [`harness`] ties everything together and measures regret.

pub mod cli;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod ofu;
pub mod riccati;
pub mod sysid;
pub mod system;

pub use error::{LqgError, Result};
pub use harness::{run_expcommit, ExpCommitConfig, RunResult};
pub use system::{CostParams, LqgSystem};
