//! Distributed power-packing schedulers for wireless links under the SINR
//! interference model.

pub mod error;
pub mod exec;
pub mod harness;
pub mod iterative;
pub mod packing;
pub mod perturbed;
pub mod queueing;
pub mod region;
pub mod scenarios;
pub mod schedule;
pub mod sinr;
pub mod topology;
pub mod trace;

pub use error::{Error, Result};
pub use exec::Execution;
pub use sinr::{NetworkConfig, PowerAllocation, RateVector};
