//! Waiting-time distributions and link fidelities of nested quantum repeater
//! chains, computed exactly up to a truncation time or by Monte Carlo sampling.

pub mod cli;
pub mod deterministic;
pub mod error;
pub mod montecarlo;
pub mod params;
pub mod pmf;
pub mod werner;

pub use error::{Error, Result};
pub use params::ProtocolParams;
pub use pmf::{TruncatedCdf, TruncatedPmf};
pub use werner::{LinkSample, WernerParam};
