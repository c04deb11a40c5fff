//! Deterministic simulation library for a covered-call replicating market
//! maker (a time-sensitive CFMM) and the derivative constructions built on
//! top of its liquidity tokens: vanilla and binary options, straddles,
//! fully collateralized futures, theta-vault rollovers, and option-hedged
//! liquidation-free lending positions.
//!
//! All prices are quoted in the stable asset per unit of the risky asset,
//! time is measured in years, and every pool operation is a pure function
//! from state to state. Valuations assume a zero risk-free rate.

pub mod blackscholes;
pub mod catalog;
pub mod decimal;
pub mod derivatives;
pub mod error;
pub mod lending;
pub mod numerics;
pub mod pool;
pub mod vault;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
