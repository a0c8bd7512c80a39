//! Leveraged ETF portfolio analytics.
//!
//! The crate is organised bottom-up:
//!
//! * [`market_models`] samples exact interval returns for the stock index, a
//!   leveraged ETF written on it and the risk-free bond under GBM or Kou
//!   double-exponential jump diffusion.
//! * [`payoff_analytics`] evaluates the closed-form terminal payoffs of the
//!   LETF/bond and VETF/bond portfolios.
//! * [`mc_engine`] runs paired portfolio paths under fixed weights or a
//!   neural policy, over parametric models or bootstrapped scenarios.
//! * [`perf_stats`] reduces terminal ratios to the reported statistics
//!   (Omega ratio, expected shortfall, percentiles, CDFs).
//! * [`data_pipeline`] turns daily index/T-bill series and CPI levels into
//!   real monthly LETF/VETF proxy returns and resamples them with the
//!   stationary block bootstrap.
//! * [`policy_nn`] trains a small feed-forward allocation network on the
//!   cumulative tracking-difference objective by hand-written reverse mode.
//!
//! Path-level work is data parallel. With the `parallel` feature (default) it
//! runs on rayon; without it every [`Execution`] falls back to a sequential
//! loop. Results do not depend on the execution mode or thread count.

pub mod data_pipeline;
pub mod error;
pub mod market_models;
pub mod mc_engine;
pub mod par;
pub mod payoff_analytics;
pub mod perf_stats;
pub mod policy_nn;
pub mod rng;

pub use error::{Error, Result};
pub use par::Execution;
pub use rng::RngStream;
