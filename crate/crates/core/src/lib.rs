//! Adaptive exercise recommendation: a simulated-student environment, an
//! attention-based knowledge tracer, actor-critic agents (A2C, PPO and PPO
//! with buffered entropy) and learning-path metrics.

pub mod agent;
pub mod akt;
pub mod env;
pub mod error;
pub mod knowledge;
pub mod metrics;
pub mod nn;
pub mod reward;

pub use error::{Error, Result};
