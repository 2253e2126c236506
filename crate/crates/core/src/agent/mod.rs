//! Actor-critic agents recommending exercises: A2C, PPO, and EPPO (PPO whose
//! entropy bonus is the value stored in the buffer at collection time).

pub mod advantage;
pub mod buffer;
pub mod net;
pub mod objective;
pub mod train;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use advantage::{discounted_advantages, discounted_returns, normalize};
pub use buffer::{ReplayBuffer, TransitionRecord, DEFAULT_BUFFER_CAPACITY};
pub use net::{act, act_greedy, ActOutcome, ActorCriticNet, DEFAULT_HIDDEN};
pub use objective::{
    a2c_objective, clipped_surrogate, eppo_objective, evaluate_objective, ppo_objective, prob_ratio, ObjectiveKind,
    ObjectiveReport, Sample,
};
pub use train::{
    a2c_update, build_samples, clipped_update, rollout, ActionSelection, EpisodeRecord, Rollout, RolloutStep,
    TrainFailure, Trainer, TrainingHistory, UpdateRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    A2c,
    Ppo,
    Eppo,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::A2c, Variant::Ppo, Variant::Eppo];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::A2c => "a2c",
            Variant::Ppo => "ppo",
            Variant::Eppo => "eppo",
        }
    }

    pub fn objective_kind(self) -> ObjectiveKind {
        match self {
            Variant::A2c => ObjectiveKind::A2c,
            Variant::Ppo => ObjectiveKind::Ppo,
            Variant::Eppo => ObjectiveKind::Eppo,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a2c" => Ok(Variant::A2c),
            "ppo" => Ok(Variant::Ppo),
            "eppo" => Ok(Variant::Eppo),
            other => Err(Error::Config(format!("unknown variant `{other}` (expected a2c, ppo or eppo)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentHyper {
    pub gamma: f64,
    pub clip_eps: f64,
    /// Entropy temperature.
    pub alpha: f64,
    pub vf_coef: f64,
    pub lr: f64,
    pub update_epochs: usize,
    pub minibatch_size: usize,
    pub episodes_per_update: usize,
    pub buffer_capacity: usize,
    pub hidden: usize,
    pub normalize_advantages: bool,
}

impl Default for AgentHyper {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            clip_eps: 0.2,
            alpha: 0.01,
            vf_coef: 0.5,
            lr: 3e-4,
            update_epochs: 4,
            minibatch_size: 256,
            episodes_per_update: 8,
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
            hidden: DEFAULT_HIDDEN,
            normalize_advantages: true,
        }
    }
}

impl AgentHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("agent.gamma must be in [0, 1], got {}", self.gamma));
        }
        if !(self.clip_eps > 0.0) || !self.clip_eps.is_finite() {
            return bad(format!("agent.clip_eps must be > 0, got {}", self.clip_eps));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return bad(format!("agent.alpha must be finite and >= 0, got {}", self.alpha));
        }
        if !self.vf_coef.is_finite() || self.vf_coef < 0.0 {
            return bad(format!("agent.vf_coef must be finite and >= 0, got {}", self.vf_coef));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad(format!("agent.lr must be > 0, got {}", self.lr));
        }
        for (name, v) in [
            ("update_epochs", self.update_epochs),
            ("minibatch_size", self.minibatch_size),
            ("episodes_per_update", self.episodes_per_update),
            ("buffer_capacity", self.buffer_capacity),
            ("hidden", self.hidden),
        ] {
            if v == 0 {
                return bad(format!("agent.{name} must be positive"));
            }
        }
        Ok(())
    }
}
