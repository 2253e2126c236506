//! Reward shaping: learning gain scaled by the inverse distance to the goal,
//! minus a repetition penalty `λ^n` on non-negative gains.

use crate::error::{Error, Result};

pub const DEFAULT_D_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    pub lambda: f64,
    pub action_count: usize,
    /// Lower bound applied to the distance before dividing by it.
    pub d_floor: f64,
}

impl RewardParams {
    pub fn new(lambda: f64, action_count: usize, d_floor: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if action_count == 0 {
            return Err(Error::Config("action_count must be positive".into()));
        }
        if !(d_floor > 0.0) {
            return Err(Error::Config(format!("d_floor must be positive, got {d_floor}")));
        }
        Ok(Self {
            lambda,
            action_count,
            d_floor,
        })
    }
}

/// Per-episode recommendation counts `n_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecommendationCounts(Vec<u32>);

impl RecommendationCounts {
    pub fn new(exercise_count: usize) -> Self {
        Self(vec![0; exercise_count])
    }

    /// Records a recommendation and returns the updated count, which
    /// includes this recommendation.
    pub fn record(&mut self, exercise: usize) -> u32 {
        self.0[exercise] += 1;
        self.0[exercise]
    }

    pub fn get(&self, exercise: usize) -> u32 {
        self.0[exercise]
    }

    pub fn reset(&mut self) {
        self.0.iter_mut().for_each(|n| *n = 0);
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

/// `λ = d₁·|A| / T_max`, with `d₁` clamped below at zero.
pub fn penalty_lambda(d1: f64, action_count: usize, t_max: usize) -> f64 {
    d1.max(0.0) * action_count as f64 / t_max as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardBranch {
    /// `lg >= 0`: scaled gain minus `λ^n`.
    Gain,
    /// `lg < 0`: scaled gain only.
    Loss,
}

impl RewardBranch {
    pub fn as_str(self) -> &'static str {
        match self {
            RewardBranch::Gain => "gain",
            RewardBranch::Loss => "loss",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    pub reward: f64,
    pub branch: RewardBranch,
    pub penalty: f64,
    pub effective_distance: f64,
}

pub fn step_reward_detailed(lg: f64, d: f64, params: &RewardParams, n_action: u32) -> RewardBreakdown {
    debug_assert!(n_action >= 1, "n_action counts the current recommendation");
    let d_eff = d.max(params.d_floor);
    let scaled = lg * params.action_count as f64 / d_eff;
    if lg >= 0.0 {
        let penalty = params.lambda.powi(n_action as i32);
        RewardBreakdown {
            reward: scaled - penalty,
            branch: RewardBranch::Gain,
            penalty,
            effective_distance: d_eff,
        }
    } else {
        RewardBreakdown {
            reward: scaled,
            branch: RewardBranch::Loss,
            penalty: 0.0,
            effective_distance: d_eff,
        }
    }
}

pub fn step_reward(lg: f64, d: f64, params: &RewardParams, n_action: u32) -> f64 {
    step_reward_detailed(lg, d, params, n_action).reward
}
