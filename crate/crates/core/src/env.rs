//! Episodic student environment: sample a student, recommend an exercise,
//! draw a Bernoulli response, update the knowledge state, pay the shaped
//! reward, stop at the goal or at `t_max`.

use std::sync::Arc;

use rand_distr::{Distribution, Normal};

use crate::akt::AktLiteModel;
use crate::error::{Error, Result};
use crate::knowledge::{apr, distance_to_goal, goal_reached, learning_gain, ExerciseCatalog, GoalConfig, InteractionLog, KnowledgeState};
use crate::nn::ops::sigmoid;
use crate::nn::RngStream;
use crate::reward::{penalty_lambda, step_reward_detailed, RecommendationCounts, RewardBranch, RewardParams, DEFAULT_D_FLOOR};

/// Distribution of initial mastery: `m_j = sigmoid(g + z_j)` with ability
/// `g ~ N(ability_mean, ability_std²)` and per-exercise offsets
/// `z_j ~ N(0, offset_std²)`, all drawn fresh for every student.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentProfile {
    pub ability_mean: f64,
    pub ability_std: f64,
    pub offset_std: f64,
}

impl Default for StudentProfile {
    fn default() -> Self {
        Self {
            ability_mean: -0.8,
            ability_std: 0.5,
            offset_std: 0.7,
        }
    }
}

impl StudentProfile {
    pub fn validate(&self) -> Result<()> {
        if !self.ability_mean.is_finite() || !(self.ability_std >= 0.0) || !(self.offset_std >= 0.0) {
            return Err(Error::Config("profile means must be finite and deviations non-negative".into()));
        }
        Ok(())
    }

    /// Expected initial average pass rate, by quadrature over
    /// `g + z ~ N(μ, σ_g² + σ_z²)` (the expectation of a mean of identically
    /// distributed elements is the per-element expectation).
    pub fn expected_initial_apr(&self, dynamics: &StudentDynamics) -> f64 {
        let sd = (self.ability_std.powi(2) + self.offset_std.powi(2)).sqrt();
        let observe = |x: f64| dynamics.observe(sigmoid(x));
        if sd == 0.0 {
            return observe(self.ability_mean);
        }
        // Simpson's rule over ±10 standard deviations.
        let n = 4000;
        let (lo, hi) = (-10.0, 10.0);
        let h = (hi - lo) / n as f64;
        let norm = (2.0 * std::f64::consts::PI).sqrt();
        let f = |u: f64| (-0.5 * u * u).exp() / norm * observe(self.ability_mean + sd * u);
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(lo + i as f64 * h);
        }
        acc * h / 3.0
    }
}

/// Learning and response-noise rates of the analytic student.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentDynamics {
    pub eta_correct: f64,
    pub eta_wrong: f64,
    /// Fraction of the applied learning rate transferred to the other
    /// exercises of the same topic.
    pub kappa: f64,
    pub slip: f64,
    pub guess: f64,
}

impl Default for StudentDynamics {
    fn default() -> Self {
        Self {
            eta_correct: 0.6,
            eta_wrong: 0.02,
            kappa: 0.15,
            slip: 0.05,
            guess: 0.05,
        }
    }
}

impl StudentDynamics {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("eta_correct", self.eta_correct),
            ("eta_wrong", self.eta_wrong),
            ("kappa", self.kappa),
            ("slip", self.slip),
            ("guess", self.guess),
        ];
        for (name, r) in rates {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config(format!("environment.{name} must lie in [0,1), got {r}")));
            }
        }
        if self.eta_wrong > self.eta_correct {
            return Err(Error::Config("environment.eta_wrong must not exceed eta_correct".into()));
        }
        Ok(())
    }

    /// Probability of a correct answer given mastery `m`.
    #[inline]
    pub fn observe(&self, m: f64) -> f64 {
        (1.0 - self.slip) * m + self.guess * (1.0 - m)
    }
}

/// Knowledge-tracing surrogate with learn/slip/guess dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticStudent {
    mastery: Vec<f64>,
    dynamics: StudentDynamics,
}

impl AnalyticStudent {
    pub fn new(mastery: Vec<f64>, dynamics: StudentDynamics) -> Result<Self> {
        dynamics.validate()?;
        if mastery.is_empty() {
            return Err(Error::Empty("mastery"));
        }
        if let Some(m) = mastery.iter().find(|m| !(**m > 0.0 && **m < 1.0)) {
            return Err(Error::Config(format!("mastery values must lie in (0,1), got {m}")));
        }
        Ok(Self { mastery, dynamics })
    }

    pub fn sample(exercise_count: usize, profile: &StudentProfile, dynamics: StudentDynamics, rng: &mut RngStream) -> Result<Self> {
        let ability = Normal::new(profile.ability_mean, profile.ability_std)
            .map_err(|e| Error::Config(format!("ability distribution: {e}")))?
            .sample(rng);
        let offsets = Normal::new(0.0, profile.offset_std).map_err(|e| Error::Config(format!("offset distribution: {e}")))?;
        let mastery = (0..exercise_count)
            .map(|_| crate::knowledge::clamp_prob(sigmoid(ability + offsets.sample(rng))))
            .collect();
        Self::new(mastery, dynamics)
    }

    pub fn mastery(&self) -> &[f64] {
        &self.mastery
    }

    pub fn dynamics(&self) -> &StudentDynamics {
        &self.dynamics
    }

    pub fn observed_state(&self) -> KnowledgeState {
        KnowledgeState::from_probs(self.mastery.iter().map(|&m| self.dynamics.observe(m)).collect()).expect("mastery is finite and non-empty")
    }

    /// Applies the learning update for answering `action` with `correct`.
    pub fn practice(&mut self, catalog: &ExerciseCatalog, action: usize, correct: bool) {
        let eta = if correct {
            self.dynamics.eta_correct
        } else {
            self.dynamics.eta_wrong
        };
        let topic = catalog.exercises()[action].topic;
        let transfer = self.dynamics.kappa * eta;
        for &j in catalog.topic_members(topic) {
            let rate = if j == action { eta } else { transfer };
            self.mastery[j] += rate * (1.0 - self.mastery[j]);
        }
    }
}

/// What produces knowledge states.
#[derive(Debug, Clone)]
pub enum Backing {
    /// The analytic student's own noisy mastery is the state.
    Analytic,
    /// A trained tracer reads the interaction log; the analytic student only
    /// writes the seed history.
    Akt(Arc<AktLiteModel>),
}

#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub profile: StudentProfile,
    pub dynamics: StudentDynamics,
    pub d_floor: f64,
    /// Interactions simulated before `s₁` is read under the akt backing.
    pub seed_history_len: usize,
    pub backing: Backing,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            profile: StudentProfile::default(),
            dynamics: StudentDynamics::default(),
            d_floor: DEFAULT_D_FLOOR,
            seed_history_len: 10,
            backing: Backing::Analytic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// 1-based step index within the episode.
    pub step: usize,
    pub action: usize,
    pub apr: f64,
    pub learning_gain: f64,
    pub distance: f64,
    pub lambda: f64,
    pub n_action: u32,
    pub branch: RewardBranch,
    pub penalty: f64,
    pub goal_reached: bool,
    /// Stopped by `t_max` without reaching the goal.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub correct: bool,
    pub next_state: KnowledgeState,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One student's session. Cloning yields an independent snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    student: AnalyticStudent,
    state: KnowledgeState,
    log: InteractionLog,
    counts: RecommendationCounts,
    reward: RewardParams,
    initial_apr: f64,
    current_apr: f64,
    steps: usize,
    done: bool,
}

impl Episode {
    pub fn state(&self) -> &KnowledgeState {
        &self.state
    }

    pub fn log(&self) -> &InteractionLog {
        &self.log
    }

    pub fn student(&self) -> &AnalyticStudent {
        &self.student
    }

    pub fn counts(&self) -> &RecommendationCounts {
        &self.counts
    }

    pub fn reward_params(&self) -> &RewardParams {
        &self.reward
    }

    pub fn initial_apr(&self) -> f64 {
        self.initial_apr
    }

    pub fn apr(&self) -> f64 {
        self.current_apr
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }
}

#[derive(Debug, Clone)]
pub struct StudentEnv {
    catalog: Arc<ExerciseCatalog>,
    config: EnvConfig,
    goal: GoalConfig,
}

impl StudentEnv {
    pub fn new(catalog: Arc<ExerciseCatalog>, config: EnvConfig, goal: GoalConfig) -> Result<Self> {
        config.profile.validate()?;
        config.dynamics.validate()?;
        GoalConfig::new(goal.beta, goal.t_max)?;
        if !(config.d_floor > 0.0) {
            return Err(Error::Config("environment.d_floor must be positive".into()));
        }
        if let Backing::Akt(model) = &config.backing {
            model.check_catalog(&catalog)?;
        }
        Ok(Self { catalog, config, goal })
    }

    pub fn catalog(&self) -> &Arc<ExerciseCatalog> {
        &self.catalog
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn goal(&self) -> GoalConfig {
        self.goal
    }

    pub fn action_count(&self) -> usize {
        self.catalog.len()
    }

    /// Samples a fresh student and returns the episode holding `s₁`.
    pub fn reset(&self, rng: &mut RngStream) -> Result<Episode> {
        let student = AnalyticStudent::sample(self.catalog.len(), &self.config.profile, self.config.dynamics, rng)?;
        self.start_episode(student, rng)
    }

    /// Starts an episode for a given student (e.g. with forced mastery).
    pub fn start_episode(&self, mut student: AnalyticStudent, rng: &mut RngStream) -> Result<Episode> {
        if student.mastery().len() != self.catalog.len() {
            return Err(Error::shape("start_episode", self.catalog.len(), student.mastery().len()));
        }
        let mut log = InteractionLog::new();
        let state = match &self.config.backing {
            Backing::Analytic => student.observed_state(),
            Backing::Akt(model) => {
                for _ in 0..self.config.seed_history_len {
                    let action = rng.below(self.catalog.len());
                    let p = student.dynamics().observe(student.mastery()[action]);
                    let correct = rng.bernoulli(p);
                    student.practice(&self.catalog, action, correct);
                    log.push(action, correct);
                }
                model.predict_state(&log)?
            }
        };
        let initial_apr = apr(&state);
        let lambda = penalty_lambda(distance_to_goal(self.goal.beta, initial_apr), self.catalog.len(), self.goal.t_max);
        Ok(Episode {
            student,
            state,
            log,
            counts: RecommendationCounts::new(self.catalog.len()),
            reward: RewardParams::new(lambda, self.catalog.len(), self.config.d_floor)?,
            initial_apr,
            current_apr: initial_apr,
            steps: 0,
            done: false,
        })
    }

    /// Draws the student's response: correct with probability `s_action`.
    pub fn respond(&self, episode: &Episode, action: usize, rng: &mut RngStream) -> Result<bool> {
        self.catalog.check_action(action)?;
        Ok(rng.bernoulli(episode.state.as_slice()[action]))
    }

    /// Deterministic state update for an observed `(action, correct)` pair.
    pub fn transition<'e>(&self, episode: &'e mut Episode, action: usize, correct: bool) -> Result<&'e KnowledgeState> {
        self.catalog.check_action(action)?;
        episode.log.push(action, correct);
        episode.state = match &self.config.backing {
            Backing::Analytic => {
                episode.student.practice(&self.catalog, action, correct);
                episode.student.observed_state()
            }
            Backing::Akt(model) => model.predict_state(&episode.log)?,
        };
        Ok(&episode.state)
    }

    /// Recommend → respond → update → reward → termination check.
    pub fn step(&self, episode: &mut Episode, action: usize, rng: &mut RngStream) -> Result<EnvStep> {
        if episode.done {
            return Err(Error::EpisodeFinished { steps: episode.steps });
        }
        let correct = self.respond(episode, action, rng)?;
        self.transition(episode, action, correct)?;
        episode.steps += 1;
        let apr_prev = episode.current_apr;
        let apr_now = apr(&episode.state);
        episode.current_apr = apr_now;
        let lg = learning_gain(apr_now, apr_prev);
        let d = distance_to_goal(self.goal.beta, apr_now);
        let n_action = episode.counts.record(action);
        let breakdown = step_reward_detailed(lg, d, &episode.reward, n_action);
        let reached = goal_reached(apr_now, self.goal.beta);
        let done = reached || episode.steps >= self.goal.t_max;
        episode.done = done;
        Ok(EnvStep {
            correct,
            next_state: episode.state.clone(),
            reward: breakdown.reward,
            done,
            info: StepInfo {
                step: episode.steps,
                action,
                apr: apr_now,
                learning_gain: lg,
                distance: d,
                lambda: episode.reward.lambda,
                n_action,
                branch: breakdown.branch,
                penalty: breakdown.penalty,
                goal_reached: reached,
                truncated: done && !reached,
            },
        })
    }
}
