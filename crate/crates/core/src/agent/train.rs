use std::fmt;

use rayon::prelude::*;

use super::advantage::{discounted_returns, normalize};
use super::buffer::{ReplayBuffer, TransitionRecord};
use super::net::{act, act_greedy, ActOutcome, ActorCriticNet};
use super::objective::{objective_with_grad, ObjectiveKind, ObjectiveReport, Sample};
use super::{AgentHyper, Variant};
use crate::env::{StepInfo, StudentEnv};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamHyper, Checkpoint, Parameterized, RngStream};

/// Stream id for network initialisation. Episode `i` uses stream `i`, so the
/// auxiliary streams live at the top of the id space.
pub const NET_INIT_STREAM: u64 = u64::MAX;
/// Minibatch shuffling for update `u` uses stream `SHUFFLE_STREAM_BASE + u`.
pub const SHUFFLE_STREAM_BASE: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSelection {
    Sample,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutStep {
    pub correct: bool,
    pub reward: f64,
    pub info: StepInfo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub transitions: Vec<TransitionRecord>,
    pub steps: Vec<RolloutStep>,
    pub initial_apr: f64,
    pub final_apr: f64,
    pub reached_goal: bool,
}

impl Rollout {
    pub fn path(&self) -> Vec<usize> {
        self.transitions.iter().map(|t| t.action).collect()
    }

    pub fn cumulative_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }
}

/// Runs one episode with a fresh student drawn from `rng`.
pub fn rollout(env: &StudentEnv, net: &ActorCriticNet, rng: &mut RngStream, selection: ActionSelection) -> Result<Rollout> {
    let mut episode = env.reset(rng)?;
    let initial_apr = episode.initial_apr();
    let mut transitions = Vec::new();
    let mut steps = Vec::new();
    while !episode.is_done() {
        let state = episode.state().as_slice().to_vec();
        let ActOutcome {
            action,
            log_prob,
            entropy,
            value,
        } = match selection {
            ActionSelection::Sample => act(net, &state, rng)?,
            ActionSelection::Greedy => act_greedy(net, &state)?,
        };
        let step = env.step(&mut episode, action, rng)?;
        steps.push(RolloutStep {
            correct: step.correct,
            reward: step.reward,
            info: step.info,
        });
        transitions.push(TransitionRecord {
            state,
            action,
            reward: step.reward,
            next_state: step.next_state.into_vec(),
            done: step.done,
            log_prob,
            entropy,
            value,
        });
    }
    Ok(Rollout {
        transitions,
        initial_apr,
        final_apr: episode.apr(),
        reached_goal: steps.last().is_some_and(|s| s.info.goal_reached),
        steps,
    })
}

/// Flattens episodes into samples with Monte Carlo value targets and
/// advantages `G_t − V(s_t)`, optionally normalized across the whole batch.
pub fn build_samples<'a>(episodes: impl IntoIterator<Item = &'a [TransitionRecord]>, hyper: &AgentHyper) -> Vec<Sample<'a>> {
    let mut samples = Vec::new();
    for ep in episodes {
        let rewards: Vec<f64> = ep.iter().map(|t| t.reward).collect();
        for (t, g) in ep.iter().zip(discounted_returns(&rewards, hyper.gamma)) {
            samples.push(Sample {
                record: t,
                advantage: g - t.value,
                value_target: g,
            });
        }
    }
    if hyper.normalize_advantages {
        let mut adv: Vec<f64> = samples.iter().map(|s| s.advantage).collect();
        normalize(&mut adv);
        for (s, a) in samples.iter_mut().zip(adv) {
            s.advantage = a;
        }
    }
    samples
}

fn optimizer_step(net: &mut ActorCriticNet, adam: &mut Adam) -> Result<()> {
    adam.step(&mut net.params_mut())
}

/// One full-batch A2C step on fresh episodes.
pub fn a2c_update(episodes: &[Vec<TransitionRecord>], net: &mut ActorCriticNet, adam: &mut Adam, hyper: &AgentHyper) -> Result<ObjectiveReport> {
    let samples = build_samples(episodes.iter().map(Vec::as_slice), hyper);
    net.zero_grads();
    let rep = objective_with_grad(ObjectiveKind::A2c, &samples, net, hyper)?;
    optimizer_step(net, adam)?;
    Ok(rep)
}

/// `update_epochs` passes of shuffled minibatches over the buffer with the
/// clipped objective (PPO or EPPO). Returns one report per minibatch.
pub fn clipped_update(
    kind: ObjectiveKind,
    buffer: &ReplayBuffer,
    net: &mut ActorCriticNet,
    adam: &mut Adam,
    hyper: &AgentHyper,
    rng: &mut RngStream,
) -> Result<Vec<ObjectiveReport>> {
    if kind == ObjectiveKind::A2c {
        return Err(Error::Config("clipped_update needs the PPO or EPPO objective".into()));
    }
    let samples = build_samples(buffer.episodes(), hyper);
    if samples.is_empty() {
        return Err(Error::Empty("replay buffer"));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut reports = Vec::new();
    let mut batch = Vec::with_capacity(hyper.minibatch_size);
    for _ in 0..hyper.update_epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(hyper.minibatch_size) {
            // the set is random; evaluation order within it is canonical
            let mut idx = chunk.to_vec();
            idx.sort_unstable();
            batch.clear();
            batch.extend(idx.iter().map(|&i| samples[i]));
            net.zero_grads();
            reports.push(objective_with_grad(kind, &batch, net, hyper)?);
            optimizer_step(net, adam)?;
        }
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// 0-based index across the whole run.
    pub episode: usize,
    pub seed: u64,
    pub variant: Variant,
    pub initial_apr: f64,
    pub final_apr: f64,
    pub path_length: usize,
    pub cumulative_reward: f64,
    pub reached_goal: bool,
    pub path: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRecord {
    pub update: u64,
    /// Episodes completed when the update ran.
    pub episodes: usize,
    /// Mean over minibatches.
    pub report: ObjectiveReport,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingHistory {
    pub episodes: Vec<EpisodeRecord>,
    pub updates: Vec<UpdateRecord>,
}

impl TrainingHistory {
    pub fn extend(&mut self, other: TrainingHistory) {
        self.episodes.extend(other.episodes);
        self.updates.extend(other.updates);
    }
}

/// Aborted training: the error, what ran before it, and the last
/// parameters that were still finite.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: Error,
    pub diagnostics: String,
    pub history: TrainingHistory,
    pub checkpoint: Checkpoint,
}

impl fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.error, self.diagnostics)
    }
}

impl std::error::Error for TrainFailure {}

/// Algorithm loop: collect a window of episodes with `π_θᵏ`, store them,
/// update, repeat. Windows are aligned to absolute episode indices, so a run
/// resumed from a checkpoint taken at a window boundary continues exactly.
#[derive(Debug, Clone)]
pub struct Trainer {
    env: StudentEnv,
    variant: Variant,
    hyper: AgentHyper,
    seed: u64,
    net: ActorCriticNet,
    adam: Adam,
    buffer: ReplayBuffer,
    episodes_done: usize,
    updates: u64,
    parallel: bool,
}

impl Trainer {
    pub fn new(env: StudentEnv, variant: Variant, hyper: AgentHyper, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let net = ActorCriticNet::new(env.action_count(), hyper.hidden, &mut RngStream::new(seed, NET_INIT_STREAM))?;
        Ok(Self {
            buffer: ReplayBuffer::new(hyper.buffer_capacity)?,
            adam: Adam::new(AdamHyper::with_lr(hyper.lr)),
            env,
            variant,
            hyper,
            seed,
            net,
            episodes_done: 0,
            updates: 0,
            parallel: false,
        })
    }

    /// Collects the episodes of a window on the rayon pool. Results are
    /// merged in episode order, so output does not depend on scheduling.
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn net(&self) -> &ActorCriticNet {
        &self.net
    }

    pub fn env(&self) -> &StudentEnv {
        &self.env
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn hyper(&self) -> &AgentHyper {
        &self.hyper
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn collect(&self, range: std::ops::Range<usize>) -> Result<Vec<Rollout>> {
        let one = |i: usize| rollout(&self.env, &self.net, &mut RngStream::new(self.seed, i as u64), ActionSelection::Sample);
        if self.parallel {
            range.into_par_iter().map(one).collect()
        } else {
            range.map(one).collect()
        }
    }

    fn update(&mut self, rollouts: Vec<Rollout>) -> Result<ObjectiveReport> {
        let episodes: Vec<Vec<TransitionRecord>> = rollouts.into_iter().map(|r| r.transitions).collect();
        match self.variant {
            Variant::A2c => a2c_update(&episodes, &mut self.net, &mut self.adam, &self.hyper),
            Variant::Ppo | Variant::Eppo => {
                // only data from the current θᵏ is replayed
                self.buffer.clear();
                for ep in episodes {
                    self.buffer.push_episode(ep);
                }
                let mut rng = RngStream::new(self.seed, SHUFFLE_STREAM_BASE + self.updates);
                let reports = clipped_update(
                    self.variant.objective_kind(),
                    &self.buffer,
                    &mut self.net,
                    &mut self.adam,
                    &self.hyper,
                    &mut rng,
                )?;
                Ok(mean_report(&reports))
            }
        }
    }

    /// Runs `episodes` more episodes, calling `progress` after each one.
    pub fn run_with<F: FnMut(&EpisodeRecord)>(&mut self, episodes: usize, mut progress: F) -> std::result::Result<TrainingHistory, Box<TrainFailure>> {
        let mut history = TrainingHistory::default();
        let target = self.episodes_done + episodes;
        while self.episodes_done < target {
            let window = self.hyper.episodes_per_update;
            let end = ((self.episodes_done / window + 1) * window).min(target);
            let start = self.episodes_done;
            let rollouts = match self.collect(start..end) {
                Ok(r) => r,
                Err(e) => return Err(self.fail(e, history, format!("collecting episodes {start}..{end}"))),
            };
            for (i, r) in rollouts.iter().enumerate() {
                let rec = EpisodeRecord {
                    episode: start + i,
                    seed: self.seed,
                    variant: self.variant,
                    initial_apr: r.initial_apr,
                    final_apr: r.final_apr,
                    path_length: r.transitions.len(),
                    cumulative_reward: r.cumulative_reward(),
                    reached_goal: r.reached_goal,
                    path: r.path(),
                };
                progress(&rec);
                history.episodes.push(rec);
            }
            self.episodes_done = end;
            match self.update(rollouts) {
                Ok(report) => {
                    history.updates.push(UpdateRecord {
                        update: self.updates,
                        episodes: end,
                        report,
                    });
                    self.updates += 1;
                }
                Err(e) => {
                    let msg = format!("update {} after episode {end}", self.updates);
                    return Err(self.fail(e, history, msg));
                }
            }
        }
        Ok(history)
    }

    pub fn run(&mut self, episodes: usize) -> std::result::Result<TrainingHistory, Box<TrainFailure>> {
        self.run_with(episodes, |_| {})
    }

    fn fail(&self, error: Error, history: TrainingHistory, context: String) -> Box<TrainFailure> {
        let last = history.updates.last().map(|u| u.report);
        let diagnostics = match last {
            Some(r) => format!(
                "{context}; previous update: objective {:.6e}, value loss {:.6e}, entropy {:.6}",
                r.objective, r.value_loss, r.live_entropy
            ),
            None => context,
        };
        Box::new(TrainFailure {
            error,
            diagnostics,
            history,
            checkpoint: self.to_checkpoint(),
        })
    }

    /// Network, optimizer state and progress counters.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = self.net.to_checkpoint();
        c.set_meta("kind", "trainer");
        c.set_meta("variant", self.variant);
        c.set_meta("seed", self.seed);
        c.set_meta("episodes_done", self.episodes_done);
        c.set_meta("updates", self.updates);
        c.set_meta("adam_steps", self.adam.steps());
        let (first, second) = self.adam.moments();
        c.set_meta("adam_tensors", first.len());
        for (i, (m, v)) in first.iter().zip(second).enumerate() {
            c.push(format!("adam.m.{i}"), &[m.len()], m);
            c.push(format!("adam.v.{i}"), &[v.len()], v);
        }
        c
    }

    /// Resumes from [`Trainer::to_checkpoint`] output. Variant and seed come
    /// from the checkpoint; the hyperparameters are the caller's.
    pub fn from_checkpoint(env: StudentEnv, hyper: AgentHyper, ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.meta("kind")? != "trainer" {
            return Err(Error::Checkpoint("not a trainer checkpoint".into()));
        }
        let variant: Variant = ckpt.meta("variant")?.parse()?;
        let seed: u64 = ckpt.meta_parse("seed")?;
        let mut t = Self::new(env, variant, hyper, seed)?;
        let net = ActorCriticNet::from_checkpoint(ckpt)?;
        if net.action_count() != t.env.action_count() || net.hidden() != hyper.hidden {
            return Err(Error::Checkpoint(format!(
                "checkpoint network is {}x{}, config expects {}x{}",
                net.action_count(),
                net.hidden(),
                t.env.action_count(),
                hyper.hidden
            )));
        }
        t.net = net;
        let n: usize = ckpt.meta_parse("adam_tensors")?;
        let mut first = Vec::with_capacity(n);
        let mut second = Vec::with_capacity(n);
        for i in 0..n {
            first.push(ckpt.tensor(&format!("adam.m.{i}"))?.values.clone());
            second.push(ckpt.tensor(&format!("adam.v.{i}"))?.values.clone());
        }
        t.adam = Adam::restore(AdamHyper::with_lr(hyper.lr), ckpt.meta_parse("adam_steps")?, first, second)?;
        t.episodes_done = ckpt.meta_parse("episodes_done")?;
        t.updates = ckpt.meta_parse("updates")?;
        Ok(t)
    }
}

fn mean_report(reports: &[ObjectiveReport]) -> ObjectiveReport {
    let n = reports.len().max(1) as f64;
    let mut m = ObjectiveReport::default();
    for r in reports {
        m.objective += r.objective / n;
        m.surrogate += r.surrogate / n;
        m.value_loss += r.value_loss / n;
        m.entropy += r.entropy / n;
        m.live_entropy += r.live_entropy / n;
        m.clip_fraction += r.clip_fraction / n;
        m.samples += r.samples;
    }
    m
}
