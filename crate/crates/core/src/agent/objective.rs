use super::buffer::TransitionRecord;
use super::net::{ActorCriticNet, NetForward};
use super::AgentHyper;
use crate::error::{Error, Result};
use crate::nn::ops::entropy_logit_grad;

/// `exp(ln π_new − ln π_old)`.
pub fn prob_ratio(log_prob_new: f64, log_prob_old: f64) -> f64 {
    (log_prob_new - log_prob_old).exp()
}

/// `min(r·A, clip(r, 1−ε, 1+ε)·A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (ratio * advantage).min(clipped * advantage)
}

/// A transition paired with its precomputed advantage and value target.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub record: &'a TransitionRecord,
    pub advantage: f64,
    pub value_target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Clipped surrogate, entropy bonus read from the buffer (no gradient).
    Eppo,
    /// Clipped surrogate, entropy bonus from the current policy.
    Ppo,
    /// `ln π(a|s)·A`, entropy bonus from the current policy.
    A2c,
}

/// Batch means of the objective and its parts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveReport {
    /// The maximized objective.
    pub objective: f64,
    /// Clipped surrogate (or `ln π·A` for A2C).
    pub surrogate: f64,
    /// Mean of `(V_target − V)²`.
    pub value_loss: f64,
    /// Entropy that entered the objective.
    pub entropy: f64,
    /// Entropy of the current policy at the batch states.
    pub live_entropy: f64,
    /// Share of samples whose surrogate gradient was cut by clipping.
    pub clip_fraction: f64,
    pub samples: usize,
}

struct Term {
    fwd: NetForward,
    d_logp: f64,
    d_value: f64,
    live_entropy_weight: f64,
}

fn evaluate(kind: ObjectiveKind, batch: &[Sample], net: &ActorCriticNet, hyper: &AgentHyper) -> Result<(ObjectiveReport, Vec<Term>)> {
    if batch.is_empty() {
        return Err(Error::Empty("objective minibatch"));
    }
    let n = batch.len() as f64;
    let mut rep = ObjectiveReport {
        samples: batch.len(),
        ..Default::default()
    };
    let mut terms = Vec::with_capacity(batch.len());
    let mut clipped = 0usize;
    for s in batch {
        let fwd = net.forward(&s.record.state)?;
        let logp = fwd.log_probs[s.record.action];
        let live = fwd.entropy();
        let (surr, d_logp) = match kind {
            ObjectiveKind::A2c => (logp * s.advantage, s.advantage),
            ObjectiveKind::Eppo | ObjectiveKind::Ppo => {
                let r = prob_ratio(logp, s.record.log_prob);
                let surr = clipped_surrogate(r, s.advantage, hyper.clip_eps);
                // gradient flows only where the unclipped term attains the min
                if r * s.advantage <= surr {
                    (surr, r * s.advantage)
                } else {
                    clipped += 1;
                    (surr, 0.0)
                }
            }
        };
        let (entropy, live_weight) = match kind {
            ObjectiveKind::Eppo => (s.record.entropy, 0.0),
            ObjectiveKind::Ppo | ObjectiveKind::A2c => (live, hyper.alpha),
        };
        let err = s.value_target - fwd.value;
        rep.surrogate += surr / n;
        rep.value_loss += err * err / n;
        rep.entropy += entropy / n;
        rep.live_entropy += live / n;
        rep.objective += (surr - hyper.vf_coef * err * err + hyper.alpha * entropy) / n;
        terms.push(Term {
            fwd,
            d_logp,
            d_value: 2.0 * hyper.vf_coef * err,
            live_entropy_weight: live_weight,
        });
    }
    rep.clip_fraction = clipped as f64 / n;
    if !rep.objective.is_finite() {
        return Err(Error::NonFinite(format!(
            "objective is {} (surrogate {}, value loss {}, entropy {})",
            rep.objective, rep.surrogate, rep.value_loss, rep.entropy
        )));
    }
    Ok((rep, terms))
}

/// Evaluates the objective without touching gradients.
pub fn evaluate_objective(kind: ObjectiveKind, batch: &[Sample], net: &ActorCriticNet, hyper: &AgentHyper) -> Result<ObjectiveReport> {
    evaluate(kind, batch, net, hyper).map(|(r, _)| r)
}

/// Evaluates the objective and accumulates the gradient of its negation
/// (the loss handed to the optimizer) into `net`.
pub fn objective_with_grad(kind: ObjectiveKind, batch: &[Sample], net: &mut ActorCriticNet, hyper: &AgentHyper) -> Result<ObjectiveReport> {
    let (rep, terms) = evaluate(kind, batch, net, hyper)?;
    let scale = -1.0 / batch.len() as f64;
    for (s, t) in batch.iter().zip(&terms) {
        let mut d_logits: Vec<f64> = t.fwd.log_probs.iter().map(|lp| -lp.exp() * t.d_logp).collect();
        d_logits[s.record.action] += t.d_logp;
        if t.live_entropy_weight != 0.0 {
            for (d, h) in d_logits.iter_mut().zip(entropy_logit_grad(&t.fwd.log_probs)) {
                *d += t.live_entropy_weight * h;
            }
        }
        d_logits.iter_mut().for_each(|d| *d *= scale);
        net.backward(&t.fwd, &d_logits, t.d_value * scale);
    }
    Ok(rep)
}

pub fn eppo_objective(batch: &[Sample], net: &mut ActorCriticNet, hyper: &AgentHyper) -> Result<ObjectiveReport> {
    objective_with_grad(ObjectiveKind::Eppo, batch, net, hyper)
}

pub fn ppo_objective(batch: &[Sample], net: &mut ActorCriticNet, hyper: &AgentHyper) -> Result<ObjectiveReport> {
    objective_with_grad(ObjectiveKind::Ppo, batch, net, hyper)
}

pub fn a2c_objective(batch: &[Sample], net: &mut ActorCriticNet, hyper: &AgentHyper) -> Result<ObjectiveReport> {
    objective_with_grad(ObjectiveKind::A2c, batch, net, hyper)
}
