use crate::error::{Error, Result};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::dense::{Dense, DenseCache};
use crate::nn::ops::{entropy_from_log_probs, log_softmax, Activation};
use crate::nn::tensor::{ParamTensor, Parameterized};
use crate::nn::RngStream;

pub const DEFAULT_HIDDEN: usize = 64;

/// Shared-trunk actor-critic: `J → hidden → hidden` (tanh), then a softmax
/// policy head over `J` exercises and a scalar value head.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCriticNet {
    pub trunk: [Dense; 2],
    pub policy_head: Dense,
    pub value_head: Dense,
}

/// One forward pass, with everything the reverse pass needs.
#[derive(Debug, Clone)]
pub struct NetForward {
    pub log_probs: Vec<f64>,
    pub value: f64,
    trunk: [DenseCache; 2],
    policy: DenseCache,
    value_cache: DenseCache,
}

impl NetForward {
    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|lp| lp.exp()).collect()
    }

    pub fn entropy(&self) -> f64 {
        entropy_from_log_probs(&self.log_probs)
    }

    pub fn logits(&self) -> &[f64] {
        &self.policy.output
    }
}

/// Sampled action with the quantities recorded alongside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActOutcome {
    pub action: usize,
    pub log_prob: f64,
    pub entropy: f64,
    pub value: f64,
}

impl ActorCriticNet {
    pub fn new(action_count: usize, hidden: usize, rng: &mut RngStream) -> Result<Self> {
        if action_count == 0 || hidden == 0 {
            return Err(Error::Config("network needs at least one action and one hidden unit".into()));
        }
        Ok(Self {
            trunk: [
                Dense::new("trunk0", action_count, hidden, Activation::Tanh, rng),
                Dense::new("trunk1", hidden, hidden, Activation::Tanh, rng),
            ],
            policy_head: Dense::new("policy", hidden, action_count, Activation::Identity, rng),
            value_head: Dense::new("value", hidden, 1, Activation::Identity, rng),
        })
    }

    pub fn action_count(&self) -> usize {
        self.policy_head.out_dim()
    }

    pub fn hidden(&self) -> usize {
        self.trunk[0].out_dim()
    }

    pub fn forward(&self, state: &[f64]) -> Result<NetForward> {
        if state.len() != self.action_count() {
            return Err(Error::shape("ActorCriticNet::forward", self.action_count(), state.len()));
        }
        let t0 = self.trunk[0].forward(state)?;
        let t1 = self.trunk[1].forward(&t0.output)?;
        let policy = self.policy_head.forward(&t1.output)?;
        let value_cache = self.value_head.forward(&t1.output)?;
        Ok(NetForward {
            log_probs: log_softmax(&policy.output),
            value: value_cache.output[0],
            trunk: [t0, t1],
            policy,
            value_cache,
        })
    }

    /// Accumulates parameter gradients given `dL/d logits` and `dL/d value`.
    pub fn backward(&mut self, fwd: &NetForward, d_logits: &[f64], d_value: f64) {
        let mut d_hidden = self.policy_head.backward(&fwd.policy, d_logits);
        let dv = self.value_head.backward(&fwd.value_cache, &[d_value]);
        for (a, b) in d_hidden.iter_mut().zip(dv) {
            *a += b;
        }
        let d0 = self.trunk[1].backward(&fwd.trunk[1], &d_hidden);
        self.trunk[0].backward(&fwd.trunk[0], &d0);
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new();
        c.set_meta("kind", "actor-critic");
        c.set_meta("action_count", self.action_count());
        c.set_meta("hidden", self.hidden());
        c.push_params("net.", self);
        c
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let j: usize = ckpt.meta_parse("action_count")?;
        let hidden: usize = ckpt.meta_parse("hidden")?;
        let mut net = Self::new(j, hidden, &mut RngStream::new(0, 0))?;
        ckpt.load_params("net.", &mut net)?;
        Ok(net)
    }
}

impl Parameterized for ActorCriticNet {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut v = Vec::with_capacity(8);
        for layer in self.trunk.iter().chain([&self.policy_head, &self.value_head]) {
            v.push(&layer.weight);
            v.push(&layer.bias);
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let [t0, t1] = &mut self.trunk;
        let mut v = Vec::with_capacity(8);
        for layer in [t0, t1, &mut self.policy_head, &mut self.value_head] {
            v.push(&mut layer.weight);
            v.push(&mut layer.bias);
        }
        v
    }
}

/// Samples an action from the policy at `state`. All four returned values
/// come from the same forward pass.
pub fn act(net: &ActorCriticNet, state: &[f64], rng: &mut RngStream) -> Result<ActOutcome> {
    let fwd = net.forward(state)?;
    let action = rng.categorical(&fwd.probs());
    Ok(ActOutcome {
        action,
        log_prob: fwd.log_probs[action],
        entropy: fwd.entropy(),
        value: fwd.value,
    })
}

/// Highest-probability action.
pub fn act_greedy(net: &ActorCriticNet, state: &[f64]) -> Result<ActOutcome> {
    let fwd = net.forward(state)?;
    let action = fwd
        .log_probs
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &lp)| if lp > best.1 { (i, lp) } else { best })
        .0;
    Ok(ActOutcome {
        action,
        log_prob: fwd.log_probs[action],
        entropy: fwd.entropy(),
        value: fwd.value,
    })
}
