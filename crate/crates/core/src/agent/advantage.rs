use super::buffer::TransitionRecord;

pub const NORMALIZE_EPS: f64 = 1e-8;

/// Discounted Monte Carlo returns `G_t = Σ_{t'≥t} γ^{t'−t} r_{t'}`, computed
/// backwards. A truncated episode's return is the observed partial sum.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// `A_t = G_t − V(s_t)` with `V` taken from collection time.
pub fn discounted_advantages(episode: &[TransitionRecord], gamma: f64) -> Vec<f64> {
    let rewards: Vec<f64> = episode.iter().map(|t| t.reward).collect();
    discounted_returns(&rewards, gamma)
        .into_iter()
        .zip(episode)
        .map(|(g, t)| g - t.value)
        .collect()
}

/// Shifts and scales to zero mean and unit variance (population variance,
/// `eps` added to the standard deviation).
pub fn normalize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + NORMALIZE_EPS;
    for v in values.iter_mut() {
        *v = (*v - mean) / std;
    }
}
