//! Attentive knowledge tracing, reduced to one causal self-attention encoder
//! over interaction embeddings and one cross-attention retriever queried per
//! exercise.
//!
//! History row 0 is a learnable start token, so an empty log still has a
//! well-defined prediction. Row `i > 0` embeds interaction `i` as
//! `exercise_emb[e] + response_emb[c]`. The encoder output is
//! `H = H1 + FF(H1)` with `H1 = X + SelfAttn(X)`. A query for exercise `q`
//! attends over `H` and the concatenation `[context; exercise_emb[q]]` goes
//! through a two-layer head to a single logit.

use rand::Rng;

use crate::error::{Error, Result};
use crate::knowledge::{ExerciseCatalog, Interaction, InteractionLog, KnowledgeState};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::dense::{Dense, DenseCache};
use crate::nn::ops::{attention, attention_backward, bce_logit_grad, bce_with_logit, sigmoid, Activation, AttentionCache};
use crate::nn::tensor::{Mat, ParamTensor, Parameterized};
use crate::nn::{Adam, AdamHyper, RngStream};

/// Maximum number of past interactions the model looks at.
pub const HISTORY_WINDOW: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct AktLiteModel {
    width: usize,
    pub exercise_emb: ParamTensor,
    pub response_emb: ParamTensor,
    pub start_token: ParamTensor,
    pub enc_query: ParamTensor,
    pub enc_key: ParamTensor,
    pub enc_value: ParamTensor,
    pub ff_hidden: Dense,
    pub ff_out: Dense,
    pub ret_query: ParamTensor,
    pub ret_key: ParamTensor,
    pub ret_value: ParamTensor,
    pub head_hidden: Dense,
    pub head_out: Dense,
}

fn uniform_tensor<R: Rng + ?Sized>(name: &str, shape: &[usize], limit: f64, rng: &mut R) -> ParamTensor {
    let n = shape.iter().product();
    let values = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
    ParamTensor::from_values(name, shape, values).expect("finite init")
}

fn square_glorot<R: Rng + ?Sized>(name: &str, d: usize, rng: &mut R) -> ParamTensor {
    uniform_tensor(name, &[d, d], (3.0 / d as f64).sqrt(), rng)
}

/// Forward intermediates of the encoder.
struct Encoded {
    x: Mat,
    q: Mat,
    k: Mat,
    v: Mat,
    attn: AttentionCache,
    h1: Mat,
    ff_hidden: Vec<DenseCache>,
    ff_out: Vec<DenseCache>,
    h: Mat,
}

/// Forward intermediates of the retriever and head.
struct Retrieved {
    queries: Vec<usize>,
    eq: Mat,
    q: Mat,
    k: Mat,
    v: Mat,
    attn: AttentionCache,
    head_hidden: Vec<DenseCache>,
    head_out: Vec<DenseCache>,
    logits: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AktTrainHyper {
    pub lr: f64,
    pub epochs: usize,
    /// Logs per gradient step.
    pub batch: usize,
}

impl Default for AktTrainHyper {
    fn default() -> Self {
        Self {
            lr: 3e-3,
            epochs: 30,
            batch: 16,
        }
    }
}

impl AktLiteModel {
    pub fn new(exercise_count: usize, width: usize, rng: &mut RngStream) -> Result<Self> {
        if exercise_count == 0 || width == 0 {
            return Err(Error::Config("akt-lite needs at least one exercise and width >= 1".into()));
        }
        let d = width;
        let emb_limit = (3.0 / d as f64).sqrt();
        Ok(Self {
            width,
            exercise_emb: uniform_tensor("exercise_emb", &[exercise_count, d], emb_limit, rng),
            response_emb: uniform_tensor("response_emb", &[2, d], emb_limit, rng),
            start_token: uniform_tensor("start_token", &[1, d], emb_limit, rng),
            enc_query: square_glorot("enc_query", d, rng),
            enc_key: square_glorot("enc_key", d, rng),
            enc_value: square_glorot("enc_value", d, rng),
            ff_hidden: Dense::new("ff_hidden", d, d, Activation::Tanh, rng),
            ff_out: Dense::new("ff_out", d, d, Activation::Identity, rng),
            ret_query: square_glorot("ret_query", d, rng),
            ret_key: square_glorot("ret_key", d, rng),
            ret_value: square_glorot("ret_value", d, rng),
            head_hidden: Dense::new("head_hidden", 2 * d, d, Activation::Tanh, rng),
            head_out: Dense::new("head_out", d, 1, Activation::Identity, rng),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn exercise_count(&self) -> usize {
        self.exercise_emb.shape()[0]
    }

    fn scale(&self) -> f64 {
        1.0 / (self.width as f64).sqrt()
    }

    fn check_entries(&self, entries: &[Interaction]) -> Result<()> {
        let j = self.exercise_count();
        match entries.iter().find(|e| e.exercise >= j) {
            Some(bad) => Err(Error::InvalidAction {
                action: bad.exercise,
                count: j,
            }),
            None => Ok(()),
        }
    }

    fn encode(&self, history: &[Interaction]) -> Result<Encoded> {
        let d = self.width;
        let mut x = Mat::zeros(history.len() + 1, d);
        x.row_mut(0).copy_from_slice(self.start_token.row(0));
        for (i, e) in history.iter().enumerate() {
            let row = x.row_mut(i + 1);
            let ex = self.exercise_emb.row(e.exercise);
            let rs = self.response_emb.row(e.correct as usize);
            for c in 0..d {
                row[c] = ex[c] + rs[c];
            }
        }
        let q = x.matmul(&self.enc_query.to_mat())?;
        let k = x.matmul(&self.enc_key.to_mat())?;
        let v = x.matmul(&self.enc_value.to_mat())?;
        let (a, attn) = attention(&q, &k, &v, self.scale(), true)?;
        let mut h1 = x.clone();
        h1.add_assign(&a);
        let (hidden, ff_hidden) = self.ff_hidden.forward_rows(&h1)?;
        let (f, ff_out) = self.ff_out.forward_rows(&hidden)?;
        let mut h = h1.clone();
        h.add_assign(&f);
        Ok(Encoded {
            x,
            q,
            k,
            v,
            attn,
            h1,
            ff_hidden,
            ff_out,
            h,
        })
    }

    fn retrieve(&self, enc: &Encoded, queries: Vec<usize>, causal: bool) -> Result<Retrieved> {
        let d = self.width;
        let mut eq = Mat::zeros(queries.len(), d);
        for (i, &e) in queries.iter().enumerate() {
            eq.row_mut(i).copy_from_slice(self.exercise_emb.row(e));
        }
        let q = eq.matmul(&self.ret_query.to_mat())?;
        let k = enc.h.matmul(&self.ret_key.to_mat())?;
        let v = enc.h.matmul(&self.ret_value.to_mat())?;
        let (ctx, attn) = attention(&q, &k, &v, self.scale(), causal)?;
        let mut head_hidden = Vec::with_capacity(queries.len());
        let mut head_out = Vec::with_capacity(queries.len());
        let mut logits = Vec::with_capacity(queries.len());
        let mut z = vec![0.0; 2 * d];
        for i in 0..queries.len() {
            z[..d].copy_from_slice(ctx.row(i));
            z[d..].copy_from_slice(eq.row(i));
            let hc = self.head_hidden.forward(&z)?;
            let oc = self.head_out.forward(&hc.output)?;
            logits.push(oc.output[0]);
            head_hidden.push(hc);
            head_out.push(oc);
        }
        Ok(Retrieved {
            queries,
            eq,
            q,
            k,
            v,
            attn,
            head_hidden,
            head_out,
            logits,
        })
    }

    /// Logits for predicting each entry of `entries` from the entries before
    /// it: position `t` attends over the start token and entries `< t`.
    fn next_logits(&self, entries: &[Interaction]) -> Result<(Encoded, Retrieved)> {
        let n = entries.len();
        let enc = self.encode(&entries[..n.saturating_sub(1)])?;
        let queries = entries.iter().map(|e| e.exercise).collect();
        let ret = self.retrieve(&enc, queries, true)?;
        Ok((enc, ret))
    }

    /// Knowledge state after `log`: the probability of answering each
    /// catalog exercise correctly given the most recent `HISTORY_WINDOW`
    /// interactions.
    pub fn predict_state(&self, log: &InteractionLog) -> Result<KnowledgeState> {
        let history = log.tail(HISTORY_WINDOW);
        self.check_entries(history)?;
        let enc = self.encode(history)?;
        let ret = self.retrieve(&enc, (0..self.exercise_count()).collect(), false)?;
        KnowledgeState::from_probs(ret.logits.iter().map(|&l| sigmoid(l)).collect())
    }

    /// Predicted probability of a correct response at every position of
    /// `entries`, each conditioned only on earlier entries.
    pub fn predict_next(&self, entries: &[Interaction]) -> Result<Vec<f64>> {
        if entries.is_empty() {
            return Ok(Vec::new());
        }
        self.check_entries(entries)?;
        let mut out = Vec::with_capacity(entries.len());
        for chunk in entries.chunks(HISTORY_WINDOW + 1) {
            let (_, ret) = self.next_logits(chunk)?;
            out.extend(ret.logits.iter().map(|&l| sigmoid(l)));
        }
        Ok(out)
    }

    /// Mean next-response binary cross-entropy over every position of every
    /// sequence.
    pub fn loss(&self, sequences: &[&[Interaction]]) -> Result<f64> {
        let mut total = 0.0;
        let mut count = 0usize;
        for seq in sequences {
            for chunk in seq.chunks(HISTORY_WINDOW + 1) {
                let (_, ret) = self.next_logits(chunk)?;
                for (l, e) in ret.logits.iter().zip(chunk.iter()) {
                    total += bce_with_logit(*l, e.correct);
                }
                count += chunk.len();
            }
        }
        if count == 0 {
            return Err(Error::Empty("akt training sequences"));
        }
        Ok(total / count as f64)
    }

    /// Same as [`loss`](Self::loss) and accumulates its gradient into the
    /// parameters' `grad` buffers.
    pub fn loss_and_grad(&mut self, sequences: &[&[Interaction]]) -> Result<f64> {
        let count: usize = sequences.iter().map(|s| s.len()).sum();
        if count == 0 {
            return Err(Error::Empty("akt training sequences"));
        }
        let inv = 1.0 / count as f64;
        let mut total = 0.0;
        for seq in sequences {
            self.check_entries(seq)?;
            for chunk in seq.chunks(HISTORY_WINDOW + 1) {
                let (enc, ret) = self.next_logits(chunk)?;
                let mut dlogits = Vec::with_capacity(chunk.len());
                for (l, e) in ret.logits.iter().zip(chunk.iter()) {
                    total += bce_with_logit(*l, e.correct);
                    dlogits.push(bce_logit_grad(*l, e.correct) * inv);
                }
                let history = &chunk[..chunk.len() - 1];
                self.backward(history, &enc, &ret, &dlogits)?;
            }
        }
        Ok(total * inv)
    }

    fn backward(&mut self, history: &[Interaction], enc: &Encoded, ret: &Retrieved, dlogits: &[f64]) -> Result<()> {
        let d = self.width;
        let scale = self.scale();

        // head
        let mut d_ctx = Mat::zeros(ret.queries.len(), d);
        let mut d_eq = Mat::zeros(ret.queries.len(), d);
        for i in 0..ret.queries.len() {
            let dh = self.head_out.backward(&ret.head_out[i], &[dlogits[i]]);
            let dz = self.head_hidden.backward(&ret.head_hidden[i], &dh);
            d_ctx.row_mut(i).copy_from_slice(&dz[..d]);
            d_eq.row_mut(i).copy_from_slice(&dz[d..]);
        }

        // retriever
        let g = attention_backward(&ret.q, &ret.k, &ret.v, &ret.attn, scale, &d_ctx)?;
        accumulate(&mut self.ret_query.grad, &ret.eq.t_matmul(&g.queries)?);
        d_eq.add_assign(&g.queries.matmul_t(&self.ret_query.to_mat())?);
        accumulate(&mut self.ret_key.grad, &enc.h.t_matmul(&g.keys)?);
        accumulate(&mut self.ret_value.grad, &enc.h.t_matmul(&g.values)?);
        let mut d_h = g.keys.matmul_t(&self.ret_key.to_mat())?;
        d_h.add_assign(&g.values.matmul_t(&self.ret_value.to_mat())?);
        for (i, &e) in ret.queries.iter().enumerate() {
            let row = self.exercise_emb.grad_row_mut(e);
            for (r, g) in row.iter_mut().zip(d_eq.row(i)) {
                *r += g;
            }
        }

        // feed-forward residual
        let d_hidden = self.ff_out.backward_rows(&enc.ff_out, &d_h);
        let mut d_h1 = self.ff_hidden.backward_rows(&enc.ff_hidden, &d_hidden);
        d_h1.add_assign(&d_h);

        // self-attention residual
        let g = attention_backward(&enc.q, &enc.k, &enc.v, &enc.attn, scale, &d_h1)?;
        accumulate(&mut self.enc_query.grad, &enc.x.t_matmul(&g.queries)?);
        accumulate(&mut self.enc_key.grad, &enc.x.t_matmul(&g.keys)?);
        accumulate(&mut self.enc_value.grad, &enc.x.t_matmul(&g.values)?);
        let mut d_x = d_h1;
        d_x.add_assign(&g.queries.matmul_t(&self.enc_query.to_mat())?);
        d_x.add_assign(&g.keys.matmul_t(&self.enc_key.to_mat())?);
        d_x.add_assign(&g.values.matmul_t(&self.enc_value.to_mat())?);

        // embeddings
        debug_assert_eq!(enc.h1.rows, history.len() + 1);
        for (s, g) in self.start_token.grad.iter_mut().zip(d_x.row(0)) {
            *s += g;
        }
        for (i, e) in history.iter().enumerate() {
            let g = d_x.row(i + 1);
            for (s, gi) in self.exercise_emb.grad_row_mut(e.exercise).iter_mut().zip(g) {
                *s += gi;
            }
            for (s, gi) in self.response_emb.grad_row_mut(e.correct as usize).iter_mut().zip(g) {
                *s += gi;
            }
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new();
        c.set_meta("kind", "akt-lite");
        c.set_meta("exercise_count", self.exercise_count());
        c.set_meta("width", self.width);
        c.push_params("", self);
        c
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.meta("kind")? != "akt-lite" {
            return Err(Error::Checkpoint(format!("expected an akt-lite checkpoint, found `{}`", ckpt.meta("kind")?)));
        }
        let j: usize = ckpt.meta_parse("exercise_count")?;
        let d: usize = ckpt.meta_parse("width")?;
        let mut model = Self::new(j, d, &mut RngStream::new(0, 0))?;
        ckpt.load_params("", &mut model)?;
        Ok(model)
    }

    /// Fails when the model was trained for a different number of exercises.
    pub fn check_catalog(&self, catalog: &ExerciseCatalog) -> Result<()> {
        if self.exercise_count() != catalog.len() {
            return Err(Error::Config(format!(
                "akt-lite model covers {} exercises but the catalog has {}",
                self.exercise_count(),
                catalog.len()
            )));
        }
        Ok(())
    }
}

fn accumulate(grad: &mut [f64], m: &Mat) {
    for (g, v) in grad.iter_mut().zip(&m.data) {
        *g += v;
    }
}

impl Parameterized for AktLiteModel {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![
            &self.exercise_emb,
            &self.response_emb,
            &self.start_token,
            &self.enc_query,
            &self.enc_key,
            &self.enc_value,
            &self.ff_hidden.weight,
            &self.ff_hidden.bias,
            &self.ff_out.weight,
            &self.ff_out.bias,
            &self.ret_query,
            &self.ret_key,
            &self.ret_value,
            &self.head_hidden.weight,
            &self.head_hidden.bias,
            &self.head_out.weight,
            &self.head_out.bias,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![
            &mut self.exercise_emb,
            &mut self.response_emb,
            &mut self.start_token,
            &mut self.enc_query,
            &mut self.enc_key,
            &mut self.enc_value,
            &mut self.ff_hidden.weight,
            &mut self.ff_hidden.bias,
            &mut self.ff_out.weight,
            &mut self.ff_out.bias,
            &mut self.ret_query,
            &mut self.ret_key,
            &mut self.ret_value,
            &mut self.head_hidden.weight,
            &mut self.head_hidden.bias,
            &mut self.head_out.weight,
            &mut self.head_out.bias,
        ]
    }
}

/// Trains by minibatch Adam on next-response cross-entropy. Returns the loss
/// curve: the full-data loss before training followed by one entry per epoch.
pub fn train_akt(model: &mut AktLiteModel, logs: &[InteractionLog], hyper: AktTrainHyper, rng: &mut RngStream) -> Result<Vec<f64>> {
    if logs.is_empty() {
        return Err(Error::Config("train_akt needs at least one log".into()));
    }
    if hyper.batch == 0 {
        return Err(Error::Config("akt batch size must be positive".into()));
    }
    if let Some(i) = logs.iter().position(InteractionLog::is_empty) {
        return Err(Error::Config(format!("log {i} is empty")));
    }
    let all: Vec<&[Interaction]> = logs.iter().map(InteractionLog::entries).collect();
    let mut curve = vec![model.loss(&all)?];
    let mut adam = Adam::new(AdamHyper::with_lr(hyper.lr));
    let mut order: Vec<usize> = (0..logs.len()).collect();
    model.zero_grads();
    for epoch in 0..hyper.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(hyper.batch) {
            let seqs: Vec<&[Interaction]> = batch.iter().map(|&i| all[i]).collect();
            model.loss_and_grad(&seqs)?;
            adam.step(&mut model.params_mut())?;
        }
        let loss = model.loss(&all)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("akt loss at epoch {epoch}")));
        }
        curve.push(loss);
    }
    Ok(curve)
}

/// Next-response accuracy of a model against the constant majority-class
/// predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyReport {
    pub accuracy: f64,
    /// Accuracy of always predicting `majority`.
    pub baseline: f64,
    pub majority: bool,
    pub positions: usize,
}

/// The more frequent response over every entry of `logs`; ties go to correct.
pub fn majority_response(logs: &[InteractionLog]) -> bool {
    let (correct, total) = logs
        .iter()
        .flat_map(InteractionLog::entries)
        .fold((0usize, 0usize), |(c, t), e| (c + e.correct as usize, t + 1));
    2 * correct >= total
}

/// Scores next-response predictions (threshold 0.5) on `held_out`; the
/// majority class is taken from `train`, never from the held-out logs.
pub fn next_response_accuracy(model: &AktLiteModel, train: &[InteractionLog], held_out: &[InteractionLog]) -> Result<AccuracyReport> {
    let majority = majority_response(train);
    let mut hits = 0usize;
    let mut baseline_hits = 0usize;
    let mut positions = 0usize;
    for log in held_out {
        let probs = model.predict_next(log.entries())?;
        for (p, e) in probs.iter().zip(log.entries()) {
            hits += ((*p >= 0.5) == e.correct) as usize;
            baseline_hits += (majority == e.correct) as usize;
            positions += 1;
        }
    }
    if positions == 0 {
        return Err(Error::Empty("held-out logs"));
    }
    Ok(AccuracyReport {
        accuracy: hits as f64 / positions as f64,
        baseline: baseline_hits as f64 / positions as f64,
        majority,
        positions,
    })
}
