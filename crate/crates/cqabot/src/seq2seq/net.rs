//! Forward pass, handwritten backward pass, SGD update, and greedy decode.
//!
//! The encoder runs an L-layer GRU over the reversed source. At every
//! decoder step the top decoder state queries additive attention over the
//! encoder's top-layer states; the context vector is concatenated with the
//! decoder state for the output projection. The loss is masked mean
//! cross-entropy over real target tokens, with teacher forcing.
//!
//! Gate equations, with σ the logistic function:
//!
//! ```text
//! z_t = σ(x_t·W_z + h_{t-1}·U_z + b_z)          update gate
//! r_t = σ(x_t·W_r + h_{t-1}·U_r + b_r)          reset gate
//! c_t = tanh(x_t·W_c + (r_t ∘ h_{t-1})·U_c + b_c)
//! h_t = h_{t-1} + z_t ∘ (c_t − h_{t-1})
//!
//! score(s, h_j) = v · tanh(s·W_q + h_j·U_k)     additive attention
//! ```

use ndarray::{concatenate, s, Array2, Axis};

use super::batch::{source_row, Batch};
use super::hyper::Hyperparams;
use super::model::{GruLayer, Seq2SeqModel};
use super::vocab::{EOS, GO};
use crate::error::{Error, Result};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Everything one GRU step needs for its backward pass.
#[derive(Debug, Clone)]
struct GruStep {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    update: Array2<f64>,
    reset: Array2<f64>,
    candidate: Array2<f64>,
    h: Array2<f64>,
}

fn gru_forward(layer: &GruLayer, x: &Array2<f64>, h_prev: &Array2<f64>) -> GruStep {
    let a_update = x.dot(&layer.w_update) + h_prev.dot(&layer.u_update) + &layer.b_update;
    let update = a_update.mapv(sigmoid);
    let a_reset = x.dot(&layer.w_reset) + h_prev.dot(&layer.u_reset) + &layer.b_reset;
    let reset = a_reset.mapv(sigmoid);
    let gated = &reset * h_prev;
    let a_cand = x.dot(&layer.w_cand) + gated.dot(&layer.u_cand) + &layer.b_cand;
    let candidate = a_cand.mapv(f64::tanh);
    let h = h_prev + &(&update * &(&candidate - h_prev));
    GruStep {
        x: x.clone(),
        h_prev: h_prev.clone(),
        update,
        reset,
        candidate,
        h,
    }
}

/// Backward through one GRU step. Accumulates parameter gradients into
/// `grad` and returns (∂loss/∂x, ∂loss/∂h_prev).
fn gru_backward(
    layer: &GruLayer,
    grad: &mut GruLayer,
    step: &GruStep,
    dh: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let d_update = dh * &(&step.candidate - &step.h_prev);
    let d_candidate = dh * &step.update;
    let mut dh_prev = dh * &step.update.mapv(|z| 1.0 - z);

    let da_cand = &d_candidate * &step.candidate.mapv(|c| 1.0 - c * c);
    let gated = &step.reset * &step.h_prev;
    grad.w_cand.scaled_add(1.0, &step.x.t().dot(&da_cand));
    grad.u_cand.scaled_add(1.0, &gated.t().dot(&da_cand));
    grad.b_cand.scaled_add(1.0, &da_cand.sum_axis(Axis(0)));
    let mut dx = da_cand.dot(&layer.w_cand.t());
    let d_gated = da_cand.dot(&layer.u_cand.t());
    let d_reset = &d_gated * &step.h_prev;
    dh_prev += &(&d_gated * &step.reset);

    let da_reset = &d_reset * &step.reset.mapv(|r| r * (1.0 - r));
    grad.w_reset.scaled_add(1.0, &step.x.t().dot(&da_reset));
    grad.u_reset.scaled_add(1.0, &step.h_prev.t().dot(&da_reset));
    grad.b_reset.scaled_add(1.0, &da_reset.sum_axis(Axis(0)));
    dx += &da_reset.dot(&layer.w_reset.t());
    dh_prev += &da_reset.dot(&layer.u_reset.t());

    let da_update = &d_update * &step.update.mapv(|z| z * (1.0 - z));
    grad.w_update.scaled_add(1.0, &step.x.t().dot(&da_update));
    grad.u_update.scaled_add(1.0, &step.h_prev.t().dot(&da_update));
    grad.b_update.scaled_add(1.0, &da_update.sum_axis(Axis(0)));
    dx += &da_update.dot(&layer.w_update.t());
    dh_prev += &da_update.dot(&layer.u_update.t());

    (dx, dh_prev)
}

fn embed_rows<'a>(
    embedding: &Array2<f64>,
    ids: impl IntoIterator<Item = &'a usize>,
) -> Array2<f64> {
    let ids: Vec<usize> = ids.into_iter().copied().collect();
    let mut out = Array2::zeros((ids.len(), embedding.ncols()));
    for (b, &id) in ids.iter().enumerate() {
        out.row_mut(b).assign(&embedding.row(id));
    }
    out
}

fn row_log_softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Activations kept by [`forward_loss`] for [`backward`].
pub struct ForwardCache {
    batch: Batch,
    enc_steps: Vec<Vec<GruStep>>,
    dec_steps: Vec<Vec<GruStep>>,
    attn_tanh: Vec<Vec<Array2<f64>>>,
    attn_weights: Vec<Array2<f64>>,
    contexts: Vec<Array2<f64>>,
    probs: Vec<Array2<f64>>,
    mask_total: f64,
}

impl ForwardCache {
    /// Attention weight matrix (batch × source positions) per decoder step.
    /// Every row is a probability distribution.
    pub fn attention_weights(&self) -> &[Array2<f64>] {
        &self.attn_weights
    }
}

fn check_ids(ids: &Array2<usize>, vocab_size: usize, what: &str) -> Result<()> {
    if let Some(&bad) = ids.iter().find(|&&id| id >= vocab_size) {
        return Err(Error::invalid(format!(
            "{what} id {bad} out of range for vocabulary of {vocab_size}"
        )));
    }
    Ok(())
}

struct EncoderRun {
    steps: Vec<Vec<GruStep>>,
    finals: Vec<Array2<f64>>,
    keys: Vec<Array2<f64>>,
}

fn run_encoder(model: &Seq2SeqModel, src: &Array2<usize>) -> EncoderRun {
    let layers = model.encoder.len();
    let batch = src.nrows();
    let hidden = model.attention.w_query.nrows();
    let mut states: Vec<Array2<f64>> = (0..layers).map(|_| Array2::zeros((batch, hidden))).collect();
    let mut steps = Vec::with_capacity(src.ncols());
    for t in 0..src.ncols() {
        let mut input = embed_rows(&model.embedding, src.column(t).iter());
        let mut per_layer = Vec::with_capacity(layers);
        for (l, layer) in model.encoder.iter().enumerate() {
            let step = gru_forward(layer, &input, &states[l]);
            states[l] = step.h.clone();
            input = step.h.clone();
            per_layer.push(step);
        }
        steps.push(per_layer);
    }
    let keys = steps
        .iter()
        .map(|per_layer| per_layer[layers - 1].h.dot(&model.attention.u_keys))
        .collect();
    EncoderRun {
        steps,
        finals: states,
        keys,
    }
}

struct AttentionStep {
    tanh: Vec<Array2<f64>>,
    weights: Array2<f64>,
    context: Array2<f64>,
}

fn run_attention(model: &Seq2SeqModel, encoder: &EncoderRun, state: &Array2<f64>) -> AttentionStep {
    let src_len = encoder.steps.len();
    let top = model.encoder.len() - 1;
    let batch = state.nrows();
    let query = state.dot(&model.attention.w_query);
    let mut tanh = Vec::with_capacity(src_len);
    let mut scores = Array2::zeros((batch, src_len));
    for j in 0..src_len {
        let q = (&query + &encoder.keys[j]).mapv(f64::tanh);
        scores.column_mut(j).assign(&q.dot(&model.attention.v_score));
        tanh.push(q);
    }
    // Row softmax.
    let mut weights = scores;
    for mut row in weights.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    let hidden = state.ncols();
    let mut context = Array2::zeros((batch, hidden));
    for j in 0..src_len {
        let col = weights.column(j);
        let h_j = &encoder.steps[j][top].h;
        for b in 0..batch {
            let w = col[b];
            for k in 0..hidden {
                context[[b, k]] += w * h_j[[b, k]];
            }
        }
    }
    AttentionStep {
        tanh,
        weights,
        context,
    }
}

/// Runs teacher-forced forward over a batch and returns the masked mean
/// cross-entropy together with the cache for [`backward`].
///
/// A non-finite loss is reported as [`Error::NonFiniteLoss`], the training
/// halt signal.
pub fn forward_loss(model: &Seq2SeqModel, batch: &Batch) -> Result<(f64, ForwardCache)> {
    let vocab_size = model.embedding.nrows();
    check_ids(&batch.src, vocab_size, "source")?;
    check_ids(&batch.tgt_input, vocab_size, "target input")?;
    check_ids(&batch.tgt_output, vocab_size, "target output")?;
    if batch.src.nrows() != batch.tgt_input.nrows() {
        return Err(Error::invalid("source and target batch sizes differ"));
    }
    let mask_total = batch.mask.sum();
    if mask_total <= 0.0 {
        return Err(Error::invalid("batch mask is all zero"));
    }

    let encoder = run_encoder(model, &batch.src);
    let layers = model.decoder.len();
    let tgt_len = batch.tgt_input.ncols();
    let batch_size = batch.tgt_input.nrows();

    let mut states = encoder.finals.clone();
    let mut dec_steps = Vec::with_capacity(tgt_len);
    let mut attn_tanh = Vec::with_capacity(tgt_len);
    let mut attn_weights = Vec::with_capacity(tgt_len);
    let mut contexts = Vec::with_capacity(tgt_len);
    let mut probs = Vec::with_capacity(tgt_len);
    let mut loss_sum = 0.0;

    for t in 0..tgt_len {
        let mut input = embed_rows(&model.embedding, batch.tgt_input.column(t).iter());
        let mut per_layer = Vec::with_capacity(layers);
        for (l, layer) in model.decoder.iter().enumerate() {
            let step = gru_forward(layer, &input, &states[l]);
            states[l] = step.h.clone();
            input = step.h.clone();
            per_layer.push(step);
        }
        let state = &per_layer[layers - 1].h;
        let attn = run_attention(model, &encoder, state);
        let cat = concatenate(Axis(1), &[state.view(), attn.context.view()])
            .expect("state and context share the batch dimension");
        let logits = cat.dot(&model.out_weight) + &model.out_bias;
        let logp = row_log_softmax(&logits);
        for b in 0..batch_size {
            let m = batch.mask[[b, t]];
            if m > 0.0 {
                loss_sum += m * -logp[[b, batch.tgt_output[[b, t]]]];
            }
        }
        probs.push(logp.mapv(f64::exp));
        dec_steps.push(per_layer);
        attn_tanh.push(attn.tanh);
        attn_weights.push(attn.weights);
        contexts.push(attn.context);
    }

    let loss = loss_sum / mask_total;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok((
        loss,
        ForwardCache {
            batch: batch.clone(),
            enc_steps: encoder.steps,
            dec_steps,
            attn_tanh,
            attn_weights,
            contexts,
            probs,
            mask_total,
        },
    ))
}

/// Exact analytic gradient of the masked mean cross-entropy with respect to
/// every parameter, via backpropagation through time.
pub fn backward(model: &Seq2SeqModel, cache: &ForwardCache) -> Seq2SeqModel {
    let mut grads = model.zeros_like();
    let batch = &cache.batch;
    let layers = model.decoder.len();
    let top = layers - 1;
    let hidden = model.attention.w_query.nrows();
    let batch_size = batch.src.nrows();
    let src_len = batch.src.ncols();
    let tgt_len = batch.tgt_input.ncols();

    let mut carry: Vec<Array2<f64>> = (0..layers)
        .map(|_| Array2::zeros((batch_size, hidden)))
        .collect();
    let mut d_enc_top: Vec<Array2<f64>> = (0..src_len)
        .map(|_| Array2::zeros((batch_size, hidden)))
        .collect();

    for t in (0..tgt_len).rev() {
        // Output projection.
        let mut dlogits = cache.probs[t].clone();
        for b in 0..batch_size {
            dlogits[[b, batch.tgt_output[[b, t]]]] -= 1.0;
            let scale = batch.mask[[b, t]] / cache.mask_total;
            dlogits.row_mut(b).mapv_inplace(|v| v * scale);
        }
        let state = &cache.dec_steps[t][top].h;
        let cat = concatenate(Axis(1), &[state.view(), cache.contexts[t].view()])
            .expect("state and context share the batch dimension");
        grads.out_weight.scaled_add(1.0, &cat.t().dot(&dlogits));
        grads.out_bias.scaled_add(1.0, &dlogits.sum_axis(Axis(0)));
        let dcat = dlogits.dot(&model.out_weight.t());
        let mut d_state = dcat.slice(s![.., 0..hidden]).to_owned();
        let d_context = dcat.slice(s![.., hidden..2 * hidden]).to_owned();

        // Attention: context = Σ_j α_j ∘ h_j.
        let alpha = &cache.attn_weights[t];
        let mut d_alpha = Array2::zeros((batch_size, src_len));
        for j in 0..src_len {
            let h_j = &cache.enc_steps[j][top].h;
            for b in 0..batch_size {
                let w = alpha[[b, j]];
                let mut dot = 0.0;
                for k in 0..hidden {
                    d_enc_top[j][[b, k]] += w * d_context[[b, k]];
                    dot += d_context[[b, k]] * h_j[[b, k]];
                }
                d_alpha[[b, j]] = dot;
            }
        }
        // Softmax backward.
        let row_dot = (alpha * &d_alpha).sum_axis(Axis(1));
        let mut d_scores = alpha.clone();
        for b in 0..batch_size {
            for j in 0..src_len {
                d_scores[[b, j]] *= d_alpha[[b, j]] - row_dot[b];
            }
        }
        // Scores: e_j = tanh(s·W_q + h_j·U_k) · v.
        let mut d_query_total: Array2<f64> = Array2::zeros((batch_size, hidden));
        #[allow(clippy::needless_range_loop)] // j indexes three parallel caches
        for j in 0..src_len {
            let q = &cache.attn_tanh[t][j];
            let de_j = d_scores.column(j);
            let mut da = Array2::zeros((batch_size, hidden));
            for b in 0..batch_size {
                for k in 0..hidden {
                    let dq = de_j[b] * model.attention.v_score[k];
                    grads.attention.v_score[k] += de_j[b] * q[[b, k]];
                    da[[b, k]] = dq * (1.0 - q[[b, k]] * q[[b, k]]);
                }
            }
            d_query_total += &da;
            grads
                .attention
                .u_keys
                .scaled_add(1.0, &cache.enc_steps[j][top].h.t().dot(&da));
            d_enc_top[j] += &da.dot(&model.attention.u_keys.t());
        }
        grads
            .attention
            .w_query
            .scaled_add(1.0, &state.t().dot(&d_query_total));
        d_state += &d_query_total.dot(&model.attention.w_query.t());

        // GRU stack, top to bottom.
        let mut dh = d_state + &carry[top];
        for l in (0..layers).rev() {
            let (dx, dh_prev) =
                gru_backward(&model.decoder[l], &mut grads.decoder[l], &cache.dec_steps[t][l], &dh);
            carry[l] = dh_prev;
            if l > 0 {
                dh = dx + &carry[l - 1];
            } else {
                for b in 0..batch_size {
                    let id = batch.tgt_input[[b, t]];
                    grads.embedding.row_mut(id).scaled_add(1.0, &dx.row(b));
                }
            }
        }
    }

    // The decoder's initial states are the encoder finals, layer by layer.
    let mut enc_carry = carry;
    for t in (0..src_len).rev() {
        let mut dh = enc_carry[top].clone() + &d_enc_top[t];
        for l in (0..layers).rev() {
            let (dx, dh_prev) =
                gru_backward(&model.encoder[l], &mut grads.encoder[l], &cache.enc_steps[t][l], &dh);
            enc_carry[l] = dh_prev;
            if l > 0 {
                dh = dx + &enc_carry[l - 1];
            } else {
                for b in 0..batch_size {
                    let id = batch.src[[b, t]];
                    grads.embedding.row_mut(id).scaled_add(1.0, &dx.row(b));
                }
            }
        }
    }

    grads
}

/// Clips gradients by global norm, then applies `θ ← θ − η·grad`.
pub fn sgd_step(model: &mut Seq2SeqModel, grads: &Seq2SeqModel, hp: &Hyperparams) {
    let norm = grads.global_norm();
    let scale = if norm > hp.clip_norm {
        hp.clip_norm / norm
    } else {
        1.0
    };
    model.axpy(-hp.learning_rate * scale, grads);
}

/// Greedy decoding: encode the reversed, bucketed source, then emit the
/// argmax token step by step (PAD and GO excluded, ties to the lowest id)
/// until EOS or `max_len`. EOS is not part of the output.
pub fn greedy_decode(
    model: &Seq2SeqModel,
    src: &[usize],
    max_len: usize,
    hp: &Hyperparams,
) -> Vec<usize> {
    let src_cap = hp
        .buckets
        .iter()
        .map(|b| b.0)
        .find(|&s| s >= src.len())
        .unwrap_or_else(|| hp.buckets.last().expect("validated buckets").0);
    let row = source_row(src, src_cap);
    let src_ids = Array2::from_shape_vec((1, src_cap), row).expect("row matches shape");

    let encoder = run_encoder(model, &src_ids);
    let mut states = encoder.finals.clone();
    let vocab_size = model.embedding.nrows();
    let mut prev = GO;
    let mut out = Vec::new();
    for _ in 0..max_len {
        let mut input = embed_rows(&model.embedding, [prev].iter());
        for (l, layer) in model.decoder.iter().enumerate() {
            let step = gru_forward(layer, &input, &states[l]);
            states[l] = step.h.clone();
            input = step.h.clone();
        }
        let state = states.last().expect("at least one layer");
        let attn = run_attention(model, &encoder, state);
        let cat = concatenate(Axis(1), &[state.view(), attn.context.view()])
            .expect("state and context share the batch dimension");
        let logits = cat.dot(&model.out_weight) + &model.out_bias;
        let mut best = EOS;
        let mut best_score = f64::NEG_INFINITY;
        for id in EOS..vocab_size {
            let score = logits[[0, id]];
            if score > best_score {
                best = id;
                best_score = score;
            }
        }
        if best == EOS {
            break;
        }
        out.push(best);
        prev = best;
    }
    out
}
