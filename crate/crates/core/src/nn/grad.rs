//! Mean-squared-error loss under teacher forcing and its exact gradient by
//! backpropagation through the decoder, the encoder-decoder seam and the
//! encoder.

use rayon::prelude::*;

use super::linalg::axpy;
use super::lstm::{step_backward, step_cached, LstmState, StepCache};
use super::model::{Gradients, Seq2SeqModel};
use crate::error::{Error, Result};

/// One training pair: `(signal, b_true)`.
pub type Sample<'a> = (&'a [f64], &'a [f64]);

struct RecordCache {
    encoder: Vec<StepCache>,
    decoder: Vec<StepCache>,
    /// Decoder hidden states fed to the read-out.
    hidden: Vec<Vec<f64>>,
    /// `B_est - B_true` per step.
    residuals: Vec<f64>,
}

pub struct ForwardCache {
    records: Vec<RecordCache>,
    /// `1 / (M N_T)`
    norm: f64,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.records.len()
    }

    /// Teacher-forced predictions of record `i`.
    pub fn predictions(&self, i: usize, targets: &[f64]) -> Vec<f64> {
        self.records[i]
            .residuals
            .iter()
            .zip(targets)
            .map(|(r, b)| r + b)
            .collect()
    }
}

fn forward_record(model: &Seq2SeqModel, signal: &[f64], target: &[f64]) -> (f64, RecordCache) {
    let m = model.hidden();
    let mut state = LstmState::zeros(m);
    let mut encoder = Vec::with_capacity(signal.len());
    for &x in signal {
        let (next, cache) = step_cached(&model.encoder, model.encoder_input(x), &state);
        encoder.push(cache);
        state = next;
    }

    let mut decoder = Vec::with_capacity(target.len());
    let mut hidden = Vec::with_capacity(target.len());
    let mut residuals = Vec::with_capacity(target.len());
    let mut sse = 0.0;
    let mut input = 0.0;
    for &b in target {
        let (next, cache) = step_cached(&model.decoder, input, &state);
        decoder.push(cache);
        let resid = model.dense_out(&next.h) - b;
        sse += resid * resid;
        residuals.push(resid);
        hidden.push(next.h.clone());
        state = next;
        input = b;
    }
    (
        sse,
        RecordCache {
            encoder,
            decoder,
            hidden,
            residuals,
        },
    )
}

fn check_batch(batch: &[Sample]) -> Result<usize> {
    let Some(first) = batch.first() else {
        return Err(Error::InvalidParams("batch must be non-empty".into()));
    };
    let n = first.1.len();
    if n == 0 {
        return Err(Error::InvalidParams("sequences must be non-empty".into()));
    }
    for (signal, target) in batch {
        for len in [signal.len(), target.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
    }
    Ok(n)
}

/// `L = (1 / (M N_T)) sum_i sum_t (B_true - B_est)^2` with teacher-forced
/// decoding. Records are processed in parallel and summed in batch order.
pub fn forward_loss(model: &Seq2SeqModel, batch: &[Sample]) -> Result<(f64, ForwardCache)> {
    let n = check_batch(batch)?;
    let results: Vec<(f64, RecordCache)> = batch
        .par_iter()
        .map(|(signal, target)| forward_record(model, signal, target))
        .collect();
    let norm = 1.0 / (batch.len() * n) as f64;
    let mut sse = 0.0;
    let mut records = Vec::with_capacity(results.len());
    for (s, cache) in results {
        sse += s;
        records.push(cache);
    }
    Ok((sse * norm, ForwardCache { records, norm }))
}

fn backward_record(model: &Seq2SeqModel, rec: &RecordCache, norm: f64) -> Gradients {
    let m = model.hidden();
    let mut grads = Gradients::zeros(m);
    let mut dh = vec![0.0; m];
    let mut dc = vec![0.0; m];
    for k in (0..rec.decoder.len()).rev() {
        let dy = 2.0 * norm * rec.residuals[k];
        axpy(dy, &rec.hidden[k], &mut grads.w_out);
        grads.b_out += dy;
        axpy(dy, &model.w_out, &mut dh);
        let (dh_prev, dc_prev) = step_backward(&model.decoder, &rec.decoder[k], &dh, &dc, &mut grads.decoder);
        dh = dh_prev;
        dc = dc_prev;
    }
    for cache in rec.encoder.iter().rev() {
        let (dh_prev, dc_prev) = step_backward(&model.encoder, cache, &dh, &dc, &mut grads.encoder);
        dh = dh_prev;
        dc = dc_prev;
    }
    grads
}

/// Exact gradient of the loss computed by [`forward_loss`]. Per-record
/// gradients may be computed in parallel; they are summed in batch order.
pub fn backward(model: &Seq2SeqModel, cache: &ForwardCache) -> Gradients {
    let per_record: Vec<Gradients> = cache
        .records
        .par_iter()
        .map(|rec| backward_record(model, rec, cache.norm))
        .collect();
    let mut total = Gradients::zeros_like(model);
    for g in &per_record {
        total.add_assign(g);
    }
    total
}
