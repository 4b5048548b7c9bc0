use crate::nn::{Gradients, Seq2SeqModel};

/// First/second moment accumulators for ADAM with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub first: Gradients,
    pub second: Gradients,
    pub step: u64,
}

impl AdamState {
    pub fn new(model: &Seq2SeqModel, beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState {
            beta1,
            beta2,
            eps,
            first: Gradients::zeros_like(model),
            second: Gradients::zeros_like(model),
            step: 0,
        }
    }
}

/// One ADAM update `w <- w - eta * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step(model: &mut Seq2SeqModel, grads: &Gradients, state: &mut AdamState, eta: f64) {
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let blocks = model
        .blocks_mut()
        .into_iter()
        .zip(grads.blocks())
        .zip(state.first.blocks_mut())
        .zip(state.second.blocks_mut());
    for (((w, g), m), v) in blocks {
        for j in 0..w.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            w[j] -= eta * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
