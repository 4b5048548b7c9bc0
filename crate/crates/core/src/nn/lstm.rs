//! A single LSTM layer with scalar input:
//!
//! ```text
//! I  = sigmoid(W_ri r + W_hi h + b_i)
//! F  = sigmoid(W_rf r + W_hf h + b_f)
//! c' = F * c + I * tanh(W_rc r + W_hc h + b_c)
//! O  = sigmoid(W_ro r + W_ho h + b_o)
//! h' = O * tanh(c')
//! ```

use super::linalg::{axpy, sigmoid, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_ri: Vec<f64>,
    pub w_rf: Vec<f64>,
    pub w_rc: Vec<f64>,
    pub w_ro: Vec<f64>,
    pub w_hi: Matrix,
    pub w_hf: Matrix,
    pub w_hc: Matrix,
    pub w_ho: Matrix,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(m: usize) -> Self {
        LstmParams {
            w_ri: vec![0.0; m],
            w_rf: vec![0.0; m],
            w_rc: vec![0.0; m],
            w_ro: vec![0.0; m],
            w_hi: Matrix::zeros(m, m),
            w_hf: Matrix::zeros(m, m),
            w_hc: Matrix::zeros(m, m),
            w_ho: Matrix::zeros(m, m),
            b_i: vec![0.0; m],
            b_f: vec![0.0; m],
            b_c: vec![0.0; m],
            b_o: vec![0.0; m],
        }
    }

    pub fn hidden(&self) -> usize {
        self.b_i.len()
    }

    /// Parameter blocks in checkpoint order: input weights, recurrent weights,
    /// biases, each in gate order `i, f, c, o`.
    pub fn blocks(&self) -> [&[f64]; 12] {
        [
            &self.w_ri,
            &self.w_rf,
            &self.w_rc,
            &self.w_ro,
            self.w_hi.as_slice(),
            self.w_hf.as_slice(),
            self.w_hc.as_slice(),
            self.w_ho.as_slice(),
            &self.b_i,
            &self.b_f,
            &self.b_c,
            &self.b_o,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 12] {
        [
            &mut self.w_ri,
            &mut self.w_rf,
            &mut self.w_rc,
            &mut self.w_ro,
            self.w_hi.as_mut_slice(),
            self.w_hf.as_mut_slice(),
            self.w_hc.as_mut_slice(),
            self.w_ho.as_mut_slice(),
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_c,
            &mut self.b_o,
        ]
    }

    pub fn is_consistent(&self) -> bool {
        let m = self.hidden();
        let vecs_ok = [
            &self.w_ri, &self.w_rf, &self.w_rc, &self.w_ro, &self.b_i, &self.b_f, &self.b_c, &self.b_o,
        ]
        .iter()
        .all(|v| v.len() == m);
        let mats_ok = [&self.w_hi, &self.w_hf, &self.w_hc, &self.w_ho]
            .iter()
            .all(|w| w.rows() == m && w.cols() == m);
        vecs_ok && mats_ok && self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// `dst = W_r r + W_h h + b` for one gate.
    fn preact(w_r: &[f64], w_h: &Matrix, b: &[f64], r: f64, h: &[f64], dst: &mut [f64]) {
        dst.copy_from_slice(b);
        axpy(r, w_r, dst);
        w_h.gemv_acc(h, dst);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(m: usize) -> Self {
        LstmState {
            h: vec![0.0; m],
            c: vec![0.0; m],
        }
    }
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub r: f64,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

pub fn lstm_step(p: &LstmParams, r: f64, s: &LstmState) -> LstmState {
    step_cached(p, r, s).0
}

pub(crate) fn step_cached(p: &LstmParams, r: f64, s: &LstmState) -> (LstmState, StepCache) {
    let m = p.hidden();
    let mut i = vec![0.0; m];
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; m];
    let mut o = vec![0.0; m];
    LstmParams::preact(&p.w_ri, &p.w_hi, &p.b_i, r, &s.h, &mut i);
    LstmParams::preact(&p.w_rf, &p.w_hf, &p.b_f, r, &s.h, &mut f);
    LstmParams::preact(&p.w_rc, &p.w_hc, &p.b_c, r, &s.h, &mut g);
    LstmParams::preact(&p.w_ro, &p.w_ho, &p.b_o, r, &s.h, &mut o);
    i.iter_mut().for_each(|v| *v = sigmoid(*v));
    f.iter_mut().for_each(|v| *v = sigmoid(*v));
    g.iter_mut().for_each(|v| *v = v.tanh());
    o.iter_mut().for_each(|v| *v = sigmoid(*v));

    let mut c = vec![0.0; m];
    let mut tanh_c = vec![0.0; m];
    let mut h = vec![0.0; m];
    for j in 0..m {
        c[j] = f[j] * s.c[j] + i[j] * g[j];
        tanh_c[j] = c[j].tanh();
        h[j] = o[j] * tanh_c[j];
    }
    let cache = StepCache {
        r,
        h_prev: s.h.clone(),
        c_prev: s.c.clone(),
        i,
        f,
        g,
        o,
        tanh_c,
    };
    (LstmState { h, c }, cache)
}

/// Backpropagates `(dL/dh', dL/dc')` through one step, accumulating parameter
/// gradients into `grads` and returning `(dL/dh, dL/dc)` for the previous state.
/// The input `r` is treated as a constant.
pub(crate) fn step_backward(
    p: &LstmParams,
    cache: &StepCache,
    dh: &[f64],
    dc: &[f64],
    grads: &mut LstmParams,
) -> (Vec<f64>, Vec<f64>) {
    let m = p.hidden();
    let mut da_i = vec![0.0; m];
    let mut da_f = vec![0.0; m];
    let mut da_g = vec![0.0; m];
    let mut da_o = vec![0.0; m];
    let mut dc_prev = vec![0.0; m];
    for j in 0..m {
        let (i, f, g, o, tc) = (cache.i[j], cache.f[j], cache.g[j], cache.o[j], cache.tanh_c[j]);
        let dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
        da_o[j] = dh[j] * tc * o * (1.0 - o);
        da_i[j] = dct * g * i * (1.0 - i);
        da_g[j] = dct * i * (1.0 - g * g);
        da_f[j] = dct * cache.c_prev[j] * f * (1.0 - f);
        dc_prev[j] = dct * f;
    }

    let mut dh_prev = vec![0.0; m];
    let gates = [
        (&da_i, &p.w_hi, 0usize),
        (&da_f, &p.w_hf, 1),
        (&da_g, &p.w_hc, 2),
        (&da_o, &p.w_ho, 3),
    ];
    for (da, w_h, gate) in gates {
        w_h.gemv_t_acc(da, &mut dh_prev);
        let (gw_r, gw_h, gb) = match gate {
            0 => (&mut grads.w_ri, &mut grads.w_hi, &mut grads.b_i),
            1 => (&mut grads.w_rf, &mut grads.w_hf, &mut grads.b_f),
            2 => (&mut grads.w_rc, &mut grads.w_hc, &mut grads.b_c),
            _ => (&mut grads.w_ro, &mut grads.w_ho, &mut grads.b_o),
        };
        axpy(cache.r, da, gw_r);
        gw_h.add_outer(da, &cache.h_prev);
        axpy(1.0, da, gb);
    }
    (dh_prev, dc_prev)
}
