use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::linalg::{dot, Matrix};
use super::lstm::{lstm_step, LstmParams, LstmState};

/// Affine map applied to the raw signal before it enters the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    pub mean: f64,
    pub std: f64,
}

impl InputNorm {
    pub fn from_signals<'a>(signals: impl Iterator<Item = &'a [f64]>) -> Self {
        let (mut n, mut sum, mut sq) = (0usize, 0.0, 0.0);
        for s in signals {
            for &x in s {
                n += 1;
                sum += x;
                sq += x * x;
            }
        }
        let mean = sum / n as f64;
        let var = (sq / n as f64 - mean * mean).max(0.0);
        InputNorm {
            mean,
            std: if var > 0.0 { var.sqrt() } else { 1.0 },
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }
}

/// LSTM encoder, LSTM decoder and a one-neuron linear read-out.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqModel {
    pub encoder: LstmParams,
    pub decoder: LstmParams,
    /// Read-out weights, `1 x m`.
    pub w_out: Vec<f64>,
    pub b_out: f64,
    /// Not a trainable parameter; stored beside the checkpoint, not in it.
    pub input_norm: Option<InputNorm>,
}

impl Seq2SeqModel {
    pub fn zeros(m: usize) -> Self {
        Seq2SeqModel {
            encoder: LstmParams::zeros(m),
            decoder: LstmParams::zeros(m),
            w_out: vec![0.0; m],
            b_out: 0.0,
            input_norm: None,
        }
    }

    /// Keras-default initialization: Glorot-uniform input and read-out
    /// kernels, orthogonal recurrent kernels, zero biases with the forget
    /// gate bias set to one.
    pub fn init<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        let mut model = Seq2SeqModel::zeros(m);
        for lstm in [&mut model.encoder, &mut model.decoder] {
            init_lstm(lstm, rng);
        }
        let limit = (6.0 / (m + 1) as f64).sqrt();
        for w in &mut model.w_out {
            *w = rng.random_range(-limit..limit);
        }
        model
    }

    pub fn hidden(&self) -> usize {
        self.w_out.len()
    }

    pub fn is_consistent(&self) -> bool {
        let m = self.hidden();
        self.encoder.hidden() == m
            && self.decoder.hidden() == m
            && self.encoder.is_consistent()
            && self.decoder.is_consistent()
            && self.w_out.iter().all(|v| v.is_finite())
            && self.b_out.is_finite()
    }

    pub fn n_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    /// Encoder blocks, decoder blocks, `w_out`, `b_out`.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(26);
        out.extend(self.encoder.blocks());
        out.extend(self.decoder.blocks());
        out.push(&self.w_out);
        out.push(std::slice::from_ref(&self.b_out));
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(26);
        out.extend(self.encoder.blocks_mut());
        out.extend(self.decoder.blocks_mut());
        out.push(&mut self.w_out);
        out.push(std::slice::from_mut(&mut self.b_out));
        out
    }

    pub(crate) fn encoder_input(&self, x: f64) -> f64 {
        match &self.input_norm {
            Some(n) => n.apply(x),
            None => x,
        }
    }

    /// `B = W_out . h + b_out`
    pub fn dense_out(&self, h: &[f64]) -> f64 {
        dot(&self.w_out, h) + self.b_out
    }

    /// Folds the encoder over the signal from a zero state.
    pub fn encode(&self, signal: &[f64]) -> LstmState {
        self.encode_from(LstmState::zeros(self.hidden()), signal)
    }

    pub fn encode_from(&self, init: LstmState, signal: &[f64]) -> LstmState {
        signal
            .iter()
            .fold(init, |s, &x| lstm_step(&self.encoder, self.encoder_input(x), &s))
    }

    /// Decoder fed `0, b_true[0], ..., b_true[n-2]`.
    pub fn decode_teacher(&self, init: LstmState, b_true: &[f64]) -> Vec<f64> {
        let mut state = init;
        let mut input = 0.0;
        let mut out = Vec::with_capacity(b_true.len());
        for &b in b_true {
            state = lstm_step(&self.decoder, input, &state);
            out.push(self.dense_out(&state.h));
            input = b;
        }
        out
    }

    /// Decoder fed `0` and then its own previous output.
    pub fn decode_autoregressive(&self, init: LstmState, n: usize) -> Vec<f64> {
        let mut state = init;
        let mut input = 0.0;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            state = lstm_step(&self.decoder, input, &state);
            let b = self.dense_out(&state.h);
            out.push(b);
            input = b;
        }
        out
    }
}

fn glorot<R: Rng + ?Sized>(dst: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut R) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in dst {
        *v = rng.random_range(-limit..limit);
    }
}

fn init_lstm<R: Rng + ?Sized>(p: &mut LstmParams, rng: &mut R) {
    let m = p.hidden();
    // Keras treats the four input kernels as one 1 x 4m matrix.
    for w in [&mut p.w_ri, &mut p.w_rf, &mut p.w_rc, &mut p.w_ro] {
        glorot(w, 1, 4 * m, rng);
    }
    // Likewise the recurrent kernel is one m x 4m matrix with orthonormal
    // rows; gate j's m x m block (acting on h from the left) is rows
    // jm..(j+1)m of a 4m x m matrix with orthonormal columns.
    let q = orthonormal_columns(4 * m, m, rng);
    for (j, w) in [&mut p.w_hi, &mut p.w_hf, &mut p.w_hc, &mut p.w_ho]
        .into_iter()
        .enumerate()
    {
        for a in 0..m {
            for b in 0..m {
                w.set(a, b, q.get(j * m + a, b));
            }
        }
    }
    p.b_i.fill(0.0);
    p.b_f.fill(1.0);
    p.b_c.fill(0.0);
    p.b_o.fill(0.0);
}

/// Q factor of a Gaussian `rows x cols` matrix (rows >= cols), signs fixed so
/// that R has a positive diagonal. Modified Gram-Schmidt yields exactly that
/// normalization.
pub(crate) fn orthonormal_columns<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    assert!(rows >= cols);
    let mut columns: Vec<Vec<f64>> = (0..cols)
        .map(|_| (0..rows).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    for j in 0..cols {
        for k in 0..j {
            let (done, rest) = columns.split_at_mut(j);
            let proj = dot(&done[k], &rest[0]);
            for (x, q) in rest[0].iter_mut().zip(&done[k]) {
                *x -= proj * q;
            }
        }
        let norm = dot(&columns[j], &columns[j]).sqrt();
        columns[j].iter_mut().for_each(|x| *x /= norm);
    }
    let mut q = Matrix::zeros(rows, cols);
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            q.set(i, j, v);
        }
    }
    q
}

/// Same shape as [`Seq2SeqModel`]'s trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: LstmParams,
    pub decoder: LstmParams,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl Gradients {
    pub fn zeros(m: usize) -> Self {
        Gradients {
            encoder: LstmParams::zeros(m),
            decoder: LstmParams::zeros(m),
            w_out: vec![0.0; m],
            b_out: 0.0,
        }
    }

    pub fn zeros_like(model: &Seq2SeqModel) -> Self {
        Gradients::zeros(model.hidden())
    }

    pub fn hidden(&self) -> usize {
        self.w_out.len()
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(26);
        out.extend(self.encoder.blocks());
        out.extend(self.decoder.blocks());
        out.push(&self.w_out);
        out.push(std::slice::from_ref(&self.b_out));
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(26);
        out.extend(self.encoder.blocks_mut());
        out.extend(self.decoder.blocks_mut());
        out.push(&mut self.w_out);
        out.push(std::slice::from_mut(&mut self.b_out));
        out
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for block in self.blocks_mut() {
            block.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|b| b.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::lstm_step;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_out_cases() {
        let mut m = Seq2SeqModel::zeros(2);
        m.b_out = 0.3;
        assert_eq!(m.dense_out(&[0.9, -0.4]), 0.3);
        m.b_out = 0.0;
        m.w_out = vec![1.0, -1.0];
        assert!((m.dense_out(&[0.2, 0.5]) + 0.3).abs() < 1e-15);
    }

    #[test]
    fn dense_out_matches_scalar_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = Seq2SeqModel::init(7, &mut rng);
        let h: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut expected = model.b_out;
        for (w, x) in model.w_out.iter().zip(&h) {
            expected += w * x;
        }
        assert!((model.dense_out(&h) - expected).abs() < 1e-14);
    }

    #[test]
    fn zero_model_outputs_bias() {
        let mut m = Seq2SeqModel::zeros(3);
        m.b_out = -0.25;
        let s = m.encode(&[1.0, -2.0, 3.0]);
        assert_eq!(s, LstmState::zeros(3));
        assert_eq!(m.decode_teacher(s.clone(), &[5.0; 4]), vec![-0.25; 4]);
        assert_eq!(m.decode_autoregressive(s, 4), vec![-0.25; 4]);
    }

    #[test]
    fn encode_is_a_fold_of_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = Seq2SeqModel::init(4, &mut rng);
        let sig = [0.3, -1.2, 2.0];
        let z = LstmState::zeros(4);
        assert_eq!(m.encode(&sig[..1]), lstm_step(&m.encoder, 0.3, &z));
        let s1 = lstm_step(&m.encoder, sig[0], &z);
        let s2 = lstm_step(&m.encoder, sig[1], &s1);
        let s3 = lstm_step(&m.encoder, sig[2], &s2);
        assert_eq!(m.encode(&sig), s3);
        assert_eq!(m.encode_from(m.encode(&sig[..2]), &sig[2..]), s3);
    }

    #[test]
    fn init_shapes_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Seq2SeqModel::init(5, &mut rng);
        assert!(m.is_consistent());
        assert_eq!(m.encoder.b_f, vec![1.0; 5]);
        assert_eq!(m.decoder.b_i, vec![0.0; 5]);
        assert_eq!(m.n_params(), 2 * 4 * (5 + 25 + 5) + 5 + 1);
        let lim = (6.0f64 / 21.0).sqrt();
        assert!(m.encoder.w_ri.iter().all(|w| w.abs() <= lim));
        // stacked recurrent blocks have orthonormal columns
        for a in 0..5 {
            for b in 0..5 {
                let mut s = 0.0;
                for w in [&m.encoder.w_hi, &m.encoder.w_hf, &m.encoder.w_hc, &m.encoder.w_ho] {
                    for r in 0..5 {
                        s += w.get(r, a) * w.get(r, b);
                    }
                }
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn input_norm_standardizes() {
        let sigs = [vec![1.0, 3.0], vec![5.0, 7.0]];
        let n = InputNorm::from_signals(sigs.iter().map(|s| s.as_slice()));
        assert!((n.mean - 4.0).abs() < 1e-12);
        assert!((n.std - 5f64.sqrt()).abs() < 1e-12);
        let flat = InputNorm::from_signals([vec![2.0; 3]].iter().map(|s| s.as_slice()));
        assert_eq!(flat.std, 1.0);
    }
}
