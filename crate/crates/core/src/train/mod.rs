//! Mini-batch ADAM training with teacher forcing, and autoregressive
//! prediction.

mod adam;
mod eval;

pub use adam::{adam_step, AdamState};
pub use eval::{
    autoregressive_loss, evaluate_error_curve, predict_dataset, teacher_forced_loss,
    teacher_vs_autoregressive_gap, write_loss_csv, write_samples_csv,
};

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{backward, checksum, forward_loss, InputNorm, Sample, Seq2SeqModel};
use crate::rng::{self, Domain};
use crate::sim::{Dataset, PhysicsParams};

/// Multiply the learning rate by `factor` every `every` epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDecay {
    pub every: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub eta: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub normalize_inputs: bool,
    pub clip_norm: Option<f64>,
    pub lr_decay: Option<StepDecay>,
}

impl TrainConfig {
    /// m = 80, batches of 256, 30 epochs.
    pub fn full_scale() -> Self {
        TrainConfig {
            eta: 0.01,
            batch_size: 256,
            epochs: 30,
            hidden: 80,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            normalize_inputs: false,
            clip_norm: None,
            lr_decay: None,
        }
    }

    /// m = 32, batches of 64, 20 epochs.
    pub fn desk_scale() -> Self {
        TrainConfig {
            batch_size: 64,
            epochs: 20,
            hidden: 32,
            ..Self::full_scale()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.into()));
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.eta) {
            return bad("eta must be > 0");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("ADAM betas must lie in [0, 1)");
        }
        if !positive(self.adam_eps) {
            return bad("adam_eps must be > 0");
        }
        if self.batch_size == 0 || self.epochs == 0 || self.hidden == 0 {
            return bad("batch_size, epochs and hidden must be >= 1");
        }
        if matches!(self.clip_norm, Some(c) if !positive(c)) {
            return bad("clip_norm must be > 0");
        }
        if matches!(self.lr_decay, Some(d) if d.every == 0 || !positive(d.factor)) {
            return bad("lr_decay needs every >= 1 and factor > 0");
        }
        Ok(())
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        match self.lr_decay {
            Some(d) => self.eta * d.factor.powi((epoch / d.every) as i32),
            None => self.eta,
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::full_scale()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Record-weighted mean of the mini-batch losses seen during each epoch.
    pub epoch_losses: Vec<f64>,
    pub wall_time_secs: f64,
    /// SHA-256 of the final checkpoint bytes.
    pub checksum: String,
}

impl TrainReport {
    /// `|L_last - L_prev| / L_prev` over the final two epochs.
    pub fn final_relative_change(&self) -> Option<f64> {
        let n = self.epoch_losses.len();
        (n >= 2).then(|| {
            let (a, b) = (self.epoch_losses[n - 2], self.epoch_losses[n - 1]);
            (b - a).abs() / a
        })
    }
}

/// Visiting order of records in `epoch`.
pub fn epoch_permutation(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, Domain::Shuffle, epoch as u64));
    perm
}

pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<(Seq2SeqModel, TrainReport)> {
    train_with_progress(dataset, cfg, |_, _| {})
}

/// Teacher-forced training: each mini-batch of `M` shuffled records gives one
/// loss evaluation and one ADAM step; a short final batch uses its own size.
/// `on_epoch(epoch, loss)` runs after every epoch.
pub fn train_with_progress<F>(
    dataset: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<(Seq2SeqModel, TrainReport)>
where
    F: FnMut(usize, f64),
{
    cfg.validate()?;
    dataset.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidParams("training set is empty".into()));
    }
    let start = Instant::now();
    let mut model = Seq2SeqModel::init(cfg.hidden, &mut rng::stream(cfg.seed, Domain::Init, 0));
    if cfg.normalize_inputs {
        model.input_norm = Some(InputNorm::from_signals(
            dataset.records.iter().map(|r| r.signal.as_slice()),
        ));
    }
    let mut adam = AdamState::new(&model, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    let n = dataset.len();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let perm = epoch_permutation(n, cfg.seed, epoch);
        let eta = cfg.learning_rate(epoch);
        let mut weighted = 0.0;
        for (b, idx) in perm.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<Sample> = idx
                .iter()
                .map(|&i| {
                    (
                        dataset.records[i].signal.as_slice(),
                        dataset.records[i].field.as_slice(),
                    )
                })
                .collect();
            let (loss, cache) = forward_loss(&model, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b,
                    loss,
                });
            }
            let mut grads = backward(&model, &cache);
            if !grads.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b,
                    loss: f64::NAN,
                });
            }
            if let Some(clip) = cfg.clip_norm {
                let norm = grads.global_norm();
                if norm > clip {
                    grads.scale(clip / norm);
                }
            }
            adam_step(&mut model, &grads, &mut adam, eta);
            weighted += loss * idx.len() as f64;
        }
        let epoch_loss = weighted / n as f64;
        log::info!("epoch {:>3}  loss {:.6e}", epoch + 1, epoch_loss);
        on_epoch(epoch, epoch_loss);
        epoch_losses.push(epoch_loss);
    }

    let report = TrainReport {
        epoch_losses,
        wall_time_secs: start.elapsed().as_secs_f64(),
        checksum: checksum(&model),
    };
    Ok((model, report))
}

/// Encode the signal, then decode autoregressively for as many steps.
pub fn predict(model: &Seq2SeqModel, signal: &[f64]) -> Vec<f64> {
    model.decode_autoregressive(model.encode(signal), signal.len())
}

/// Metadata written next to a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub train: TrainConfig,
    /// Physics of the training set; evaluation data must share its `n_steps`.
    pub physics: PhysicsParams,
    pub dataset_header_sha256: String,
    pub checkpoint_sha256: String,
    pub input_norm: Option<InputNorm>,
    pub report: Option<TrainReport>,
}
