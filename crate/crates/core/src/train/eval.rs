use std::io::Write;

use rayon::prelude::*;

use super::predict;
use super::TrainReport;
use crate::error::{Error, Result};
use crate::metrics::ErrorCurve;
use crate::nn::Seq2SeqModel;
use crate::sim::{Dataset, PhysicsParams};

fn check_test_set(test: &Dataset) -> Result<()> {
    if test.is_empty() {
        return Err(Error::InvalidParams("test set is empty".into()));
    }
    test.validate()
}

/// Autoregressive estimates for every record, in record order.
pub fn predict_dataset(model: &Seq2SeqModel, test: &Dataset) -> Result<Vec<Vec<f64>>> {
    check_test_set(test)?;
    Ok(test
        .records
        .par_iter()
        .map(|r| predict(model, &r.signal))
        .collect())
}

/// Time-resolved MSE of autoregressive predictions.
pub fn evaluate_error_curve(model: &Seq2SeqModel, test: &Dataset) -> Result<ErrorCurve> {
    let est = predict_dataset(model, test)?;
    ErrorCurve::from_pairs(
        &test.params,
        test.records
            .iter()
            .map(|r| r.field.as_slice())
            .zip(est.iter().map(Vec::as_slice)),
    )
}

fn squared_error_total(test: &Dataset, estimates: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (r, est) in test.records.iter().zip(estimates) {
        for (b, e) in r.field.iter().zip(est) {
            total += (b - e) * (b - e);
        }
    }
    total
}

/// Mean squared error over the whole test set with teacher-forced decoding.
pub fn teacher_forced_loss(model: &Seq2SeqModel, test: &Dataset) -> Result<f64> {
    check_test_set(test)?;
    let est: Vec<Vec<f64>> = test
        .records
        .par_iter()
        .map(|r| model.decode_teacher(model.encode(&r.signal), &r.field))
        .collect();
    Ok(squared_error_total(test, &est) / (test.len() * test.params.n_steps) as f64)
}

/// Mean squared error over the whole test set with autoregressive decoding,
/// grouped record-first.
pub fn autoregressive_loss(model: &Seq2SeqModel, test: &Dataset) -> Result<f64> {
    let est = predict_dataset(model, test)?;
    Ok(squared_error_total(test, &est) / (test.len() * test.params.n_steps) as f64)
}

/// `(teacher-forced MSE, time average of the autoregressive Error(t))`.
pub fn teacher_vs_autoregressive_gap(model: &Seq2SeqModel, test: &Dataset) -> Result<(f64, f64)> {
    let teacher = teacher_forced_loss(model, test)?;
    let curve = evaluate_error_curve(model, test)?;
    let ar = curve.error.iter().sum::<f64>() / curve.len() as f64;
    Ok((teacher, ar))
}

/// `epoch,loss` with epochs numbered from 1.
pub fn write_loss_csv<W: Write>(report: &TrainReport, mut w: W) -> Result<()> {
    writeln!(w, "epoch,loss")?;
    for (e, l) in report.epoch_losses.iter().enumerate() {
        writeln!(w, "{},{}", e + 1, l)?;
    }
    Ok(())
}

/// `record_id,t,B_true,B_est` for the given records.
pub fn write_samples_csv<W: Write>(
    params: &PhysicsParams,
    test: &Dataset,
    estimates: &[(usize, Vec<f64>)],
    mut w: W,
) -> Result<()> {
    writeln!(w, "record_id,t,B_true,B_est")?;
    for (id, est) in estimates {
        let rec = test
            .records
            .get(*id)
            .ok_or_else(|| Error::InvalidParams(format!("record {id} out of range")))?;
        for (k, (b, e)) in rec.field.iter().zip(est).enumerate() {
            writeln!(w, "{},{},{},{}", id, params.time(k), b, e)?;
        }
    }
    Ok(())
}
