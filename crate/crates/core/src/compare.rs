//! Network versus smoother on the same test records.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::filter::baseline_error_curve;
use crate::metrics::{sample_sd, ErrorCurve};
use crate::nn::Seq2SeqModel;
use crate::sim::Dataset;
use crate::train::{evaluate_error_curve, teacher_forced_loss};

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rnn: ErrorCurve,
    pub smoothed: ErrorCurve,
    pub filtered: ErrorCurve,
    pub teacher_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub records: usize,
    pub mid_rnn: f64,
    pub mid_smoothed: f64,
    pub mid_filtered: f64,
    pub ratio_rnn_to_smoother: f64,
    pub ratio_standard_error: f64,
    pub edge_start_rnn: f64,
    pub edge_end_rnn: f64,
    pub edge_start_smoothed: f64,
    pub edge_end_smoothed: f64,
    pub teacher_mse: f64,
    pub autoregressive_mse: f64,
}

pub fn compare(model: &Seq2SeqModel, test: &Dataset) -> Result<Comparison> {
    let baseline = baseline_error_curve(&test.params, test)?;
    let rnn = evaluate_error_curve(model, test)?;
    let teacher_mse = teacher_forced_loss(model, test)?;
    Ok(Comparison {
        rnn,
        smoothed: baseline.smoothed,
        filtered: baseline.filtered,
        teacher_mse,
    })
}

impl Comparison {
    pub fn summary(&self) -> ComparisonSummary {
        let a = &self.rnn.record_mid_mse;
        let b = &self.smoothed.record_mid_mse;
        let (mid_rnn, mid_smoothed) = (self.rnn.mid_mean(), self.smoothed.mid_mean());
        let ratio = mid_rnn / mid_smoothed;
        // delta method on the paired per-record mid-interval errors
        let linearized: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - ratio * y).collect();
        let ratio_se = sample_sd(&linearized) / ((a.len() as f64).sqrt() * mid_smoothed);
        let (rs, re) = self.rnn.edge_ratios();
        let (ss, se) = self.smoothed.edge_ratios();
        ComparisonSummary {
            records: a.len(),
            mid_rnn,
            mid_smoothed,
            mid_filtered: self.filtered.mid_mean(),
            ratio_rnn_to_smoother: ratio,
            ratio_standard_error: ratio_se,
            edge_start_rnn: rs,
            edge_end_rnn: re,
            edge_start_smoothed: ss,
            edge_end_smoothed: se,
            teacher_mse: self.teacher_mse,
            autoregressive_mse: self.rnn.error.iter().sum::<f64>() / self.rnn.len() as f64,
        }
    }

    /// `t,error_rnn,error_smoothed,error_filtered`
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,error_rnn,error_smoothed,error_filtered")?;
        for k in 0..self.rnn.len() {
            writeln!(
                w,
                "{},{},{},{}",
                k as f64 * self.rnn.tau,
                self.rnn.error[k],
                self.smoothed.error[k],
                self.filtered.error[k]
            )?;
        }
        Ok(())
    }
}

impl ComparisonSummary {
    fn rows(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("records", self.records as f64),
            ("mid_rnn", self.mid_rnn),
            ("mid_smoothed", self.mid_smoothed),
            ("mid_filtered", self.mid_filtered),
            ("ratio_rnn_to_smoother", self.ratio_rnn_to_smoother),
            ("ratio_standard_error", self.ratio_standard_error),
            ("edge_start_rnn", self.edge_start_rnn),
            ("edge_end_rnn", self.edge_end_rnn),
            ("edge_start_smoothed", self.edge_start_smoothed),
            ("edge_end_smoothed", self.edge_end_smoothed),
            ("teacher_mse", self.teacher_mse),
            ("autoregressive_mse", self.autoregressive_mse),
        ]
    }

    /// `metric,value`
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "metric,value")?;
        for (k, v) in self.rows() {
            writeln!(w, "{k},{v}")?;
        }
        Ok(())
    }

    pub fn table(&self) -> String {
        self.rows()
            .into_iter()
            .map(|(k, v)| format!("{k:<24} {v:.6}\n"))
            .collect()
    }
}
