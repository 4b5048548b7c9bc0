//! Time-resolved mean squared error of a field estimator over a test set.

use std::io::Write;
use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::sim::PhysicsParams;

/// Fraction of the record, at each end, excluded from the mid-interval summary.
pub const EDGE_FRACTION: f64 = 0.2;

/// Indices `k` with `t_k` in `[0.2 T, 0.8 T]`.
pub fn mid_window(n_steps: usize) -> RangeInclusive<usize> {
    let last = (n_steps - 1) as f64;
    let lo = (EDGE_FRACTION * last - 1e-9).ceil() as usize;
    let hi = ((1.0 - EDGE_FRACTION) * last + 1e-9).floor() as usize;
    lo..=hi
}

/// `Error(t) = (1/N') sum_i (B_true - B_est)^2` per time index, plus the
/// per-record mid-interval MSE used for standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub tau: f64,
    pub stationary_variance: f64,
    pub error: Vec<f64>,
    pub record_mid_mse: Vec<f64>,
}

impl ErrorCurve {
    /// Pairs are reduced in iteration order.
    pub fn from_pairs<'a, I>(params: &PhysicsParams, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [f64], &'a [f64])>,
    {
        let n = params.n_steps;
        let window = mid_window(n);
        let width = window.clone().count() as f64;
        let mut sum = vec![0.0; n];
        let mut record_mid_mse = Vec::new();
        for (truth, est) in pairs {
            for len in [truth.len(), est.len()] {
                if len != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        got: len,
                    });
                }
            }
            let mut mid = 0.0;
            for (k, (t, e)) in truth.iter().zip(est).enumerate() {
                let sq = (t - e) * (t - e);
                sum[k] += sq;
                if window.contains(&k) {
                    mid += sq;
                }
            }
            record_mid_mse.push(mid / width);
        }
        if record_mid_mse.is_empty() {
            return Err(Error::InvalidParams(
                "error curve needs at least one record".into(),
            ));
        }
        let count = record_mid_mse.len() as f64;
        Ok(ErrorCurve {
            tau: params.tau,
            stationary_variance: params.stationary_variance(),
            error: sum.into_iter().map(|s| s / count).collect(),
            record_mid_mse,
        })
    }

    pub fn len(&self) -> usize {
        self.error.len()
    }

    pub fn is_empty(&self) -> bool {
        self.error.is_empty()
    }

    pub fn records(&self) -> usize {
        self.record_mid_mse.len()
    }

    /// Error in units of the stationary field variance.
    pub fn normalized(&self) -> Vec<f64> {
        self.error.iter().map(|e| e / self.stationary_variance).collect()
    }

    pub fn mid_mean(&self) -> f64 {
        let w = mid_window(self.len());
        let n = w.clone().count() as f64;
        self.error[w].iter().sum::<f64>() / n
    }

    /// Standard error of [`mid_mean`](Self::mid_mean) across records.
    pub fn mid_standard_error(&self) -> f64 {
        sample_sd(&self.record_mid_mse) / (self.records() as f64).sqrt()
    }

    /// `(Error(0) / mid, Error(T) / mid)`.
    pub fn edge_ratios(&self) -> (f64, f64) {
        let mid = self.mid_mean();
        (self.error[0] / mid, self.error[self.len() - 1] / mid)
    }

    /// `max / min` of the curve inside the mid window.
    pub fn mid_flatness(&self) -> f64 {
        let w = &self.error[mid_window(self.len())];
        let max = w.iter().cloned().fold(f64::MIN, f64::max);
        let min = w.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }
}

pub(crate) fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// `t,error,error_normalized`
pub fn write_error_csv<W: Write>(curve: &ErrorCurve, mut w: W) -> Result<()> {
    writeln!(w, "t,error,error_normalized")?;
    for (k, (e, n)) in curve.error.iter().zip(curve.normalized()).enumerate() {
        writeln!(w, "{},{},{}", k as f64 * curve.tau, e, n)?;
    }
    Ok(())
}
