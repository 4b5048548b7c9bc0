use std::io::Write;

use rayon::prelude::*;

use super::{build_model, smooth_signal, SmootherOutput};
use crate::error::{Error, Result};
use crate::metrics::ErrorCurve;
use crate::sim::{Dataset, PhysicsParams, Record};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineCurves {
    pub smoothed: ErrorCurve,
    pub filtered: ErrorCurve,
}

struct Estimates {
    filtered: Vec<f64>,
    smoothed: Vec<f64>,
}

/// Per-time MSE of the smoothed (and filtered) posterior-mean field over a
/// dataset generated under `params`.
pub fn baseline_error_curve(params: &PhysicsParams, dataset: &Dataset) -> Result<BaselineCurves> {
    if dataset.params != *params {
        return Err(Error::HeaderMismatch);
    }
    dataset.validate()?;
    let model = build_model(params)?;
    let estimates = dataset
        .records
        .par_iter()
        .map(|r| {
            let (f, s) = smooth_signal(&model, &r.signal)?;
            Ok(Estimates {
                filtered: f.b_means(),
                smoothed: s.b_means(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let truths = dataset.records.iter().map(|r| r.field.as_slice());
    let smoothed = ErrorCurve::from_pairs(
        params,
        truths
            .clone()
            .zip(estimates.iter().map(|e| e.smoothed.as_slice())),
    )?;
    let filtered = ErrorCurve::from_pairs(
        params,
        truths.zip(estimates.iter().map(|e| e.filtered.as_slice())),
    )?;
    Ok(BaselineCurves { smoothed, filtered })
}

/// `t,error_smoothed,error_filtered`
pub fn write_baseline_csv<W: Write>(curves: &BaselineCurves, mut w: W) -> Result<()> {
    writeln!(w, "t,error_smoothed,error_filtered")?;
    let tau = curves.smoothed.tau;
    for (k, (s, f)) in curves
        .smoothed
        .error
        .iter()
        .zip(&curves.filtered.error)
        .enumerate()
    {
        writeln!(w, "{},{},{}", k as f64 * tau, s, f)?;
    }
    Ok(())
}

/// `t,B_true,B_smoothed,B_var_smoothed` for one record.
pub fn write_estimate_csv<W: Write>(
    params: &PhysicsParams,
    rec: &Record,
    smoothed: &SmootherOutput,
    mut w: W,
) -> Result<()> {
    writeln!(w, "t,B_true,B_smoothed,B_var_smoothed")?;
    for (k, (b, s)) in rec.field.iter().zip(&smoothed.smoothed).enumerate() {
        writeln!(w, "{},{},{},{}", params.time(k), b, s.b_mean(), s.b_var())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::generate_dataset;

    #[test]
    fn header_mismatch_rejected() {
        let p = PhysicsParams::reference();
        let d = generate_dataset(&p, 2, 0).unwrap();
        let other = PhysicsParams { mu: 10.0, ..p };
        assert!(matches!(
            baseline_error_curve(&other, &d),
            Err(Error::HeaderMismatch)
        ));
    }

    #[test]
    fn blind_baseline_sits_at_stationary_variance() {
        let p = PhysicsParams {
            kappa: 0.0,
            ..PhysicsParams::reference()
        };
        let d = generate_dataset(&p, 2000, 4).unwrap();
        let c = baseline_error_curve(&p, &d).unwrap();
        // 2000 records: relative sd of each point is about sqrt(2/2000) = 3%
        for e in &c.smoothed.error {
            assert!((e - 1.0).abs() < 0.15, "{e}");
        }
        assert!((c.smoothed.mid_mean() - 1.0).abs() < 0.1);
        let mut out = Vec::new();
        write_baseline_csv(&c, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("t,error_smoothed,error_filtered\n"));
        assert_eq!(text.lines().count(), p.n_steps + 1);
    }
}
