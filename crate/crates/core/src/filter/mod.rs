//! Exact Gaussian baseline: Kalman filter and Rauch-Tung-Striebel smoother
//! over the hybrid state `s = (p, B)`.
//!
//! ```text
//! s_{k+1} = A s_k + w_k,   A = [[1, -mu tau], [0, 1 - gamma_b tau]],  Q = diag(0, sigma_b tau)
//! x_k     = H s_k + v_k,   H = [kappa sqrt(tau), 0],                  R = 1/2
//! ```
//!
//! Each step is updated with `x_k` first and then predicted forward, the same
//! order the simulator uses.

mod baseline;
mod mat2;
mod oracle;

pub use baseline::{baseline_error_curve, write_baseline_csv, write_estimate_csv, BaselineCurves};
pub use mat2::Mat2;
pub use oracle::{joint_gaussian_oracle, JointGaussian, Observation, OraclePosterior, ORACLE_MAX_STEPS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{PhysicsParams, QUADRATURE_VARIANCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    /// `(<p>, <B>)`
    pub mean: [f64; 2],
    pub cov: Mat2,
}

impl GaussianBelief {
    pub fn b_mean(&self) -> f64 {
        self.mean[1]
    }

    pub fn b_var(&self) -> f64 {
        self.cov.0[1][1]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.cov.sym_eigenvalues()[0]
    }

    pub fn asymmetry(&self) -> f64 {
        (self.cov.0[0][1] - self.cov.0[1][0]).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSpaceModel {
    pub transition: Mat2,
    pub process_noise: Mat2,
    pub observation: [f64; 2],
    pub obs_noise: f64,
    pub prior: GaussianBelief,
}

pub fn build_model(params: &PhysicsParams) -> Result<StateSpaceModel> {
    params.validate()?;
    let tau = params.tau;
    Ok(StateSpaceModel {
        transition: Mat2([[1.0, -params.mu * tau], [0.0, 1.0 - params.gamma_b * tau]]),
        process_noise: Mat2::diag(0.0, params.sigma_b * tau),
        observation: [params.readout_gain(), 0.0],
        obs_noise: QUADRATURE_VARIANCE,
        prior: GaussianBelief {
            mean: [0.0, 0.0],
            cov: Mat2::diag(QUADRATURE_VARIANCE, params.stationary_variance()),
        },
    })
}

impl StateSpaceModel {
    pub fn predict(&self, b: &GaussianBelief) -> GaussianBelief {
        GaussianBelief {
            mean: self.transition.mul_vec(b.mean),
            cov: (b.cov.congruence(&self.transition) + self.process_noise).symmetrize(),
        }
    }

    /// Measurement update in Joseph form. Returns the posterior, the
    /// innovation and its predictive variance.
    pub fn update(&self, b: &GaussianBelief, x: f64) -> (GaussianBelief, f64, f64) {
        let h = self.observation;
        let ph = b.cov.mul_vec(h);
        let s = h[0] * ph[0] + h[1] * ph[1] + self.obs_noise;
        let gain = [ph[0] / s, ph[1] / s];
        let innovation = x - (h[0] * b.mean[0] + h[1] * b.mean[1]);
        let mean = [b.mean[0] + gain[0] * innovation, b.mean[1] + gain[1] * innovation];
        let i_kh = Mat2::IDENTITY - Mat2::outer(gain, h);
        let cov = b.cov.congruence(&i_kh) + Mat2::outer(gain, gain).scale(self.obs_noise);
        (
            GaussianBelief {
                mean,
                cov: cov.symmetrize(),
            },
            innovation,
            s,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    /// Belief at step `k` before `x_k` is absorbed; `predicted[0]` is the prior.
    pub predicted: Vec<GaussianBelief>,
    pub filtered: Vec<GaussianBelief>,
    pub innovations: Vec<f64>,
    pub innovation_variances: Vec<f64>,
}

impl FilterOutput {
    pub fn b_means(&self) -> Vec<f64> {
        self.filtered.iter().map(GaussianBelief::b_mean).collect()
    }
}

pub fn kalman_filter(model: &StateSpaceModel, signal: &[f64]) -> Result<FilterOutput> {
    if signal.is_empty() {
        return Err(Error::InvalidParams("signal must be non-empty".into()));
    }
    if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let n = signal.len();
    let mut out = FilterOutput {
        predicted: Vec::with_capacity(n),
        filtered: Vec::with_capacity(n),
        innovations: Vec::with_capacity(n),
        innovation_variances: Vec::with_capacity(n),
    };
    let mut belief = model.prior;
    for (k, &x) in signal.iter().enumerate() {
        out.predicted.push(belief);
        let (post, e, s) = model.update(&belief, x);
        out.filtered.push(post);
        out.innovations.push(e);
        out.innovation_variances.push(s);
        if k + 1 < n {
            belief = model.predict(&post);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmootherOutput {
    pub smoothed: Vec<GaussianBelief>,
    /// Set when some predicted covariance was singular and the gain used a
    /// pseudo-inverse.
    pub used_pseudo_inverse: bool,
}

impl SmootherOutput {
    pub fn b_means(&self) -> Vec<f64> {
        self.smoothed.iter().map(GaussianBelief::b_mean).collect()
    }

    pub fn b_vars(&self) -> Vec<f64> {
        self.smoothed.iter().map(GaussianBelief::b_var).collect()
    }
}

pub fn rts_smoother(model: &StateSpaceModel, filtered: &FilterOutput) -> Result<SmootherOutput> {
    let n = filtered.filtered.len();
    if n == 0 || filtered.predicted.len() != n {
        return Err(Error::InvalidParams("incomplete filter output".into()));
    }
    let a = model.transition;
    let mut smoothed = filtered.filtered.clone();
    let mut used_pseudo_inverse = false;
    for k in (0..n - 1).rev() {
        let f = &filtered.filtered[k];
        let pred = &filtered.predicted[k + 1];
        let pred_inv = match pred.cov.inverse() {
            Some(inv) => inv,
            None => {
                used_pseudo_inverse = true;
                pred.cov.sym_pinv()
            }
        };
        let gain = f.cov * a.transpose() * pred_inv;
        let next = smoothed[k + 1];
        let dm = [next.mean[0] - pred.mean[0], next.mean[1] - pred.mean[1]];
        let corr = gain.mul_vec(dm);
        smoothed[k] = GaussianBelief {
            mean: [f.mean[0] + corr[0], f.mean[1] + corr[1]],
            cov: (f.cov + (next.cov - pred.cov).congruence(&gain)).symmetrize(),
        };
    }
    if used_pseudo_inverse {
        log::warn!("singular predicted covariance; smoother gain used a pseudo-inverse");
    }
    Ok(SmootherOutput {
        smoothed,
        used_pseudo_inverse,
    })
}

/// Filter then smooth one record.
pub fn smooth_signal(model: &StateSpaceModel, signal: &[f64]) -> Result<(FilterOutput, SmootherOutput)> {
    let f = kalman_filter(model, signal)?;
    let s = rts_smoother(model, &f)?;
    Ok((f, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use crate::sim::simulate_record;

    #[test]
    fn reference_model_entries() {
        let m = build_model(&PhysicsParams::reference()).unwrap();
        assert!((m.observation[0] - 0.424_264_068_711_928_5).abs() < 1e-15);
        assert_eq!(m.observation[1], 0.0);
        assert_eq!(m.prior.cov, Mat2::diag(0.5, 1.0));
        assert_eq!(m.obs_noise, 0.5);
        assert!((m.transition.0[0][1] + 0.9).abs() < 1e-15);
        assert!((m.process_noise.0[1][1] - 0.02).abs() < 1e-15);

        let no_mu = build_model(&PhysicsParams {
            mu: 0.0,
            ..PhysicsParams::reference()
        })
        .unwrap();
        assert_eq!(no_mu.transition, Mat2::diag(1.0, 0.99));
    }

    #[test]
    fn single_step_matches_scalar_bayes() {
        let m = build_model(&PhysicsParams::reference()).unwrap();
        let out = kalman_filter(&m, &[1.0]).unwrap();
        // p ~ N(0, 0.5) observed through x = g p + v, v ~ N(0, 0.5); B untouched.
        let g = 18f64.sqrt() * 0.1;
        let s = g * g * 0.5 + 0.5;
        let p_mean = 0.5 * g / s * 1.0;
        let p_var = 0.5 - 0.5 * g * g * 0.5 / s;
        let post = out.filtered[0];
        assert!((post.mean[0] - p_mean).abs() < 1e-12);
        assert!((post.cov.0[0][0] - p_var).abs() < 1e-12);
        assert!(post.mean[1].abs() < 1e-12);
        assert!((post.cov.0[1][1] - 1.0).abs() < 1e-12);
        assert!(post.cov.0[0][1].abs() < 1e-12);
        assert!((out.innovation_variances[0] - s).abs() < 1e-12);
    }

    #[test]
    fn uninformative_measurement_leaves_prior() {
        let p = PhysicsParams {
            kappa: 0.0,
            ..PhysicsParams::reference()
        };
        let m = build_model(&p).unwrap();
        let mut rng = stream(1, Domain::Record, 0);
        let rec = simulate_record(&p, &mut rng).unwrap();
        let (f, s) = smooth_signal(&m, &rec.signal).unwrap();
        let mut belief = m.prior;
        for k in 0..p.n_steps {
            assert_eq!(f.filtered[k].mean, [0.0, 0.0]);
            assert!((f.filtered[k].cov.0[1][1] - belief.cov.0[1][1]).abs() < 1e-12);
            assert!((f.filtered[k].b_var() - 1.0).abs() < 0.01);
            belief = m.predict(&belief);
        }
        assert_eq!(s.smoothed, f.filtered);
    }

    #[test]
    fn non_finite_signal_rejected() {
        let m = build_model(&PhysicsParams::reference()).unwrap();
        assert!(matches!(
            kalman_filter(&m, &[0.0, f64::INFINITY]),
            Err(Error::NonFinite(1))
        ));
        assert!(kalman_filter(&m, &[]).is_err());
    }

    #[test]
    fn last_index_smoothed_equals_filtered() {
        let p = PhysicsParams::reference();
        let m = build_model(&p).unwrap();
        let rec = simulate_record(&p, &mut stream(2, Domain::Record, 0)).unwrap();
        let (f, s) = smooth_signal(&m, &rec.signal).unwrap();
        assert_eq!(s.smoothed.last(), f.filtered.last());
        assert!(!s.used_pseudo_inverse);
        for (sm, fi) in s.smoothed.iter().zip(&f.filtered) {
            assert!(sm.b_var() <= fi.b_var() + 1e-10);
            assert!(sm.min_eigenvalue() >= -1e-10);
            assert!(fi.min_eigenvalue() >= -1e-10);
        }
    }

    #[test]
    fn singular_prediction_uses_pseudo_inverse() {
        // No field noise and no field coupling: B is frozen and p is exactly
        // known after a perfect prior, so predicted covariances are singular.
        let p = PhysicsParams {
            sigma_b: 0.0,
            mu: 0.0,
            ..PhysicsParams::reference()
        };
        let mut m = build_model(&p).unwrap();
        m.prior.cov = Mat2::diag(0.5, 0.0);
        let f = kalman_filter(&m, &[0.1, 0.2, -0.3]).unwrap();
        let s = rts_smoother(&m, &f).unwrap();
        assert!(s.used_pseudo_inverse);
        assert!(s.smoothed.iter().all(|b| b.mean.iter().all(|v| v.is_finite())));
    }
}
