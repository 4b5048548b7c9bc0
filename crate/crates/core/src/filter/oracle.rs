//! Brute-force posterior by conditioning the full joint Gaussian over every
//! `(p_k, B_k)`. Cubic in the record length; used to verify the recursions.

use nalgebra::{DMatrix, DVector};

use super::StateSpaceModel;
use crate::error::{Error, Result};

pub const ORACLE_MAX_STEPS: usize = 64;

/// A scalar linear observation `value = weight . s_step + noise`,
/// `noise ~ N(0, noise_var)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub step: usize,
    pub weight: [f64; 2],
    pub noise_var: f64,
    pub value: f64,
}

/// Joint law of the stacked state `(p_0, B_0, p_1, B_1, ...)`.
#[derive(Debug, Clone)]
pub struct JointGaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl JointGaussian {
    /// Prior over `n_steps` states. Built from the independent sources
    /// `z = (s_0, w_0, ..., w_{n-2})` through the explicit linear map
    /// `s_k = A^k s_0 + sum_{j<k} A^{k-1-j} w_j`, so `cov = L Sigma_z L^T`.
    pub fn prior(model: &StateSpaceModel, n_steps: usize) -> Result<Self> {
        if n_steps > ORACLE_MAX_STEPS {
            return Err(Error::DimensionCap {
                n: n_steps,
                max: ORACLE_MAX_STEPS,
            });
        }
        let dim = 2 * n_steps;
        let a = DMatrix::from_row_slice(2, 2, &model.transition.0.concat());
        let mut powers = vec![DMatrix::<f64>::identity(2, 2)];
        for k in 1..n_steps.max(1) {
            powers.push(&a * &powers[k - 1]);
        }

        // Source j = 0 is s_0; source j >= 1 is w_{j-1}.
        let mut lift = DMatrix::<f64>::zeros(dim, dim);
        let mut sources = DMatrix::<f64>::zeros(dim, dim);
        for k in 0..n_steps {
            lift.view_mut((2 * k, 0), (2, 2)).copy_from(&powers[k]);
            for j in 0..k {
                lift.view_mut((2 * k, 2 * (j + 1)), (2, 2))
                    .copy_from(&powers[k - 1 - j]);
            }
        }
        for j in 0..n_steps {
            let block = if j == 0 {
                model.prior.cov
            } else {
                model.process_noise
            };
            sources
                .view_mut((2 * j, 2 * j), (2, 2))
                .copy_from(&DMatrix::from_row_slice(2, 2, &block.0.concat()));
        }
        let mut z_mean = DVector::<f64>::zeros(dim);
        if n_steps > 0 {
            z_mean[0] = model.prior.mean[0];
            z_mean[1] = model.prior.mean[1];
        }
        let mean = &lift * z_mean;
        let cov = &lift * sources * lift.transpose();
        Ok(JointGaussian { mean, cov })
    }

    pub fn n_steps(&self) -> usize {
        self.mean.len() / 2
    }

    /// Posterior given a set of scalar observations, by solving against the
    /// observation covariance `C_xx = M Sigma M^T + diag(r)`.
    pub fn condition(&self, obs: &[Observation]) -> Result<Self> {
        if obs.is_empty() {
            return Ok(self.clone());
        }
        let dim = self.mean.len();
        let mut m = DMatrix::<f64>::zeros(obs.len(), dim);
        let mut resid = DVector::<f64>::zeros(obs.len());
        let mut noise = DMatrix::<f64>::zeros(obs.len(), obs.len());
        for (row, o) in obs.iter().enumerate() {
            if o.step >= self.n_steps() {
                return Err(Error::InvalidParams(format!(
                    "observation step {} out of range",
                    o.step
                )));
            }
            m[(row, 2 * o.step)] = o.weight[0];
            m[(row, 2 * o.step + 1)] = o.weight[1];
            noise[(row, row)] = o.noise_var;
        }
        let predicted = &m * &self.mean;
        for (row, o) in obs.iter().enumerate() {
            resid[row] = o.value - predicted[row];
        }
        let cross = &self.cov * m.transpose();
        let cxx = &m * &cross + noise;
        let chol = cxx
            .cholesky()
            .ok_or_else(|| Error::InvalidParams("observation covariance not positive definite".into()))?;
        let mean = &self.mean + &cross * chol.solve(&resid);
        let cov = &self.cov - &cross * chol.solve(&cross.transpose());
        Ok(JointGaussian { mean, cov })
    }

    pub fn marginals(&self) -> OraclePosterior {
        let n = self.n_steps();
        OraclePosterior {
            p_mean: (0..n).map(|k| self.mean[2 * k]).collect(),
            p_var: (0..n).map(|k| self.cov[(2 * k, 2 * k)]).collect(),
            b_mean: (0..n).map(|k| self.mean[2 * k + 1]).collect(),
            b_var: (0..n).map(|k| self.cov[(2 * k + 1, 2 * k + 1)]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePosterior {
    pub p_mean: Vec<f64>,
    pub p_var: Vec<f64>,
    pub b_mean: Vec<f64>,
    pub b_var: Vec<f64>,
}

/// Exact marginal posteriors given every measurement in `signal`.
pub fn joint_gaussian_oracle(model: &StateSpaceModel, signal: &[f64]) -> Result<OraclePosterior> {
    let prior = JointGaussian::prior(model, signal.len())?;
    let obs: Vec<_> = signal
        .iter()
        .enumerate()
        .map(|(step, &value)| Observation {
            step,
            weight: model.observation,
            noise_var: model.obs_noise,
            value,
        })
        .collect();
    Ok(prior.condition(&obs)?.marginals())
}
