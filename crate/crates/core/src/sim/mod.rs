//! Ornstein-Uhlenbeck field paths and the Faraday-rotation measurement record.
//!
//! The atomic spin quadrature `p` is probed once per step and then kicked by
//! the field:
//!
//! ```text
//! x_k     = kappa * sqrt(tau) * p_k + v_k,      v_k ~ N(0, 1/2)
//! p_{k+1} = p_k - mu * tau * B_k
//! B_{k+1} = B_k - gamma_b * B_k * tau + sqrt(sigma_b) * dW_k,   dW_k ~ N(0, tau)
//! ```
//!
//! with `p_0 ~ N(0, 1/2)` (projection noise) and `B_0` drawn from the
//! stationary law `N(0, sigma_b / (2 gamma_b))`.

mod format;

pub use format::{
    header_bytes, header_digest, load_dataset, read_dataset, save_dataset, write_dataset, write_record_csv,
    DATASET_MAGIC, DATASET_VERSION,
};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain, RNG_ID_CHACHA20_STREAM};

/// Variance of the shot noise on each measurement and of the initial `p`.
pub const QUADRATURE_VARIANCE: f64 = 0.5;

/// Physical constants for one record: couplings, noise and sampling grid.
///
/// Units: time in ms, field in pT, signal dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsParams {
    /// Atom-light coupling, ms^-1/2.
    pub kappa: f64,
    /// Field-to-spin coupling, (pT ms)^-1.
    pub mu: f64,
    /// Step duration, ms.
    pub tau: f64,
    /// Samples per record, `N_T`.
    pub n_steps: usize,
    /// Field relaxation rate, ms^-1.
    pub gamma_b: f64,
    /// Field diffusion, pT^2/ms.
    pub sigma_b: f64,
}

impl PhysicsParams {
    /// kappa^2 = 18 ms^-1, mu = 90, tau = 0.01 ms, 101 samples on [0, 1] ms,
    /// gamma_b = 1 ms^-1, sigma_b = 2 pT^2/ms.
    pub fn reference() -> Self {
        PhysicsParams {
            kappa: 18f64.sqrt(),
            mu: 90.0,
            tau: 0.01,
            n_steps: 101,
            gamma_b: 1.0,
            sigma_b: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.kappa, self.mu, self.tau, self.gamma_b, self.sigma_b]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidParams("parameters must be finite".into()));
        }
        if self.tau <= 0.0 {
            return Err(Error::InvalidParams(format!("tau must be > 0, got {}", self.tau)));
        }
        if self.n_steps < 2 {
            return Err(Error::InvalidParams(format!(
                "n_steps must be >= 2, got {}",
                self.n_steps
            )));
        }
        if self.gamma_b <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "gamma_b must be > 0, got {}",
                self.gamma_b
            )));
        }
        if self.sigma_b < 0.0 {
            return Err(Error::InvalidParams(format!(
                "sigma_b must be >= 0, got {}",
                self.sigma_b
            )));
        }
        Ok(())
    }

    /// Like [`validate`](Self::validate), and also requires the Euler-Maruyama
    /// decay factor `1 - gamma_b tau` to be positive.
    pub fn validate_for_sampling(&self) -> Result<()> {
        self.validate()?;
        if self.gamma_b * self.tau >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "gamma_b * tau = {} >= 1 makes the field discretization unstable",
                self.gamma_b * self.tau
            )));
        }
        Ok(())
    }

    /// Record duration `T = (N_T - 1) tau`.
    pub fn duration(&self) -> f64 {
        (self.n_steps - 1) as f64 * self.tau
    }

    /// Equilibrium field variance `sigma_b / (2 gamma_b)`, pT^2.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma_b / (2.0 * self.gamma_b)
    }

    /// Measurement gain on `p`, `kappa sqrt(tau)`.
    pub fn readout_gain(&self) -> f64 {
        self.kappa * self.tau.sqrt()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.tau
    }
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self::reference()
    }
}

/// One measurement record paired with the field that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub signal: Vec<f64>,
    pub field: Vec<f64>,
}

impl Record {
    pub fn new(signal: Vec<f64>, field: Vec<f64>) -> Result<Self> {
        if signal.len() != field.len() {
            return Err(Error::LengthMismatch {
                expected: signal.len(),
                got: field.len(),
            });
        }
        if let Some(i) = signal.iter().chain(&field).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i % signal.len().max(1)));
        }
        Ok(Record { signal, field })
    }

    pub fn len(&self) -> usize {
        self.signal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signal.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub params: PhysicsParams,
    pub records: Vec<Record>,
    pub seed: u64,
    pub rng_id: u32,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Checks that every record has `params.n_steps` samples.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        for r in &self.records {
            if r.len() != self.params.n_steps {
                return Err(Error::LengthMismatch {
                    expected: self.params.n_steps,
                    got: r.len(),
                });
            }
        }
        Ok(())
    }

    /// A dataset holding a contiguous slice of this one's records.
    pub fn subset(&self, range: std::ops::Range<usize>) -> Dataset {
        Dataset {
            params: self.params,
            records: self.records[range].to_vec(),
            seed: self.seed,
            rng_id: self.rng_id,
        }
    }
}

/// Forces parts of the simulation to fixed values. Random variates are still
/// drawn so the rest of the stream is unchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOverrides {
    pub p0: Option<f64>,
    pub b0: Option<f64>,
    pub shot_noise: bool,
    pub field_noise: bool,
}

impl Default for SimOverrides {
    fn default() -> Self {
        SimOverrides {
            p0: None,
            b0: None,
            shot_noise: true,
            field_noise: true,
        }
    }
}

impl SimOverrides {
    /// All noise removed; the record is the deterministic image of `(b0, p0)`.
    pub fn noiseless(b0: f64, p0: f64) -> Self {
        SimOverrides {
            p0: Some(p0),
            b0: Some(b0),
            shot_noise: false,
            field_noise: false,
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Euler-Maruyama recurrence driven by explicit Wiener increments `dw`
/// (each nominally `N(0, tau)`). Returns `dw.len() + 1` samples.
pub fn ou_path_from_increments(params: &PhysicsParams, b0: f64, dw: &[f64]) -> Vec<f64> {
    let decay = 1.0 - params.gamma_b * params.tau;
    let diffusion = params.sigma_b.sqrt();
    let mut path = Vec::with_capacity(dw.len() + 1);
    let mut b = b0;
    path.push(b);
    for &w in dw {
        b = decay * b + diffusion * w;
        path.push(b);
    }
    path
}

/// Samples a field path of `n_steps` values starting from the stationary law.
pub fn sample_ou_path<R: Rng + ?Sized>(params: &PhysicsParams, rng: &mut R) -> Result<Vec<f64>> {
    params.validate_for_sampling()?;
    let b0 = params.stationary_variance().sqrt() * normal(rng);
    let dw = wiener_increments(params, rng);
    Ok(ou_path_from_increments(params, b0, &dw))
}

fn wiener_increments<R: Rng + ?Sized>(params: &PhysicsParams, rng: &mut R) -> Vec<f64> {
    let scale = params.tau.sqrt();
    (0..params.n_steps - 1).map(|_| scale * normal(rng)).collect()
}

/// The measurement map: given the field path, the initial quadrature and the
/// shot-noise samples, emits `x_k = kappa sqrt(tau) p_k + shot_k` and then
/// kicks `p` by `-mu tau B_k`.
pub fn record_from_parts(params: &PhysicsParams, field: Vec<f64>, p0: f64, shot: &[f64]) -> Result<Record> {
    if shot.len() != field.len() {
        return Err(Error::LengthMismatch {
            expected: field.len(),
            got: shot.len(),
        });
    }
    let gain = params.readout_gain();
    let kick = params.mu * params.tau;
    let mut p = p0;
    let mut signal = Vec::with_capacity(field.len());
    for (&b, &v) in field.iter().zip(shot) {
        signal.push(gain * p + v);
        p -= kick * b;
    }
    Record::new(signal, field)
}

pub fn simulate_record<R: Rng + ?Sized>(params: &PhysicsParams, rng: &mut R) -> Result<Record> {
    simulate_record_with(params, rng, &SimOverrides::default())
}

/// Variates are drawn in a fixed order: `p_0`, `B_0`, the `N_T - 1` Wiener
/// increments, then the `N_T` shot-noise samples.
pub fn simulate_record_with<R: Rng + ?Sized>(
    params: &PhysicsParams,
    rng: &mut R,
    overrides: &SimOverrides,
) -> Result<Record> {
    params.validate_for_sampling()?;
    let n = params.n_steps;
    let quad_sd = QUADRATURE_VARIANCE.sqrt();

    let p0_draw = quad_sd * normal(rng);
    let b0_draw = params.stationary_variance().sqrt() * normal(rng);
    let mut dw = wiener_increments(params, rng);
    let mut shot: Vec<f64> = (0..n).map(|_| quad_sd * normal(rng)).collect();

    if !overrides.field_noise {
        dw.iter_mut().for_each(|w| *w = 0.0);
    }
    if !overrides.shot_noise {
        shot.iter_mut().for_each(|v| *v = 0.0);
    }
    let p0 = overrides.p0.unwrap_or(p0_draw);
    let b0 = overrides.b0.unwrap_or(b0_draw);

    let field = ou_path_from_increments(params, b0, &dw);
    record_from_parts(params, field, p0, &shot)
}

/// Generates `count` records; record `i` uses its own stream derived from
/// `(seed, i)`, so the output does not depend on the rayon pool size.
pub fn generate_dataset(params: &PhysicsParams, count: usize, seed: u64) -> Result<Dataset> {
    generate_dataset_with(params, count, seed, &SimOverrides::default())
}

pub fn generate_dataset_with(
    params: &PhysicsParams,
    count: usize,
    seed: u64,
    overrides: &SimOverrides,
) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::InvalidParams("record count must be >= 1".into()));
    }
    params.validate_for_sampling()?;
    let records = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, Domain::Record, i as u64);
            simulate_record_with(params, &mut rng, overrides)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        params: *params,
        records,
        seed,
        rng_id: RNG_ID_CHACHA20_STREAM,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn rejects_unstable_discretization() {
        let p = PhysicsParams {
            gamma_b: 100.0,
            ..PhysicsParams::reference()
        };
        let mut rng = stream(0, Domain::Record, 0);
        assert!(matches!(
            sample_ou_path(&p, &mut rng),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn rejects_invalid_params() {
        let base = PhysicsParams::reference();
        for bad in [
            PhysicsParams { tau: 0.0, ..base },
            PhysicsParams { n_steps: 1, ..base },
            PhysicsParams { gamma_b: 0.0, ..base },
            PhysicsParams {
                sigma_b: -1.0,
                ..base
            },
            PhysicsParams {
                kappa: f64::NAN,
                ..base
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        assert!(base.validate().is_ok());
        assert!((base.duration() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_decay_is_geometric() {
        let p = PhysicsParams {
            sigma_b: 0.0,
            ..PhysicsParams::reference()
        };
        let path = ou_path_from_increments(&p, 1.0, &vec![0.3; p.n_steps - 1]);
        for (k, b) in path.iter().enumerate() {
            assert!((b - 0.99f64.powi(k as i32)).abs() < 1e-14, "k = {k}");
        }
    }

    #[test]
    fn fixed_increments_match_scalar_recurrence() {
        let p = PhysicsParams {
            n_steps: 3,
            ..PhysicsParams::reference()
        };
        // B1 = 0 - 0 + sqrt(2) * 0.1, B2 = B1 * 0.99 + sqrt(2) * (-0.05)
        let b1 = 0.141_421_356_237_309_53;
        let b2 = 0.069_296_464_556_281_68;
        let path = ou_path_from_increments(&p, 0.0, &[0.1, -0.05]);
        assert_eq!(path.len(), 3);
        assert!((path[1] - b1).abs() < 1e-12);
        assert!((path[2] - b2).abs() < 1e-12);
    }

    #[test]
    fn constant_field_gives_linear_ramp() {
        let p = PhysicsParams {
            sigma_b: 0.0,
            ..PhysicsParams::reference()
        };
        let mut rng = stream(3, Domain::Record, 0);
        let ov = SimOverrides {
            p0: Some(0.0),
            b0: Some(1.0),
            shot_noise: false,
            field_noise: true,
        };
        let rec = simulate_record_with(&p, &mut rng, &ov).unwrap();
        // sigma_b = 0 leaves B_k = 0.99^k, so the ramp bends; check the map itself.
        let mut pk = 0.0;
        for k in 0..p.n_steps {
            let expected = p.readout_gain() * pk;
            assert!((rec.signal[k] - expected).abs() < 1e-10);
            pk -= p.mu * p.tau * rec.field[k];
        }
        // With the field held exactly at 1 pT the mean signal is a straight line.
        let flat = vec![1.0; p.n_steps];
        let rec = record_from_parts(&p, flat, 0.0, &vec![0.0; p.n_steps]).unwrap();
        for k in 0..p.n_steps {
            let line = p.readout_gain() * (-p.mu * p.tau * k as f64);
            assert!((rec.signal[k] - line).abs() < 1e-10);
        }
    }

    #[test]
    fn record_rejects_mismatch_and_nan() {
        assert!(matches!(
            Record::new(vec![0.0; 3], vec![0.0; 2]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            Record::new(vec![0.0, f64::NAN], vec![0.0; 2]),
            Err(Error::NonFinite(1))
        ));
    }

    #[test]
    fn generate_rejects_zero_count() {
        assert!(generate_dataset(&PhysicsParams::reference(), 0, 1).is_err());
    }

    #[test]
    fn overrides_keep_the_stream_aligned() {
        let p = PhysicsParams::reference();
        let a = simulate_record(&p, &mut stream(5, Domain::Record, 0)).unwrap();
        let ov = SimOverrides {
            p0: Some(0.0),
            ..SimOverrides::default()
        };
        let b = simulate_record_with(&p, &mut stream(5, Domain::Record, 0), &ov).unwrap();
        assert_eq!(a.field, b.field);
    }
}
