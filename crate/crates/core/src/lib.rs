//! Simulation, optimal Gaussian estimation and an encoder-decoder LSTM
//! estimator for fluctuating magnetic fields seen through a continuous
//! Faraday-rotation record.
//!
//! * [`sim`] draws Ornstein-Uhlenbeck field paths and measurement records and
//!   stores datasets.
//! * [`filter`] is the Kalman filter / RTS smoother baseline plus a dense
//!   joint-Gaussian oracle.
//! * [`nn`] is a from-scratch LSTM encoder-decoder with hand-derived gradients.
//! * [`train`] runs ADAM training, autoregressive prediction and evaluation.
//! * [`compare`] puts the network and the smoother side by side.

pub mod compare;
pub mod error;
pub mod filter;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
pub use filter::{GaussianBelief, StateSpaceModel};
pub use metrics::ErrorCurve;
pub use nn::{Gradients, LstmParams, LstmState, Seq2SeqModel};
pub use sim::{Dataset, PhysicsParams, Record};
pub use train::{TrainConfig, TrainReport};
