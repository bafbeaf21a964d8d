//! Longitudinal sleep-diary synthesis.
//!
//! The pipeline turns per-person event logs into a fixed-width
//! cross-sectional matrix (30 hourly minutes-asleep bins from 4:00am to
//! 10:00am the next day, plus four covariates), trains a weight-clipped
//! Wasserstein GAN on an encoded form of that matrix, and compares
//! synthetic against real data overall and stratified by covariates.
//!
//! Stages, in pipeline order:
//!
//! - [`simulate`]: parametric population generator (ground-truth fixtures)
//! - [`ingest`]: event CSV parsing and validation
//! - [`temporalize`]: event list to hourly bins and the 34-column matrix
//! - [`codec`]: reversible scaling / one-hot mapping to the GAN space
//! - [`neuralnet`]: dense layers, manual backprop, RMSProp
//! - [`wgan`]: critic/generator training, sampling, checkpoints
//! - [`evaluate`]: per-hour means, covariate probabilities, stratified
//!   grids and quantile curves
//! - [`cli`]: the `lgs` command-line driver

pub mod cli;
pub mod codec;
pub mod covariates;
pub mod evaluate;
pub mod fsutil;
pub mod ingest;
pub mod neuralnet;
pub mod simulate;
pub mod temporalize;
pub mod wgan;

pub use codec::{Codec, CodecError};
pub use covariates::{CovariateSet, DayOfWeek, Month, Sex};
pub use evaluate::{AgeGroup, EvalReport};
pub use ingest::{EventRecord, PersonDay};
pub use temporalize::{FeatureMatrix, FeatureRow, SleepVector};
pub use wgan::{GanConfig, ModelCheckpoint};

/// Length of the observation window in minutes (4:00am to 10:00am next day).
pub const WINDOW_MINUTES: u32 = 1800;
/// Number of hourly bins in the window.
pub const N_BINS: usize = 30;
/// Minutes per bin.
pub const BIN_MINUTES: u32 = 60;
