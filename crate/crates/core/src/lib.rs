//! Models for running decoy-state BB84 on the same fibre as coherent
//! terabit WDM traffic.
//!
//! - [`channel`]: fibre loss, forward/backward spontaneous Raman noise,
//!   filter crosstalk and conversion to detector counts.
//! - [`keyrate`]: gain/QBER model, vacuum + weak decoy bounds, finite-block
//!   fluctuations and the secure key rate.
//! - [`classical`]: frame/FEC throughput and a calibrated BER-vs-launch-power model.
//! - [`planner`]: wavelength choice, power crossover, distance sweeps and joint plans.
//! - [`simkd`]: pulse-level Monte Carlo of the quantum link.
//! - [`postproc`]: cascade, CRC verification, Toeplitz privacy amplification
//!   and a pre-shared-key authenticator.
//! - [`presets`]: the parameter sets of the reference deployment.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod classical;
pub mod error;
pub mod keyrate;
pub mod planner;
pub mod postproc;
pub mod presets;
pub mod simkd;
pub mod units;

pub use error::{Error, Result};
