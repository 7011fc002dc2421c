//! Multifidelity Gaussian-process emulation with augmented Bayesian treed
//! co-kriging.
//!
//! The library fits autoregressive co-kriging models
//!
//! ```text
//! y_t(x) = xi_{t-1}(x) * y_{t-1}(x) + delta_t(x),   t = 2, ..., S
//! ```
//!
//! to computer-model outputs observed at `S` fidelity levels whose designs
//! need not be hierarchically nested. Non-nested designs are handled by a
//! data-augmentation scheme that treats the outputs a nested design *would*
//! have contained as missing data, a binary treed partition of the input
//! domain captures non-stationarity, and inference runs through a collapsed
//! reversible-jump MCMC sampler. Prediction uses a Monte Carlo recursive
//! Student-T emulator.
//!
//! Start with the runnable examples (`cargo run --example fit_two_level`),
//! or with [`sampler::run_sampler`] and [`emulator::recursive_draw`] for the
//! library API. The `abtck` binary exposes `fit`, `predict`, `impute` and
//! `benchmark` subcommands over the same machinery.

pub mod bench;
pub mod design;
pub mod emulator;
pub mod error;
pub mod gpcore;
pub mod sampler;
pub mod treepart;

pub use error::{Error, Result};
