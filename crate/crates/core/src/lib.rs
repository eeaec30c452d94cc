//! Synthetic FMCW radar hand-gesture toolkit.
//!
//! The crate is organised bottom-up:
//!
//! * [`radar`]: chirp/frame configuration, the IF beat-signal model and
//!   data-cube synthesis from point scatterers.
//! * [`gesture`]: parametric gesture scenes and labelled dataset generation.
//! * [`dsp`]: range FFT, fourth-order MTI, Doppler FFT and RFDM conditioning.
//! * [`nn`]: a small f64 layer library with hand-written backward passes.
//! * [`model`]: the CNN-TCN classifier, a frame-only CNN baseline and training.
//! * [`eval`]: split construction, confusion matrices and evaluation protocols.
//! * [`io`]: binary cube/RFDM/checkpoint formats and JSON manifests.

pub mod dsp;
pub mod error;
pub mod eval;
pub mod gesture;
pub mod io;
pub mod model;
pub mod nn;
pub mod radar;
pub mod seed;

pub use error::{Error, Result};
