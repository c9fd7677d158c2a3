//! Link-level simulation of 1-bit quantized, oversampled, faster-than-Nyquist
//! QPSK with run-length limited input.

pub mod channel;
pub mod cli;
pub mod cpm;
pub mod equalizer;
pub mod error;
pub mod estimation;
pub mod fec;
pub mod rate;
pub mod rll;
pub mod rng;
pub mod special;
pub mod trellis;
pub mod waveform;

pub use error::{Result, ZxmError};
