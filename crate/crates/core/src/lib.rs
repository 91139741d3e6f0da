//! Chirp spread spectrum modem for short-range underwater acoustic links,
//! with a channel simulator and an evaluation harness.
//!
//! The transmit chain is bits → Hamming(7,4) → diagonal interleaver → Gray
//! mapping → chirp symbols → packet with periodic training symbols. The
//! receiver detects the preamble, tracks drift from the training symbols,
//! resamples each group onto nominal time, equalizes and demodulates.

pub mod channel;
pub mod coding;
pub mod config;
pub mod css;
pub mod equalizer;
pub mod error;
pub mod harness;
pub mod packet;
pub mod pnm;
pub mod receiver;
pub mod seeds;
pub mod signal;
pub mod sync;
pub mod tokens;
pub mod vq;

pub use error::{Error, Result};
