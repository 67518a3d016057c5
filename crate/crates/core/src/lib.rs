//! Compressed-domain tri-stream video primitives.
//!
//! Everything in this crate is pure computation over in-memory buffers and
//! builds without `std` (an allocator is required). File formats, timing,
//! threading and the command line live in the `tristream` crate.
//!
//! The pipeline, bottom to top:
//!
//! * [`frames`]: frame buffers and a deterministic synthetic-scene generator
//!   with known ground-truth motion.
//! * [`codec`]: block-matching motion estimation, motion-compensated warping,
//!   residuals, sidecar motion-vector ingestion and backend routing.
//! * [`hierarchy`]: anchor selection, interval partitioning and token budgets.
//! * [`adapter`]: branch encoders and gated tri-stream fusion.
//! * [`alignment`]: contrastive / regression alignment losses with analytic
//!   gradients, a finite-difference checker and a small trainer.
//! * [`inject`]: placeholder layouts and out-of-place scatter injection.
//! * [`stats`]: Wilson intervals and accuracy arithmetic.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adapter;
pub mod alignment;
pub mod codec;
mod error;
pub mod frames;
pub mod hierarchy;
pub mod inject;
pub mod linalg;
pub mod stats;

pub use error::{Error, Result};
