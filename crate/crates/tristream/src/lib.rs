//! IO, file formats and orchestration around [`tristream_core`].
//!
//! Everything here needs `std`: raw and PNM frame files, the sidecar CSV,
//! the `.trs` container, interval-parallel extraction, latency benchmarks,
//! trainer config files and the JSON reports emitted by the CLI.

pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod sidecar;
pub mod train;
pub mod trs;
pub mod visualize;

pub use error::{Error, Result};
pub use tristream_core as core;
