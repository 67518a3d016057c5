use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
#[non_exhaustive]
pub enum Error {
    /// Frame geometry violates a size rule (too small, not block aligned, ...).
    InvalidDimensions {
        width: usize,
        height: usize,
        reason: &'static str,
    },
    /// Sample buffer length does not match the declared geometry.
    DataLength { expected: usize, actual: usize },
    /// Two buffers that must agree in shape do not.
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    ChannelMismatch { expected: usize, actual: usize },
    SequenceTooShort { frames: usize },
    /// A synthetic object would leave the canvas at the given frame.
    ObjectLeavesFrame { object: usize, frame: usize },
    InvalidVelocity { object: usize },
    /// A scalar parameter is out of its allowed range.
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    MixedMotionScale { first: i32, other: i32 },
    SidecarBlockOutsideFrame { record: usize },
    UnsupportedSidecarSource { record: usize, source: i32 },
    MissingSidecarFrame { framenum: u32 },
    AnchorCount { anchors: usize, frames: usize },
    DuplicateAnchor { index: usize },
    IntervalOutOfRange { interval: usize, frames: usize },
    BatchTooSmall { rows: usize },
    ZeroNormRow { matrix: &'static str, row: usize },
    NonFiniteLoss,
    Diverged { step: usize },
    MissingFusionParams { mode: &'static str },
    EmptyInput { what: &'static str },
    InsufficientRoom { needed: usize, available: usize },
    OverlappingSpans { index: usize },
    InvalidLayout { reason: &'static str },
    UnfrozenPlaceholder { position: usize },
    UnsupportedConfidence,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDimensions {
                width,
                height,
                reason,
            } => write!(f, "invalid dimensions {width}x{height}: {reason}"),
            Error::DataLength { expected, actual } => {
                write!(f, "sample buffer holds {actual} bytes, expected {expected}")
            }
            Error::ShapeMismatch {
                what,
                expected,
                actual,
            } => write!(f, "{what} mismatch: expected {expected}, got {actual}"),
            Error::ChannelMismatch { expected, actual } => {
                write!(f, "expected {expected} channels, got {actual}")
            }
            Error::SequenceTooShort { frames } => {
                write!(f, "sequence has {frames} frames, at least 2 required")
            }
            Error::ObjectLeavesFrame { object, frame } => {
                write!(f, "object {object} leaves the frame at t={frame}")
            }
            Error::InvalidVelocity { object } => write!(
                f,
                "object {object}: velocity must be integer or half-integer pixels/frame"
            ),
            Error::InvalidParameter { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::MixedMotionScale { first, other } => {
                write!(f, "mixed motion_scale values {first} and {other}")
            }
            Error::SidecarBlockOutsideFrame { record } => {
                write!(f, "sidecar record {record} lies outside the frame")
            }
            Error::UnsupportedSidecarSource { record, source } => write!(
                f,
                "sidecar record {record} has source {source}; only past references (-1) are supported"
            ),
            Error::MissingSidecarFrame { framenum } => {
                write!(f, "no sidecar records for frame {framenum}")
            }
            Error::AnchorCount { anchors, frames } => {
                write!(f, "cannot place {anchors} anchors in {frames} frames")
            }
            Error::DuplicateAnchor { index } => write!(f, "duplicate anchor index {index}"),
            Error::IntervalOutOfRange { interval, frames } => {
                write!(f, "interval {interval} exceeds the {frames}-frame sequence")
            }
            Error::BatchTooSmall { rows } => {
                write!(f, "contrastive batch needs at least 2 rows, got {rows}")
            }
            Error::ZeroNormRow { matrix, row } => write!(f, "row {row} of {matrix} has zero norm"),
            Error::NonFiniteLoss => f.write_str("loss is not finite"),
            Error::Diverged { step } => write!(f, "training diverged at step {step}"),
            Error::MissingFusionParams { mode } => {
                write!(f, "fusion mode {mode} requires matching parameters")
            }
            Error::EmptyInput { what } => write!(f, "{what} is empty"),
            Error::InsufficientRoom { needed, available } => write!(
                f,
                "placeholder layout needs {needed} free slots, only {available} available"
            ),
            Error::OverlappingSpans { index } => {
                write!(f, "anchor span {index} overlaps its predecessor or the sequence end")
            }
            Error::InvalidLayout { reason } => write!(f, "invalid placeholder layout: {reason}"),
            Error::UnfrozenPlaceholder { position } => {
                write!(f, "placeholder row {position} is not marked frozen")
            }
            Error::UnsupportedConfidence => {
                f.write_str("confidence must be one of 0.90, 0.95, 0.99")
            }
        }
    }
}

impl core::error::Error for Error {}
