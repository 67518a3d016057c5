//! Compressed-domain extraction: motion fields, residuals and backends.
//!
//! Motion vectors are *forward* displacements in sub-pel units: content at
//! `p` in the reference frame appears at `p + mv / subpel_scale` in the
//! current frame, so the prediction of `cur[p]` is `prev[p - mv]`.

mod compensate;
mod extract;
mod interp;
mod motion;
mod route;
mod sidecar;

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

pub use compensate::{compute_residual, warp};
pub use extract::{
    extract_interval, extract_tristream, ExtractParams, MvAggregation, TriStreamInterval,
};
pub use interp::sample_subpel;
pub use motion::{estimate_motion, MotionSearch};
pub use route::{route_backend, BackendChoice, BackendKind};
pub use sidecar::{field_to_sidecar, sidecar_to_field, SidecarRecord, SIDECAR_BLOCK_SIZES};

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MotionVector {
    pub x: i16,
    pub y: i16,
}

impl MotionVector {
    pub const ZERO: MotionVector = MotionVector { x: 0, y: 0 };

    pub const fn new(x: i16, y: i16) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn l1(self) -> u32 {
        self.x.unsigned_abs() as u32 + self.y.unsigned_abs() as u32
    }

    #[inline]
    pub fn magnitude_sq(self) -> i64 {
        let (x, y) = (self.x as i64, self.y as i64);
        x * x + y * y
    }
}

/// Allowed sub-pel precisions: full, half and quarter pel.
pub const SUBPEL_SCALES: [u32; 3] = [1, 2, 4];

fn check_subpel(scale: u32) -> Result<()> {
    if SUBPEL_SCALES.contains(&scale) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "subpel_scale",
            reason: "must be 1, 2 or 4",
        })
    }
}

/// Block-granular motion field covering a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotionField {
    grid_w: usize,
    grid_h: usize,
    block_size: usize,
    subpel_scale: u32,
    vectors: Vec<MotionVector>,
}

impl MotionField {
    pub fn new(
        grid_w: usize,
        grid_h: usize,
        block_size: usize,
        subpel_scale: u32,
        vectors: Vec<MotionVector>,
    ) -> Result<Self> {
        check_subpel(subpel_scale)?;
        if block_size == 0 || grid_w == 0 || grid_h == 0 {
            return Err(Error::InvalidParameter {
                name: "motion grid",
                reason: "block size and grid extents must be positive",
            });
        }
        if vectors.len() != grid_w * grid_h {
            return Err(Error::ShapeMismatch {
                what: "motion vector count",
                expected: grid_w * grid_h,
                actual: vectors.len(),
            });
        }
        Ok(Self {
            grid_w,
            grid_h,
            block_size,
            subpel_scale,
            vectors,
        })
    }

    pub fn zeros(grid_w: usize, grid_h: usize, block_size: usize, subpel_scale: u32) -> Result<Self> {
        Self::new(
            grid_w,
            grid_h,
            block_size,
            subpel_scale,
            vec![MotionVector::ZERO; grid_w * grid_h],
        )
    }

    /// A field that assigns `mv` to every block of a `width`×`height` frame.
    pub fn uniform(
        width: usize,
        height: usize,
        block_size: usize,
        subpel_scale: u32,
        mv: MotionVector,
    ) -> Result<Self> {
        let (gw, gh) = grid_dims(width, height, block_size)?;
        Self::new(gw, gh, block_size, subpel_scale, vec![mv; gw * gh])
    }

    pub fn grid_w(&self) -> usize {
        self.grid_w
    }

    pub fn grid_h(&self) -> usize {
        self.grid_h
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn subpel_scale(&self) -> u32 {
        self.subpel_scale
    }

    pub fn vectors(&self) -> &[MotionVector] {
        &self.vectors
    }

    #[inline]
    pub fn get(&self, bx: usize, by: usize) -> MotionVector {
        self.vectors[by * self.grid_w + bx]
    }

    pub fn set(&mut self, bx: usize, by: usize, mv: MotionVector) {
        self.vectors[by * self.grid_w + bx] = mv;
    }

    pub fn frame_width(&self) -> usize {
        self.grid_w * self.block_size
    }

    pub fn frame_height(&self) -> usize {
        self.grid_h * self.block_size
    }

    /// Vector of block `(bx, by)` in pixels.
    pub fn displacement(&self, bx: usize, by: usize) -> (f64, f64) {
        let mv = self.get(bx, by);
        let s = self.subpel_scale as f64;
        (mv.x as f64 / s, mv.y as f64 / s)
    }

    /// Mean vector magnitude in pixels.
    pub fn mean_magnitude(&self) -> f64 {
        let s = self.subpel_scale as f64;
        let total: f64 = self
            .vectors
            .iter()
            .map(|v| libm::sqrt(v.magnitude_sq() as f64) / s)
            .sum();
        total / self.vectors.len() as f64
    }

    /// Component-wise mean vector in pixels.
    pub fn mean_vector(&self) -> (f64, f64) {
        let s = self.subpel_scale as f64;
        let n = self.vectors.len() as f64;
        let (sx, sy) = self
            .vectors
            .iter()
            .fold((0i64, 0i64), |(a, b), v| (a + v.x as i64, b + v.y as i64));
        (sx as f64 / s / n, sy as f64 / s / n)
    }

    /// Sum of squared vector lengths in pixels², zero iff the field is zero.
    pub fn energy(&self) -> f64 {
        let s2 = (self.subpel_scale * self.subpel_scale) as f64;
        self.vectors
            .iter()
            .map(|v| v.magnitude_sq() as f64 / s2)
            .sum()
    }

    fn check_frame(&self, width: usize, height: usize) -> Result<()> {
        if self.frame_width() != width || self.frame_height() != height {
            return Err(Error::ShapeMismatch {
                what: "motion field geometry",
                expected: width * height,
                actual: self.frame_width() * self.frame_height(),
            });
        }
        Ok(())
    }
}

pub(crate) fn grid_dims(width: usize, height: usize, block_size: usize) -> Result<(usize, usize)> {
    if block_size == 0 || !width.is_multiple_of(block_size) || !height.is_multiple_of(block_size) {
        return Err(Error::InvalidDimensions {
            width,
            height,
            reason: "not divisible by the block size",
        });
    }
    Ok((width / block_size, height / block_size))
}

/// Signed difference-domain samples, same layout as a [`crate::frames::FrameBuffer`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualMap {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<i16>,
}

impl ResidualMap {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<i16>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::DataLength {
                expected: width * height * channels,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !(-255..=255).contains(v)) {
            return Err(Error::InvalidParameter {
                name: "residual",
                reason: "samples must lie in [-255, 255]",
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[i16] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> i16 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Σ|r| over all samples.
    pub fn abs_sum(&self) -> u64 {
        self.data.iter().map(|v| v.unsigned_abs() as u64).sum()
    }
}
