//! Frozen host-feature stand-in and the visual-delta target.
//!
//! Each feature-grid position is a fine `patch × patch` cell. Its vector
//! concatenates, per channel, the cell's mean intensity and the mean of its
//! enclosing `2·patch` cell, each also modulated by the cell's normalised
//! centre coordinates `(x, y) ∈ [−1, 1]²`. The positional modulation is
//! what lets a mean-pooled difference see *where* appearance moved; plain
//! patch means would pool a translation away entirely.

use alloc::vec::Vec;

use crate::frames::FrameBuffer;
use crate::{Error, Result};

/// Feature values per channel: (mean, mean·x, mean·y) at two scales.
const PER_CHANNEL: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub positions: usize,
    pub dim: usize,
    /// `positions × dim`, row-major.
    pub data: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(positions: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != positions * dim {
            return Err(Error::DataLength {
                expected: positions * dim,
                actual: data.len(),
            });
        }
        Ok(Self {
            positions,
            dim,
            data,
        })
    }
}

fn cell_mean(frame: &FrameBuffer, x0: usize, y0: usize, size: usize, c: usize) -> f64 {
    let mut acc = 0u64;
    for y in y0..y0 + size {
        for x in x0..x0 + size {
            acc += frame.get(x, y, c) as u64;
        }
    }
    acc as f64 / (size * size) as f64 / 255.0
}

fn centre(i: usize, cells: usize) -> f64 {
    (2 * i + 1) as f64 / cells as f64 - 1.0
}

/// Two-scale positional moment features of `frame`.
pub fn host_features(frame: &FrameBuffer, patch: usize) -> Result<FeatureGrid> {
    let coarse = 2 * patch;
    if patch == 0 || !frame.width().is_multiple_of(coarse) || !frame.height().is_multiple_of(coarse) {
        return Err(Error::InvalidDimensions {
            width: frame.width(),
            height: frame.height(),
            reason: "not divisible by twice the feature patch",
        });
    }
    let (gw, gh) = (frame.width() / patch, frame.height() / patch);
    let (cw, ch) = (gw / 2, gh / 2);
    let dim = PER_CHANNEL * frame.channels();
    let mut data = Vec::with_capacity(gw * gh * dim);
    for gy in 0..gh {
        for gx in 0..gw {
            let (fx, fy) = (centre(gx, gw), centre(gy, gh));
            let (cx, cy) = (centre(gx / 2, cw), centre(gy / 2, ch));
            for c in 0..frame.channels() {
                let fine = cell_mean(frame, gx * patch, gy * patch, patch, c);
                let wide = cell_mean(frame, gx / 2 * coarse, gy / 2 * coarse, coarse, c);
                data.extend_from_slice(&[fine, fine * fx, fine * fy, wide, wide * cx, wide * cy]);
            }
        }
    }
    FeatureGrid::new(gw * gh, dim, data)
}

/// Mean over grid positions of `next − prev`.
pub fn visual_delta(next: &FeatureGrid, prev: &FeatureGrid) -> Result<Vec<f64>> {
    if next.positions != prev.positions || next.dim != prev.dim {
        return Err(Error::ShapeMismatch {
            what: "feature grid",
            expected: prev.positions * prev.dim,
            actual: next.positions * next.dim,
        });
    }
    let mut v = alloc::vec![0.0; next.dim];
    for (i, (a, b)) in next.data.iter().zip(&prev.data).enumerate() {
        v[i % next.dim] += a - b;
    }
    let n = next.positions as f64;
    v.iter_mut().for_each(|x| *x /= n);
    Ok(v)
}
