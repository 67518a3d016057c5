//! The four-direction synthetic motion set used for desk-scale alignment.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::features::{host_features, visual_delta};
use crate::adapter::FeatureMap;
use crate::codec::{extract_interval, BackendChoice, BackendKind, ExtractParams, MotionSearch};
use crate::frames::{gen_synthetic, SceneObject, SceneSpec, Shape};
use crate::hierarchy::{AnchorRule, Decomposition, IntervalConvention};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MotionClass {
    Up,
    Down,
    Left,
    Right,
}

impl MotionClass {
    pub const ALL: [MotionClass; 4] = [
        MotionClass::Up,
        MotionClass::Down,
        MotionClass::Left,
        MotionClass::Right,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MotionClass::Up => "up",
            MotionClass::Down => "down",
            MotionClass::Left => "left",
            MotionClass::Right => "right",
        }
    }

    fn unit(self) -> (i64, i64) {
        match self {
            MotionClass::Up => (0, -1),
            MotionClass::Down => (0, 1),
            MotionClass::Left => (-1, 0),
            MotionClass::Right => (1, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub clips: usize,
    pub frames: usize,
    pub anchors: usize,
    /// Square frame side, a multiple of 16.
    pub size: usize,
    pub search: MotionSearch,
    pub feature_patch: usize,
    pub ifr_downscale: usize,
    pub noise: u8,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            clips: 64,
            frames: 9,
            anchors: 5,
            size: 64,
            search: MotionSearch {
                block_size: 16,
                search_range: 4,
                subpel_scale: 1,
            },
            feature_patch: 8,
            ifr_downscale: 2,
            noise: 0,
            seed: 0,
        }
    }
}

/// One interval: its three codec maps, the visual-delta target and the
/// clip's motion class.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub mv: FeatureMap,
    pub res: FeatureMap,
    pub ifr: FeatureMap,
    pub target: Vec<f64>,
    pub class: MotionClass,
    pub clip: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionDataset {
    pub samples: Vec<Sample>,
}

impl MotionDataset {
    /// Balanced clips of one textured object translating up, down, left or
    /// right at 1–3 px/frame. Intervals bracket consecutive anchors so each
    /// has a visual delta.
    pub fn synthetic(config: &DatasetConfig) -> Result<Self> {
        if config.clips == 0 {
            return Err(Error::EmptyInput { what: "dataset" });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let decomp = Decomposition::new(
            config.frames,
            config.anchors,
            AnchorRule::Center,
            IntervalConvention::Between,
        )?;
        if decomp.intervals.is_empty() {
            return Err(Error::AnchorCount {
                anchors: config.anchors,
                frames: config.frames,
            });
        }
        let backend = BackendChoice::new(BackendKind::RgbProxy, "synthetic dataset");
        let params = ExtractParams {
            search: config.search,
            ifr_downscale: config.ifr_downscale,
            ..ExtractParams::default()
        };
        let size = config.size as i64;
        let mut samples = Vec::with_capacity(config.clips * decomp.intervals.len());
        for clip in 0..config.clips {
            let class = MotionClass::ALL[clip % 4];
            let speed = rng.gen_range(1..=3i64);
            let side = rng.gen_range(12..=24i64);
            let travel = speed * (config.frames as i64 - 1);
            if side + travel > size {
                return Err(Error::InvalidParameter {
                    name: "dataset geometry",
                    reason: "frames too small for the object travel",
                });
            }
            let (ux, uy) = class.unit();
            let mut axis_origin = |u: i64| {
                let lo = if u < 0 { travel } else { 0 };
                let hi = size - side - if u > 0 { travel } else { 0 };
                rng.gen_range(lo..=hi)
            };
            let origin = (axis_origin(ux), axis_origin(uy));
            let spec = SceneSpec {
                objects: vec![SceneObject {
                    shape: if rng.gen_bool(0.5) { Shape::Rect } else { Shape::Ellipse },
                    size: (side as usize, side as usize),
                    origin,
                    velocity: ((ux * speed) as f64, (uy * speed) as f64),
                    intensity: rng.gen_range(140..=240),
                    texture: rng.gen_range(20..=50),
                }],
                background: rng.gen_range(0..=60),
                noise_amplitude: config.noise,
                channels: 1,
                seed: rng.gen(),
            };
            let seq = gen_synthetic(&spec, config.frames, config.size, config.size)?;
            for (k, interval) in decomp.intervals.iter().enumerate() {
                let tri = extract_interval(&seq, &decomp, k, &backend, &params)?;
                let end = decomp.anchors[interval.end_anchor.unwrap_or(interval.start_anchor)];
                let prev = host_features(seq.frame(interval.start), config.feature_patch)?;
                let next = host_features(seq.frame(end), config.feature_patch)?;
                samples.push(Sample {
                    mv: FeatureMap::from_motion(&tri.mv),
                    res: FeatureMap::from_residual(&tri.residual),
                    ifr: FeatureMap::from_frame(&tri.ifr),
                    target: visual_delta(&next, &prev)?,
                    class,
                    clip,
                });
            }
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn target_dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.target.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;

    #[test]
    fn small_set_is_balanced_and_nondegenerate() {
        let cfg = DatasetConfig {
            clips: 8,
            ..Default::default()
        };
        let ds = MotionDataset::synthetic(&cfg).unwrap();
        assert_eq!(ds.len(), 8 * 4);
        assert_eq!(ds.target_dim(), 6);
        for class in MotionClass::ALL {
            assert_eq!(ds.samples.iter().filter(|s| s.class == class).count(), 8);
        }
        assert!(ds.samples.iter().all(|s| norm(&s.target) > 0.0));
        // Horizontal motion moves the x-moment, vertical the y-moment.
        for s in &ds.samples {
            let (dx, dy) = (s.target[1], s.target[2]);
            match s.class {
                MotionClass::Right => assert!(dx > 0.0),
                MotionClass::Left => assert!(dx < 0.0),
                MotionClass::Down => assert!(dy > 0.0),
                MotionClass::Up => assert!(dy < 0.0),
            }
        }
        assert_eq!(ds, MotionDataset::synthetic(&cfg).unwrap());
    }
}
