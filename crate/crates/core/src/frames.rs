//! Frame buffers, sequences and the synthetic-scene generator.
//!
//! Samples are 8-bit, row-major and channel-interleaved. The generator
//! renders textured rectangles and ellipses moving at constant integer or
//! half-integer velocity, so every test that needs ground-truth motion can
//! get it by construction.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Smallest frame side accepted by sequences and motion estimation.
pub const MIN_SIDE: usize = 16;
/// Synthetic frames must tile the fixed 16×16 macroblock grid.
pub const MACROBLOCK: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl FrameBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "zero-sized frame",
            });
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter {
                name: "channels",
                reason: "must be 1 or 3",
            });
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::DataLength {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Sample with coordinates clamped to the frame edge.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize, c: usize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y, c)
    }

    pub fn same_shape(&self, other: &FrameBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Box-filter downscale by an integer factor (rounded mean).
    pub fn downscale(&self, factor: usize) -> Result<FrameBuffer> {
        if factor == 0 {
            return Err(Error::InvalidParameter {
                name: "downscale factor",
                reason: "must be at least 1",
            });
        }
        if !self.width.is_multiple_of(factor) || !self.height.is_multiple_of(factor) {
            return Err(Error::InvalidDimensions {
                width: self.width,
                height: self.height,
                reason: "not divisible by the downscale factor",
            });
        }
        let (w, h) = (self.width / factor, self.height / factor);
        let area = (factor * factor) as u32;
        let mut out = Vec::with_capacity(w * h * self.channels);
        for y in 0..h {
            for x in 0..w {
                for c in 0..self.channels {
                    let mut acc = 0u32;
                    for dy in 0..factor {
                        for dx in 0..factor {
                            acc += self.get(x * factor + dx, y * factor + dy, c) as u32;
                        }
                    }
                    out.push(((acc + area / 2) / area) as u8);
                }
            }
        }
        FrameBuffer::new(w, h, self.channels, out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<FrameBuffer>,
    fps: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<FrameBuffer>, fps: f64) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::SequenceTooShort {
                frames: frames.len(),
            });
        }
        let first = &frames[0];
        if first.width < MIN_SIDE || first.height < MIN_SIDE {
            return Err(Error::InvalidDimensions {
                width: first.width,
                height: first.height,
                reason: "frames must be at least 16x16",
            });
        }
        if let Some(bad) = frames.iter().find(|f| !f.same_shape(first)) {
            return Err(Error::ShapeMismatch {
                what: "frame size",
                expected: first.data.len(),
                actual: bad.data.len(),
            });
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidParameter {
                name: "fps",
                reason: "must be positive",
            });
        }
        Ok(Self { frames, fps })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[FrameBuffer] {
        &self.frames
    }

    /// 1-based frame access, matching anchor indices.
    #[inline]
    pub fn frame(&self, index: usize) -> &FrameBuffer {
        &self.frames[index - 1]
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn channels(&self) -> usize {
        self.frames[0].channels
    }

    pub fn duration_seconds(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Shape {
    Rect,
    Ellipse,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SceneObject {
    pub shape: Shape,
    /// Extent in pixels, `(width, height)`.
    pub size: (usize, usize),
    /// Integer top-left corner at t = 0.
    pub origin: (i64, i64),
    /// Pixels per frame; each component integer or half-integer.
    pub velocity: (f64, f64),
    pub intensity: u8,
    /// Amplitude of the deterministic surface texture (0 = flat fill).
    pub texture: u8,
}

impl SceneObject {
    fn velocity_half_units(&self, index: usize) -> Result<(i64, i64)> {
        let conv = |v: f64| {
            let twice = v * 2.0;
            (twice.is_finite() && libm::round(twice) == twice && libm::fabs(twice) < 1e9)
                .then_some(twice as i64)
        };
        match (conv(self.velocity.0), conv(self.velocity.1)) {
            (Some(x), Some(y)) => Ok((x, y)),
            _ => Err(Error::InvalidVelocity { object: index }),
        }
    }

    /// Top-left corner at frame `t` (0-based) in half-pixel units.
    fn position_half_units(&self, vel: (i64, i64), t: usize) -> (i64, i64) {
        (
            2 * self.origin.0 + vel.0 * t as i64,
            2 * self.origin.1 + vel.1 * t as i64,
        )
    }

    fn inside(&self, qx: i64, qy: i64) -> bool {
        let (w, h) = (self.size.0 as i64, self.size.1 as i64);
        if qx < 0 || qy < 0 || qx >= w || qy >= h {
            return false;
        }
        match self.shape {
            Shape::Rect => true,
            Shape::Ellipse => {
                let ex = 2 * qx + 1 - w;
                let ey = 2 * qy + 1 - h;
                ex * ex * h * h + ey * ey * w * w <= w * w * h * h
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SceneSpec {
    pub objects: Vec<SceneObject>,
    pub background: u8,
    pub noise_amplitude: u8,
    pub channels: usize,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            objects: Vec::new(),
            background: 0,
            noise_amplitude: 0,
            channels: 1,
            seed: 0,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SceneSpec {
    /// Object-local sample: textured fill inside the support, background
    /// outside. The texture travels with the object.
    fn layer(&self, index: usize, obj: &SceneObject, qx: i64, qy: i64, c: usize) -> u32 {
        if !obj.inside(qx, qy) {
            return self.background as u32;
        }
        let base = obj.intensity as i64;
        if obj.texture == 0 {
            return base as u32;
        }
        let span = 2 * obj.texture as u64 + 1;
        let key = self.seed
            ^ splitmix(index as u64 + 1)
            ^ splitmix((qx as u64) << 32 ^ qy as u64 ^ (c as u64) << 58);
        let jitter = (splitmix(key) % span) as i64 - obj.texture as i64;
        (base + jitter).clamp(0, 255) as u32
    }

    /// Whether pixel `(x, y)` of frame `t` is rendered entirely from the
    /// interior of object `index` (every interpolation tap inside its
    /// support and no later object drawn on top).
    pub fn covers(&self, index: usize, t: usize, x: usize, y: usize) -> bool {
        let Some(obj) = self.objects.get(index) else {
            return false;
        };
        let Ok(vel) = obj.velocity_half_units(index) else {
            return false;
        };
        let taps_inside = |o: &SceneObject, v: (i64, i64)| {
            let pos = o.position_half_units(v, t);
            let qx2 = 2 * x as i64 - pos.0;
            let qy2 = 2 * y as i64 - pos.1;
            let (ix, fx) = (qx2.div_euclid(2), qx2.rem_euclid(2));
            let (iy, fy) = (qy2.div_euclid(2), qy2.rem_euclid(2));
            let all = o.inside(ix, iy)
                && (fx == 0 || o.inside(ix + 1, iy))
                && (fy == 0 || o.inside(ix, iy + 1))
                && (fx == 0 || fy == 0 || o.inside(ix + 1, iy + 1));
            let any = o.inside(ix, iy)
                || (fx == 1 && o.inside(ix + 1, iy))
                || (fy == 1 && o.inside(ix, iy + 1))
                || (fx == 1 && fy == 1 && o.inside(ix + 1, iy + 1));
            (all, any)
        };
        if !taps_inside(obj, vel).0 {
            return false;
        }
        self.objects.iter().enumerate().skip(index + 1).all(|(j, o)| {
            o.velocity_half_units(j)
                .map(|v| !taps_inside(o, v).1)
                .unwrap_or(true)
        })
    }
}

/// Render `frames` frames of `spec` at `width`×`height`.
pub fn gen_synthetic(
    spec: &SceneSpec,
    frames: usize,
    width: usize,
    height: usize,
) -> Result<FrameSequence> {
    if frames < 2 {
        return Err(Error::SequenceTooShort { frames });
    }
    if width < MIN_SIDE || height < MIN_SIDE || !width.is_multiple_of(MACROBLOCK) || !height.is_multiple_of(MACROBLOCK)
    {
        return Err(Error::InvalidDimensions {
            width,
            height,
            reason: "synthetic frames must be positive multiples of 16",
        });
    }
    if spec.channels != 1 && spec.channels != 3 {
        return Err(Error::InvalidParameter {
            name: "channels",
            reason: "must be 1 or 3",
        });
    }

    let mut velocities = Vec::with_capacity(spec.objects.len());
    for (i, obj) in spec.objects.iter().enumerate() {
        if obj.size.0 == 0 || obj.size.1 == 0 {
            return Err(Error::InvalidParameter {
                name: "object size",
                reason: "must be positive",
            });
        }
        let vel = obj.velocity_half_units(i)?;
        for t in 0..frames {
            let pos = obj.position_half_units(vel, t);
            // Half-pel positions blend one extra column/row.
            let x0 = pos.0.div_euclid(2);
            let y0 = pos.1.div_euclid(2);
            let x1 = pos.0.div_euclid(2) + pos.0.rem_euclid(2) + obj.size.0 as i64;
            let y1 = pos.1.div_euclid(2) + pos.1.rem_euclid(2) + obj.size.1 as i64;
            if x0 < 0 || y0 < 0 || x1 > width as i64 || y1 > height as i64 {
                return Err(Error::ObjectLeavesFrame {
                    object: i,
                    frame: t,
                });
            }
        }
        velocities.push(vel);
    }

    let ch = spec.channels;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(frames);
    for t in 0..frames {
        let mut data = vec![spec.background; width * height * ch];
        for (i, (obj, &vel)) in spec.objects.iter().zip(&velocities).enumerate() {
            let pos = obj.position_half_units(vel, t);
            let (fx, fy) = (pos.0.rem_euclid(2), pos.1.rem_euclid(2));
            let bx = pos.0.div_euclid(2);
            let by = pos.1.div_euclid(2);
            let x_end = bx + fx + obj.size.0 as i64;
            let y_end = by + fy + obj.size.1 as i64;
            for y in by..y_end {
                for x in bx..x_end {
                    // Object-local tap coordinates: p - pos = (ix + fx/2, iy + fy/2).
                    let ix = x - bx - fx;
                    let iy = y - by - fy;
                    let touched = obj.inside(ix, iy)
                        || (fx == 1 && obj.inside(ix + 1, iy))
                        || (fy == 1 && obj.inside(ix, iy + 1))
                        || (fx == 1 && fy == 1 && obj.inside(ix + 1, iy + 1));
                    if !touched {
                        continue;
                    }
                    for c in 0..ch {
                        let a = spec.layer(i, obj, ix, iy, c);
                        let v = match (fx, fy) {
                            (0, 0) => a,
                            (1, 0) => (a + spec.layer(i, obj, ix + 1, iy, c) + 1) >> 1,
                            (0, _) => (a + spec.layer(i, obj, ix, iy + 1, c) + 1) >> 1,
                            _ => {
                                (a + spec.layer(i, obj, ix + 1, iy, c)
                                    + spec.layer(i, obj, ix, iy + 1, c)
                                    + spec.layer(i, obj, ix + 1, iy + 1, c)
                                    + 2)
                                    >> 2
                            }
                        };
                        data[(y as usize * width + x as usize) * ch + c] = v as u8;
                    }
                }
            }
        }
        if spec.noise_amplitude > 0 {
            let amp = spec.noise_amplitude as i32;
            for s in data.iter_mut() {
                let n: i32 = rng.gen_range(-amp..=amp);
                *s = (*s as i32 + n).clamp(0, 255) as u8;
            }
        }
        out.push(FrameBuffer::new(width, height, ch, data)?);
    }
    FrameSequence::new(out, 30.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(size: usize, origin: (i64, i64), velocity: (f64, f64)) -> SceneObject {
        SceneObject {
            shape: Shape::Rect,
            size: (size, size),
            origin,
            velocity,
            intensity: 200,
            texture: 0,
        }
    }

    #[test]
    fn translated_rect_moves_by_velocity() {
        let spec = SceneSpec {
            objects: vec![SceneObject {
                texture: 40,
                ..rect(32, (40, 40), (4.0, -2.0))
            }],
            background: 10,
            ..Default::default()
        };
        let seq = gen_synthetic(&spec, 3, 128, 128).unwrap();
        let (f1, f2) = (seq.frame(2), seq.frame(3));
        let mut checked = 0;
        for y in 0..128 {
            for x in 0..128 {
                if spec.covers(0, 1, x, y) {
                    assert_eq!(f2.get(x + 4, y - 2, 0), f1.get(x, y, 0));
                    checked += 1;
                }
            }
        }
        assert_eq!(checked, 32 * 32);
    }

    #[test]
    fn empty_scene_is_constant() {
        let seq = gen_synthetic(&SceneSpec::default(), 2, 32, 16).unwrap();
        assert_eq!(seq.len(), 2);
        assert!(seq.frames().iter().all(|f| f.data().iter().all(|&v| v == 0)));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let spec = SceneSpec {
            objects: vec![rect(16, (8, 8), (1.5, 0.5))],
            noise_amplitude: 7,
            seed: 99,
            ..Default::default()
        };
        let a = gen_synthetic(&spec, 4, 64, 64).unwrap();
        let b = gen_synthetic(&spec, 4, 64, 64).unwrap();
        assert_eq!(a, b);
        let other = gen_synthetic(&SceneSpec { seed: 100, ..spec }, 4, 64, 64).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn rejects_object_leaving_frame() {
        let spec = SceneSpec {
            objects: vec![rect(8, (0, 0), (1.0, 0.0)), rect(16, (40, 0), (4.0, 0.0))],
            ..Default::default()
        };
        assert_eq!(
            gen_synthetic(&spec, 4, 64, 64),
            Err(Error::ObjectLeavesFrame {
                object: 1,
                frame: 3
            })
        );
    }

    #[test]
    fn rejects_bad_dimensions_and_velocity() {
        assert!(matches!(
            gen_synthetic(&SceneSpec::default(), 2, 40, 32),
            Err(Error::InvalidDimensions { .. })
        ));
        let spec = SceneSpec {
            objects: vec![rect(8, (10, 10), (0.25, 0.0))],
            ..Default::default()
        };
        assert_eq!(
            gen_synthetic(&spec, 2, 32, 32),
            Err(Error::InvalidVelocity { object: 0 })
        );
        assert!(matches!(
            gen_synthetic(&SceneSpec::default(), 1, 32, 32),
            Err(Error::SequenceTooShort { frames: 1 })
        ));
    }

    #[test]
    fn half_pel_position_blends_neighbours() {
        let spec = SceneSpec {
            objects: vec![rect(4, (2, 2), (0.5, 0.0))],
            background: 0,
            ..Default::default()
        };
        let seq = gen_synthetic(&spec, 2, 16, 16).unwrap();
        let f = seq.frame(2);
        // Left edge half covered, interior full, right edge half covered.
        assert_eq!(f.get(2, 3, 0), 100);
        assert_eq!(f.get(3, 3, 0), 200);
        assert_eq!(f.get(6, 3, 0), 100);
        assert_eq!(f.get(7, 3, 0), 0);
    }

    #[test]
    fn downscale_averages_blocks() {
        let data = (0..16 * 16).map(|i| (i % 2 * 100) as u8).collect();
        let f = FrameBuffer::new(16, 16, 1, data).unwrap();
        let d = f.downscale(2).unwrap();
        assert_eq!((d.width(), d.height()), (8, 8));
        assert!(d.data().iter().all(|&v| v == 50));
    }

    #[test]
    fn sequence_requires_uniform_frames() {
        let a = FrameBuffer::filled(16, 16, 1, 0).unwrap();
        let b = FrameBuffer::filled(32, 16, 1, 0).unwrap();
        assert!(FrameSequence::new(vec![a.clone(), b], 30.0).is_err());
        assert!(FrameSequence::new(vec![a], 30.0).is_err());
    }
}
