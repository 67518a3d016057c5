//! Full-search block matching with sub-pel refinement.

use alloc::vec::Vec;

use super::interp::sample_subpel;
use super::{check_subpel, grid_dims, MotionField, MotionVector};
use crate::frames::FrameBuffer;
use crate::{Error, Result};

/// Search parameters for [`estimate_motion`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MotionSearch {
    pub block_size: usize,
    /// Maximum displacement in whole pixels along each axis.
    pub search_range: usize,
    pub subpel_scale: u32,
}

impl Default for MotionSearch {
    fn default() -> Self {
        Self {
            block_size: 16,
            search_range: 8,
            subpel_scale: 4,
        }
    }
}

/// SAD of the block at pixel origin `(ox, oy)` of `cur` against `prev`
/// displaced by `(dx, dy)` whole pixels.
fn sad_integer(
    prev: &FrameBuffer,
    cur: &FrameBuffer,
    ox: usize,
    oy: usize,
    bs: usize,
    dx: isize,
    dy: isize,
) -> u64 {
    let ch = cur.channels();
    let sx = ox as isize - dx;
    let sy = oy as isize - dy;
    let inside = sx >= 0
        && sy >= 0
        && sx as usize + bs <= prev.width()
        && sy as usize + bs <= prev.height();
    let mut sad = 0u64;
    if inside {
        let (w, sx, sy) = (cur.width(), sx as usize, sy as usize);
        let (pc, pd) = (cur.data(), prev.data());
        for j in 0..bs {
            let cr = ((oy + j) * w + ox) * ch;
            let pr = ((sy + j) * w + sx) * ch;
            sad += pc[cr..cr + bs * ch]
                .iter()
                .zip(&pd[pr..pr + bs * ch])
                .map(|(&a, &b)| (a as i32 - b as i32).unsigned_abs() as u64)
                .sum::<u64>();
        }
    } else {
        for j in 0..bs {
            for i in 0..bs {
                for c in 0..ch {
                    let a = cur.get(ox + i, oy + j, c) as i32;
                    let b = prev.get_clamped(sx + i as isize, sy + j as isize, c) as i32;
                    sad += (a - b).unsigned_abs() as u64;
                }
            }
        }
    }
    sad
}

/// SAD against `prev` displaced by `(vx, vy)` sub-pel units.
#[allow(clippy::too_many_arguments)]
fn sad_subpel(
    prev: &FrameBuffer,
    cur: &FrameBuffer,
    ox: usize,
    oy: usize,
    bs: usize,
    vx: i64,
    vy: i64,
    scale: u32,
) -> u64 {
    let s = scale as i64;
    let mut sad = 0u64;
    for j in 0..bs {
        for i in 0..bs {
            let xs = (ox + i) as i64 * s - vx;
            let ys = (oy + j) as i64 * s - vy;
            for c in 0..cur.channels() {
                let a = cur.get(ox + i, oy + j, c) as i32;
                let b = sample_subpel(prev, xs, ys, scale, c) as i32;
                sad += (a - b).unsigned_abs() as u64;
            }
        }
    }
    sad
}

/// Lexicographic (SAD, |v|₁) comparison; callers visit candidates in scan
/// order so equal keys keep the earlier one.
#[inline]
fn better(sad: u64, l1: u64, best: (u64, u64)) -> bool {
    (sad, l1) < best
}

/// Estimate the forward motion of every `block_size` block of `cur`
/// relative to `prev`.
///
/// The integer search visits every displacement in `[-R, R]²` row by row.
/// For half- and quarter-pel precision the optimum is then refined in
/// successively finer steps (half pel, then quarter pel), each time over
/// the 3×3 neighbourhood of the current best.
pub fn estimate_motion(
    prev: &FrameBuffer,
    cur: &FrameBuffer,
    search: MotionSearch,
) -> Result<MotionField> {
    if !prev.same_shape(cur) {
        return Err(Error::ShapeMismatch {
            what: "frame size",
            expected: prev.data().len(),
            actual: cur.data().len(),
        });
    }
    check_subpel(search.subpel_scale)?;
    if search.search_range == 0 {
        return Err(Error::InvalidParameter {
            name: "search_range",
            reason: "must be at least 1",
        });
    }
    let bs = search.block_size;
    let (gw, gh) = grid_dims(cur.width(), cur.height(), bs)?;
    let range = search.search_range as isize;
    let scale = search.subpel_scale;
    let limit = range as i64 * scale as i64;
    if limit > i16::MAX as i64 {
        return Err(Error::InvalidParameter {
            name: "search_range",
            reason: "range times sub-pel scale exceeds the 16-bit vector range",
        });
    }

    let mut vectors = Vec::with_capacity(gw * gh);
    for by in 0..gh {
        for bx in 0..gw {
            let (ox, oy) = (bx * bs, by * bs);
            let mut best = (u64::MAX, u64::MAX);
            let mut best_v = (0isize, 0isize);
            for dy in -range..=range {
                for dx in -range..=range {
                    let sad = sad_integer(prev, cur, ox, oy, bs, dx, dy);
                    let l1 = dx.unsigned_abs() as u64 + dy.unsigned_abs() as u64;
                    if better(sad, l1, best) {
                        best = (sad, l1);
                        best_v = (dx, dy);
                    }
                }
            }

            let s = scale as i64;
            let mut v = (best_v.0 as i64 * s, best_v.1 as i64 * s);
            let mut step = s / 2;
            while step >= 1 {
                let center = v;
                let mut level_best = (u64::MAX, u64::MAX);
                for sy in -1..=1i64 {
                    for sx in -1..=1i64 {
                        let cand = (center.0 + sx * step, center.1 + sy * step);
                        if cand.0.abs() > limit || cand.1.abs() > limit {
                            continue;
                        }
                        let sad = sad_subpel(prev, cur, ox, oy, bs, cand.0, cand.1, scale);
                        let l1 = cand.0.unsigned_abs() + cand.1.unsigned_abs();
                        if better(sad, l1, level_best) {
                            level_best = (sad, l1);
                            v = cand;
                        }
                    }
                }
                step /= 2;
            }
            vectors.push(MotionVector::new(v.0 as i16, v.1 as i16));
        }
    }
    MotionField::new(gw, gh, bs, scale, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{gen_synthetic, SceneObject, SceneSpec, Shape};
    use alloc::vec;

    fn textured(velocity: (f64, f64)) -> SceneSpec {
        SceneSpec {
            objects: vec![SceneObject {
                shape: Shape::Rect,
                size: (32, 32),
                origin: (40, 40),
                velocity,
                intensity: 150,
                texture: 60,
            }],
            background: 20,
            seed: 3,
            ..Default::default()
        }
    }

    fn search(range: usize, subpel: u32) -> MotionSearch {
        MotionSearch {
            block_size: 16,
            search_range: range,
            subpel_scale: subpel,
        }
    }

    #[test]
    fn identical_frames_give_zero_field() {
        let seq = gen_synthetic(&textured((0.0, 0.0)), 2, 96, 96).unwrap();
        let f = estimate_motion(seq.frame(1), seq.frame(1), search(8, 4)).unwrap();
        assert!(f.vectors().iter().all(|&v| v == MotionVector::ZERO));
    }

    #[test]
    fn recovers_integer_translation_on_object_blocks() {
        let spec = textured((4.0, -2.0));
        let seq = gen_synthetic(&spec, 2, 128, 128).unwrap();
        let field = estimate_motion(seq.frame(1), seq.frame(2), search(8, 1)).unwrap();
        let mut object_blocks = 0;
        for by in 0..field.grid_h() {
            for bx in 0..field.grid_w() {
                let touches = (0..16)
                    .flat_map(|j| (0..16).map(move |i| (i, j)))
                    .any(|(i, j)| spec.covers(0, 1, bx * 16 + i, by * 16 + j));
                if touches {
                    object_blocks += 1;
                    assert_eq!(field.get(bx, by), MotionVector::new(4, -2), "block {bx},{by}");
                }
            }
        }
        assert!(object_blocks >= 4);
    }

    #[test]
    fn recovers_half_pel_translation() {
        let spec = textured((1.5, 0.0));
        let seq = gen_synthetic(&spec, 2, 128, 128).unwrap();
        let field = estimate_motion(seq.frame(1), seq.frame(2), search(4, 2)).unwrap();
        // Block (3, 3) lies inside the moving object in both frames.
        assert_eq!(field.get(3, 3), MotionVector::new(3, 0));
        let quarter = estimate_motion(seq.frame(1), seq.frame(2), search(4, 4)).unwrap();
        assert_eq!(quarter.get(3, 3), MotionVector::new(6, 0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = FrameBuffer::filled(32, 32, 1, 0).unwrap();
        let b = FrameBuffer::filled(48, 32, 1, 0).unwrap();
        assert!(matches!(
            estimate_motion(&a, &b, search(4, 1)),
            Err(Error::ShapeMismatch { .. })
        ));
        let c = FrameBuffer::filled(40, 32, 1, 0).unwrap();
        assert!(matches!(
            estimate_motion(&c, &c, search(4, 1)),
            Err(Error::InvalidDimensions { .. })
        ));
        assert!(estimate_motion(&a, &a, search(0, 1)).is_err());
        assert!(estimate_motion(&a, &a, search(4, 3)).is_err());
    }
}
