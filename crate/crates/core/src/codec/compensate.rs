use alloc::vec::Vec;

use super::interp::sample_subpel;
use super::{MotionField, ResidualMap};
use crate::frames::FrameBuffer;
use crate::{Error, Result};

/// Motion-compensated prediction: every block copies `prev` displaced by its
/// vector, with sub-pel interpolation and edge clamping.
pub fn warp(prev: &FrameBuffer, field: &MotionField) -> Result<FrameBuffer> {
    field.check_frame(prev.width(), prev.height())?;
    let (w, ch) = (prev.width(), prev.channels());
    let bs = field.block_size();
    let scale = field.subpel_scale();
    let s = scale as i64;
    let mut out = Vec::with_capacity(prev.data().len());
    for y in 0..prev.height() {
        for x in 0..w {
            let mv = field.get(x / bs, y / bs);
            let xs = x as i64 * s - mv.x as i64;
            let ys = y as i64 * s - mv.y as i64;
            for c in 0..ch {
                out.push(sample_subpel(prev, xs, ys, scale, c));
            }
        }
    }
    FrameBuffer::new(w, prev.height(), ch, out)
}

/// `cur − warped`, elementwise in the signed domain.
pub fn compute_residual(cur: &FrameBuffer, warped: &FrameBuffer) -> Result<ResidualMap> {
    if !cur.same_shape(warped) {
        return Err(Error::ShapeMismatch {
            what: "frame size",
            expected: cur.data().len(),
            actual: warped.data().len(),
        });
    }
    let data = cur
        .data()
        .iter()
        .zip(warped.data())
        .map(|(&a, &b)| a as i16 - b as i16)
        .collect();
    ResidualMap::new(cur.width(), cur.height(), cur.channels(), data)
}
