use crate::frames::FrameBuffer;

/// Bilinear sample of channel `c` at `(xs, ys)` given in `1/scale` pel
/// units. Taps outside the frame clamp to the edge; the result is rounded
/// half up.
#[inline]
pub fn sample_subpel(frame: &FrameBuffer, xs: i64, ys: i64, scale: u32, c: usize) -> u8 {
    let s = scale as i64;
    let (ix, fx) = (xs.div_euclid(s), xs.rem_euclid(s));
    let (iy, fy) = (ys.div_euclid(s), ys.rem_euclid(s));
    let (ix, iy) = (ix as isize, iy as isize);
    if fx == 0 && fy == 0 {
        return frame.get_clamped(ix, iy, c);
    }
    let a = frame.get_clamped(ix, iy, c) as i64;
    let b = frame.get_clamped(ix + 1, iy, c) as i64;
    let d = frame.get_clamped(ix, iy + 1, c) as i64;
    let e = frame.get_clamped(ix + 1, iy + 1, c) as i64;
    let acc = (s - fx) * (s - fy) * a + fx * (s - fy) * b + (s - fx) * fy * d + fx * fy * e;
    let total = s * s;
    ((acc + total / 2) / total) as u8
}
