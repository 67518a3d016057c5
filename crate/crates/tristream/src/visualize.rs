//! Rendering of tri-stream maps to PNM images.
//!
//! Motion palette: the direction of each block's vector picks the hue
//! (0° = +x/right, 90° = +y/down, so red right, yellow-green down, cyan
//! left, violet up), and its length relative to the longest vector in the
//! field blends from mid-gray (128) to the fully saturated, full-value hue.
//! A zero field is therefore uniform mid-gray.

use tristream_core::codec::{MotionField, ResidualMap};
use tristream_core::frames::FrameBuffer;

use crate::error::Result;

/// Fully saturated RGB for a hue in degrees.
pub fn hue_rgb(hue: f64) -> [f64; 3] {
    let h = hue.rem_euclid(360.0) / 60.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [r * 255.0, g * 255.0, b * 255.0]
}

/// Colour of displacement `(dx, dy)` when the field's longest vector is `max_mag`.
pub fn mv_color(dx: f64, dy: f64, max_mag: f64) -> [u8; 3] {
    let mag = dx.hypot(dy);
    if max_mag <= 0.0 || mag == 0.0 {
        return [128; 3];
    }
    let s = (mag / max_mag).min(1.0);
    let hue = dy.atan2(dx).to_degrees();
    hue_rgb(hue).map(|c| (128.0 * (1.0 - s) + c * s).round() as u8)
}

/// RGB raster of the field at full frame resolution.
pub fn render_mv(field: &MotionField) -> Result<FrameBuffer> {
    let (w, h, bs) = (field.frame_width(), field.frame_height(), field.block_size());
    let max_mag = (0..field.grid_h())
        .flat_map(|by| (0..field.grid_w()).map(move |bx| (bx, by)))
        .map(|(bx, by)| {
            let (dx, dy) = field.displacement(bx, by);
            dx.hypot(dy)
        })
        .fold(0.0, f64::max);
    let mut data = vec![0u8; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = field.displacement(x / bs, y / bs);
            data[(y * w + x) * 3..][..3].copy_from_slice(&mv_color(dx, dy, max_mag));
        }
    }
    Ok(FrameBuffer::new(w, h, 3, data)?)
}

/// Gray image `128 + r`, clamped; multi-channel residuals are averaged.
pub fn render_residual(res: &ResidualMap) -> Result<FrameBuffer> {
    let ch = res.channels();
    let data = res
        .data()
        .chunks_exact(ch)
        .map(|px| {
            let mean = px.iter().map(|&v| v as f64).sum::<f64>() / ch as f64;
            (128.0 + mean).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Ok(FrameBuffer::new(res.width(), res.height(), 1, data)?)
}
