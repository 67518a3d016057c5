//! Exported motion-vector side data.
//!
//! Records mirror the per-block rows produced by decoder motion-vector
//! export tools: variable block sizes, block-centre coordinates, and an
//! integer vector with its own sub-pel scale. Text parsing lives in the
//! `tristream` crate; this module only rasterizes records onto the fixed
//! block grid and back.

use alloc::vec::Vec;

use super::{check_subpel, grid_dims, MotionField, MotionVector};
use crate::{Error, Result};

/// Block edges a sidecar record may carry.
pub const SIDECAR_BLOCK_SIZES: [u32; 3] = [4, 8, 16];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SidecarRecord {
    pub framenum: u32,
    /// −1 for a past reference, +1 for a future one.
    pub source: i32,
    pub blockw: u32,
    pub blockh: u32,
    pub srcx: i32,
    pub srcy: i32,
    pub dstx: i32,
    pub dsty: i32,
    pub flags: u64,
    pub motion_x: i32,
    pub motion_y: i32,
    pub motion_scale: u32,
}

impl SidecarRecord {
    /// Half-open pixel rectangle `(x0, y0, x1, y1)` covered in the current frame.
    pub fn dst_rect(&self) -> (i64, i64, i64, i64) {
        let (hw, hh) = (self.blockw as i64 / 2, self.blockh as i64 / 2);
        let (cx, cy) = (self.dstx as i64, self.dsty as i64);
        (cx - hw, cy - hh, cx - hw + self.blockw as i64, cy - hh + self.blockh as i64)
    }

    /// Vector in pixels.
    pub fn displacement(&self) -> (f64, f64) {
        let s = self.motion_scale.max(1) as f64;
        (self.motion_x as f64 / s, self.motion_y as f64 / s)
    }
}

/// Rasterize the records of `framenum` onto a `block_size` grid over a
/// `width`×`height` frame. Each cell takes the vector of the (last) record
/// whose block covers the cell centre; uncovered cells stay zero.
pub fn sidecar_to_field(
    records: &[SidecarRecord],
    framenum: u32,
    width: usize,
    height: usize,
    block_size: usize,
) -> Result<MotionField> {
    let (gw, gh) = grid_dims(width, height, block_size)?;
    let mut scale: Option<u32> = None;
    let mut selected = Vec::new();
    for (i, r) in records.iter().enumerate().filter(|(_, r)| r.framenum == framenum) {
        if r.source != -1 {
            return Err(Error::UnsupportedSidecarSource {
                record: i,
                source: r.source,
            });
        }
        if !SIDECAR_BLOCK_SIZES.contains(&r.blockw) || !SIDECAR_BLOCK_SIZES.contains(&r.blockh) {
            return Err(Error::InvalidParameter {
                name: "sidecar block size",
                reason: "blockw and blockh must be 4, 8 or 16",
            });
        }
        check_subpel(r.motion_scale)?;
        match scale {
            None => scale = Some(r.motion_scale),
            Some(s) if s != r.motion_scale => {
                return Err(Error::MixedMotionScale {
                    first: s as i32,
                    other: r.motion_scale as i32,
                })
            }
            _ => {}
        }
        let (x0, y0, x1, y1) = r.dst_rect();
        if x0 < 0 || y0 < 0 || x1 > width as i64 || y1 > height as i64 {
            return Err(Error::SidecarBlockOutsideFrame { record: i });
        }
        let in_range = |v: i32| i16::try_from(v).is_ok();
        if !in_range(r.motion_x) || !in_range(r.motion_y) {
            return Err(Error::InvalidParameter {
                name: "sidecar motion",
                reason: "vector exceeds the 16-bit range",
            });
        }
        selected.push(r);
    }

    let mut field = MotionField::zeros(gw, gh, block_size, scale.unwrap_or(1))?;
    let half = block_size as i64 / 2;
    for r in selected {
        let (x0, y0, x1, y1) = r.dst_rect();
        for by in 0..gh {
            let cy = (by * block_size) as i64 + half;
            if cy < y0 || cy >= y1 {
                continue;
            }
            for bx in 0..gw {
                let cx = (bx * block_size) as i64 + half;
                if cx >= x0 && cx < x1 {
                    field.set(bx, by, MotionVector::new(r.motion_x as i16, r.motion_y as i16));
                }
            }
        }
    }
    Ok(field)
}

/// One record per grid cell, row-major, with the cell's own block size.
pub fn field_to_sidecar(field: &MotionField, framenum: u32) -> Result<Vec<SidecarRecord>> {
    let bs = field.block_size() as u32;
    if !SIDECAR_BLOCK_SIZES.contains(&bs) {
        return Err(Error::InvalidParameter {
            name: "sidecar block size",
            reason: "blockw and blockh must be 4, 8 or 16",
        });
    }
    let s = field.subpel_scale() as i64;
    let round_div = |v: i64| (2 * v + s).div_euclid(2 * s);
    let mut out = Vec::with_capacity(field.vectors().len());
    for by in 0..field.grid_h() {
        for bx in 0..field.grid_w() {
            let mv = field.get(bx, by);
            let dstx = (bx as u32 * bs + bs / 2) as i32;
            let dsty = (by as u32 * bs + bs / 2) as i32;
            out.push(SidecarRecord {
                framenum,
                source: -1,
                blockw: bs,
                blockh: bs,
                srcx: dstx - round_div(mv.x as i64) as i32,
                srcy: dsty - round_div(mv.y as i64) as i32,
                dstx,
                dsty,
                flags: 0,
                motion_x: mv.x as i32,
                motion_y: mv.y as i32,
                motion_scale: field.subpel_scale(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(framenum: u32, bw: u32, dst: (i32, i32), mv: (i32, i32), scale: u32) -> SidecarRecord {
        SidecarRecord {
            framenum,
            source: -1,
            blockw: bw,
            blockh: bw,
            srcx: dst.0 - mv.0 / scale as i32,
            srcy: dst.1 - mv.1 / scale as i32,
            dstx: dst.0,
            dsty: dst.1,
            flags: 0,
            motion_x: mv.0,
            motion_y: mv.1,
            motion_scale: scale,
        }
    }

    #[test]
    fn single_macroblock_record() {
        let records = [rec(2, 16, (8, 8), (16, -8), 4)];
        let f = sidecar_to_field(&records, 2, 64, 32, 16).unwrap();
        assert_eq!(f.subpel_scale(), 4);
        assert_eq!(f.get(0, 0), MotionVector::new(16, -8));
        assert_eq!(f.displacement(0, 0), (4.0, -2.0));
        let nonzero = f.vectors().iter().filter(|v| **v != MotionVector::ZERO).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn four_sub_blocks_share_a_cell() {
        let records: Vec<_> = [(4, 4), (12, 4), (4, 12), (12, 12)]
            .into_iter()
            .map(|c| rec(5, 8, c, (6, 2), 2))
            .collect();
        let f = sidecar_to_field(&records, 5, 32, 32, 16).unwrap();
        assert_eq!(f.get(0, 0), MotionVector::new(6, 2));
        assert_eq!(f.get(1, 0), MotionVector::ZERO);
    }

    #[test]
    fn missing_frame_is_zero_field() {
        let records = [rec(2, 16, (8, 8), (16, -8), 4)];
        let f = sidecar_to_field(&records, 3, 32, 32, 16).unwrap();
        assert!(f.vectors().iter().all(|v| *v == MotionVector::ZERO));
    }

    #[test]
    fn rejects_mixed_scale_and_outside_blocks() {
        let records = [rec(1, 16, (8, 8), (4, 0), 4), rec(1, 16, (24, 8), (2, 0), 2)];
        assert_eq!(
            sidecar_to_field(&records, 1, 32, 32, 16),
            Err(Error::MixedMotionScale { first: 4, other: 2 })
        );
        let records = [rec(1, 16, (12, 6), (16, -8), 4)];
        assert_eq!(
            sidecar_to_field(&records, 1, 32, 32, 16),
            Err(Error::SidecarBlockOutsideFrame { record: 0 })
        );
        let mut fwd = rec(1, 16, (8, 8), (0, 0), 1);
        fwd.source = 1;
        assert!(matches!(
            sidecar_to_field(&[fwd], 1, 32, 32, 16),
            Err(Error::UnsupportedSidecarSource { .. })
        ));
    }

    #[test]
    fn field_round_trips_through_records() {
        let vectors = vec![
            MotionVector::new(3, -1),
            MotionVector::new(-7, 0),
            MotionVector::ZERO,
            MotionVector::new(12, 5),
        ];
        let field = MotionField::new(2, 2, 8, 4, vectors).unwrap();
        let records = field_to_sidecar(&field, 9).unwrap();
        assert_eq!(records[0].srcx, 4 - 1);
        let back = sidecar_to_field(&records, 9, 16, 16, 8).unwrap();
        assert_eq!(back, field);
    }
}
