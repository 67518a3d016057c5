//! `.trs` container: one file holding every extracted interval.
//!
//! Layout (little-endian, no padding):
//! `TRS1`, u32 × 9 {version, K, block_size, subpel_scale, ifr_w, ifr_h,
//! grid_w, grid_h, channels}, then per interval the I-frame bytes, the
//! motion vectors as `(x, y)` i16 pairs and the residual as i16 samples.
//! The residual covers `grid_w·block_size × grid_h·block_size`.

use std::fs;
use std::path::Path;

use tristream_core::codec::{MotionField, MotionVector, ResidualMap, TriStreamInterval};
use tristream_core::frames::FrameBuffer;

use crate::error::{Error, Result};

pub const TRS_MAGIC: &[u8; 4] = b"TRS1";
pub const TRS_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 9 * 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrsHeader {
    pub intervals: u32,
    pub block_size: u32,
    pub subpel_scale: u32,
    pub ifr_w: u32,
    pub ifr_h: u32,
    pub grid_w: u32,
    pub grid_h: u32,
    pub channels: u32,
}

impl TrsHeader {
    // u128 so that no header can overflow the size arithmetic.
    fn ifr_len(&self) -> u128 {
        self.ifr_w as u128 * self.ifr_h as u128 * self.channels as u128
    }

    fn mv_len(&self) -> u128 {
        self.grid_w as u128 * self.grid_h as u128 * 4
    }

    fn res_samples(&self) -> u128 {
        self.grid_w as u128 * self.grid_h as u128 * (self.block_size as u128).pow(2) * self.channels as u128
    }

    fn record_len(&self) -> u128 {
        self.ifr_len() + self.mv_len() + 2 * self.res_samples()
    }
}

fn header_of(intervals: &[TriStreamInterval]) -> Result<TrsHeader> {
    let first = intervals
        .first()
        .ok_or_else(|| Error::Input("cannot write a .trs with zero intervals".into()))?;
    let u = |v: usize| u32::try_from(v).map_err(|_| Error::Input(format!("{v} does not fit a u32 field")));
    let h = TrsHeader {
        intervals: u(intervals.len())?,
        block_size: u(first.mv.block_size())?,
        subpel_scale: first.mv.subpel_scale(),
        ifr_w: u(first.ifr.width())?,
        ifr_h: u(first.ifr.height())?,
        grid_w: u(first.mv.grid_w())?,
        grid_h: u(first.mv.grid_h())?,
        channels: u(first.ifr.channels())?,
    };
    for (k, iv) in intervals.iter().enumerate() {
        let consistent = iv.ifr.width() == first.ifr.width()
            && iv.ifr.height() == first.ifr.height()
            && iv.ifr.channels() == first.ifr.channels()
            && iv.mv.grid_w() == first.mv.grid_w()
            && iv.mv.grid_h() == first.mv.grid_h()
            && iv.mv.block_size() == first.mv.block_size()
            && iv.mv.subpel_scale() == first.mv.subpel_scale()
            && iv.residual.width() == iv.mv.frame_width()
            && iv.residual.height() == iv.mv.frame_height()
            && iv.residual.channels() == iv.ifr.channels();
        if !consistent {
            return Err(Error::Input(format!("interval {k} has a different shape from interval 0")));
        }
    }
    Ok(h)
}

pub fn encode_trs(intervals: &[TriStreamInterval]) -> Result<Vec<u8>> {
    let h = header_of(intervals)?;
    let mut out = Vec::with_capacity(HEADER_LEN + (h.record_len() * h.intervals as u128) as usize);
    out.extend_from_slice(TRS_MAGIC);
    for v in [
        TRS_VERSION,
        h.intervals,
        h.block_size,
        h.subpel_scale,
        h.ifr_w,
        h.ifr_h,
        h.grid_w,
        h.grid_h,
        h.channels,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for iv in intervals {
        out.extend_from_slice(iv.ifr.data());
        for mv in iv.mv.vectors() {
            out.extend_from_slice(&mv.x.to_le_bytes());
            out.extend_from_slice(&mv.y.to_le_bytes());
        }
        for r in iv.residual.data() {
            out.extend_from_slice(&r.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_trs(path: &Path, intervals: &[TriStreamInterval]) -> Result<()> {
    let bytes = encode_trs(intervals)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.at..end];
                self.at = end;
                Ok(s)
            }
            None => Err(Error::Trs {
                offset: self.bytes.len() as u64,
                reason: format!("truncated while reading {what} starting at byte {}", self.at),
            }),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn bad(offset: usize, reason: impl Into<String>) -> Error {
    Error::Trs {
        offset: offset as u64,
        reason: reason.into(),
    }
}

pub fn decode_trs(bytes: &[u8]) -> Result<(TrsHeader, Vec<TriStreamInterval>)> {
    let mut c = Cursor { bytes, at: 0 };
    let magic = c.take(4, "magic")?;
    if let Some(i) = magic.iter().zip(TRS_MAGIC).position(|(a, b)| a != b) {
        return Err(bad(i, "bad magic, expected TRS1"));
    }
    let mut field = |name: &str| -> Result<(usize, u32)> {
        let at = c.at;
        Ok((at, c.u32(name)?))
    };
    let (at, version) = field("version")?;
    if version != TRS_VERSION {
        return Err(bad(at, format!("unsupported version {version}")));
    }
    let mut vals = [0u32; 8];
    let names = ["K", "block_size", "subpel_scale", "ifr_w", "ifr_h", "grid_w", "grid_h", "channels"];
    for (v, name) in vals.iter_mut().zip(names) {
        let (at, x) = field(name)?;
        let valid = match name {
            "subpel_scale" => matches!(x, 1 | 2 | 4),
            "channels" => matches!(x, 1 | 3),
            _ => x > 0,
        };
        if !valid {
            return Err(bad(at, format!("invalid {name} {x}")));
        }
        *v = x;
    }
    let h = TrsHeader {
        intervals: vals[0],
        block_size: vals[1],
        subpel_scale: vals[2],
        ifr_w: vals[3],
        ifr_h: vals[4],
        grid_w: vals[5],
        grid_h: vals[6],
        channels: vals[7],
    };
    let expected = HEADER_LEN as u128 + h.record_len() * h.intervals as u128;
    let actual = bytes.len() as u128;
    if actual < expected {
        return Err(bad(bytes.len(), format!("truncated: header declares {expected} bytes")));
    }
    if actual > expected {
        return Err(bad(expected as usize, format!("{} trailing bytes", actual - expected)));
    }
    let internal = |e: tristream_core::Error| Error::Internal(e.to_string());
    let (gw, gh, bs) = (h.grid_w as usize, h.grid_h as usize, h.block_size as usize);
    let ch = h.channels as usize;
    let mut out = Vec::with_capacity(h.intervals as usize);
    for k in 0..h.intervals {
        let ifr = c.take(h.ifr_len() as usize, &format!("interval {k} I-frame"))?;
        let ifr = FrameBuffer::new(h.ifr_w as usize, h.ifr_h as usize, ch, ifr.to_vec()).map_err(internal)?;
        let mv = c.take(h.mv_len() as usize, &format!("interval {k} motion vectors"))?;
        let vectors = mv
            .chunks_exact(4)
            .map(|b| MotionVector::new(i16::from_le_bytes([b[0], b[1]]), i16::from_le_bytes([b[2], b[3]])))
            .collect();
        let mv = MotionField::new(gw, gh, bs, h.subpel_scale, vectors).map_err(internal)?;
        let res_at = c.at;
        let res = c.take(2 * h.res_samples() as usize, &format!("interval {k} residual"))?;
        let samples: Vec<i16> = res.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect();
        if let Some(i) = samples.iter().position(|s| !(-255..=255).contains(s)) {
            return Err(bad(res_at + 2 * i, format!("residual sample {} outside [-255, 255]", samples[i])));
        }
        let residual = ResidualMap::new(gw * bs, gh * bs, ch, samples).map_err(internal)?;
        out.push(TriStreamInterval { ifr, mv, residual });
    }
    Ok((h, out))
}

pub fn read_trs(path: &Path) -> Result<(TrsHeader, Vec<TriStreamInterval>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_trs(&bytes)
}
