//! Per-interval tri-stream extraction.

use alloc::vec::Vec;

use super::{
    compute_residual, estimate_motion, sidecar_to_field, warp, BackendChoice, BackendKind,
    MotionField, MotionSearch, MotionVector, ResidualMap, SidecarRecord,
};
use crate::frames::{FrameBuffer, FrameSequence};
use crate::hierarchy::Decomposition;
use crate::{Error, Result};

/// How the per-step fields inside an interval collapse to one field.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum MvAggregation {
    /// Component-wise mean, rounded to the nearest sub-pel unit.
    #[default]
    Mean,
    /// Field of the step that ends the interval.
    Last,
    /// Per block, the longest vector across steps (earliest on ties).
    MaxMag,
}

impl MvAggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            MvAggregation::Mean => "mean",
            MvAggregation::Last => "last",
            MvAggregation::MaxMag => "max-mag",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(MvAggregation::Mean),
            "last" => Some(MvAggregation::Last),
            "max-mag" => Some(MvAggregation::MaxMag),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExtractParams<'a> {
    pub search: MotionSearch,
    pub mv_agg: MvAggregation,
    /// Integer downscale applied to the anchor frame.
    pub ifr_downscale: usize,
    /// Exported vectors, required by the sidecar backend. Record `framenum`
    /// `f` describes frame `f` (1-based) relative to frame `f − 1`.
    pub sidecar: Option<&'a [SidecarRecord]>,
}

impl Default for ExtractParams<'_> {
    fn default() -> Self {
        Self {
            search: MotionSearch::default(),
            mv_agg: MvAggregation::Mean,
            ifr_downscale: 2,
            sidecar: None,
        }
    }
}

/// One interval's I-frame context, aggregated motion field and residual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriStreamInterval {
    pub ifr: FrameBuffer,
    pub mv: MotionField,
    pub residual: ResidualMap,
}

/// The fixed emulation profile of the native MPEG-4 reader.
const NATIVE_PROFILE: (usize, u32) = (16, 2);

fn step_field(
    seq: &FrameSequence,
    prev: usize,
    cur: usize,
    backend: BackendKind,
    params: &ExtractParams<'_>,
) -> Result<MotionField> {
    let (p, c) = (seq.frame(prev), seq.frame(cur));
    match backend {
        BackendKind::RgbProxy => estimate_motion(p, c, params.search),
        BackendKind::NativeFixedGop => estimate_motion(
            p,
            c,
            MotionSearch {
                block_size: NATIVE_PROFILE.0,
                subpel_scale: NATIVE_PROFILE.1,
                ..params.search
            },
        ),
        BackendKind::SidecarExport => {
            let records = params.sidecar.unwrap_or(&[]);
            let framenum = cur as u32;
            if !records.iter().any(|r| r.framenum == framenum) {
                return Err(Error::MissingSidecarFrame { framenum });
            }
            sidecar_to_field(records, framenum, seq.width(), seq.height(), params.search.block_size)
        }
    }
}

fn aggregate_fields(fields: &[MotionField], how: MvAggregation) -> Result<MotionField> {
    let first = &fields[0];
    if let Some(bad) = fields.iter().find(|f| f.subpel_scale() != first.subpel_scale()) {
        return Err(Error::MixedMotionScale {
            first: first.subpel_scale() as i32,
            other: bad.subpel_scale() as i32,
        });
    }
    let n = fields.len() as i64;
    let blocks = first.vectors().len();
    let vectors = match how {
        MvAggregation::Last => fields.last().unwrap().vectors().to_vec(),
        MvAggregation::Mean => (0..blocks)
            .map(|b| {
                let (sx, sy) = fields.iter().fold((0i64, 0i64), |(x, y), f| {
                    let v = f.vectors()[b];
                    (x + v.x as i64, y + v.y as i64)
                });
                MotionVector::new(round_div(sx, n) as i16, round_div(sy, n) as i16)
            })
            .collect(),
        MvAggregation::MaxMag => (0..blocks)
            .map(|b| {
                fields.iter().map(|f| f.vectors()[b]).fold(MotionVector::ZERO, |best, v| {
                    if v.magnitude_sq() > best.magnitude_sq() {
                        v
                    } else {
                        best
                    }
                })
            })
            .collect(),
    };
    MotionField::new(
        first.grid_w(),
        first.grid_h(),
        first.block_size(),
        first.subpel_scale(),
        vectors,
    )
}

/// Integer division rounding half away from zero.
fn round_div(num: i64, den: i64) -> i64 {
    let q = (2 * num.abs() + den) / (2 * den);
    if num < 0 {
        -q
    } else {
        q
    }
}

fn aggregate_residuals(maps: &[ResidualMap], how: MvAggregation) -> Result<ResidualMap> {
    let first = &maps[0];
    if how == MvAggregation::Last {
        return Ok(maps.last().unwrap().clone());
    }
    let n = maps.len() as i64;
    let data = (0..first.data().len())
        .map(|i| {
            let s: i64 = maps.iter().map(|m| m.data()[i] as i64).sum();
            round_div(s, n) as i16
        })
        .collect();
    ResidualMap::new(first.width(), first.height(), first.channels(), data)
}

/// Extract interval `k` of `decomp`. Intervals are independent, so callers
/// may run this concurrently over `k`.
pub fn extract_interval(
    seq: &FrameSequence,
    decomp: &Decomposition,
    k: usize,
    backend: &BackendChoice,
    params: &ExtractParams<'_>,
) -> Result<TriStreamInterval> {
    let frames = seq.len();
    if decomp.frames != frames {
        return Err(Error::ShapeMismatch {
            what: "decomposition length",
            expected: frames,
            actual: decomp.frames,
        });
    }
    let interval = decomp.intervals.get(k).ok_or(Error::IntervalOutOfRange {
        interval: k,
        frames,
    })?;
    if interval.start == 0 || interval.start > frames || interval.end > frames + 1 {
        return Err(Error::IntervalOutOfRange { interval: k, frames });
    }

    let ifr = seq.frame(interval.start).downscale(params.ifr_downscale)?;
    let pairs = interval.frame_pairs(frames);
    let mut fields = Vec::with_capacity(pairs.len());
    let mut residuals = Vec::with_capacity(pairs.len());
    for &(prev, cur) in &pairs {
        let field = step_field(seq, prev, cur, backend.kind, params)?;
        let predicted = warp(seq.frame(prev), &field)?;
        residuals.push(compute_residual(seq.frame(cur), &predicted)?);
        fields.push(field);
    }
    Ok(TriStreamInterval {
        ifr,
        mv: aggregate_fields(&fields, params.mv_agg)?,
        residual: aggregate_residuals(&residuals, params.mv_agg)?,
    })
}

/// Sequential extraction of every interval.
pub fn extract_tristream(
    seq: &FrameSequence,
    decomp: &Decomposition,
    backend: &BackendChoice,
    params: &ExtractParams<'_>,
) -> Result<Vec<TriStreamInterval>> {
    (0..decomp.intervals.len())
        .map(|k| extract_interval(seq, decomp, k, backend, params))
        .collect()
}
