//! Interval-parallel extraction, per-run summaries and latency benchmarks.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tristream_core::adapter::FusionMode;
use tristream_core::codec::{
    extract_interval, BackendChoice, BackendKind, ExtractParams, MotionSearch, MvAggregation, SidecarRecord,
    TriStreamInterval,
};
use tristream_core::frames::FrameSequence;
use tristream_core::hierarchy::{AnchorRule, Decomposition, IntervalConvention};

use crate::error::{Error, Result};

/// Knobs shared by the extraction-facing subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub anchors: usize,
    pub motion_tokens: u64,
    pub tokens_per_frame: u64,
    pub block_size: usize,
    pub search_range: usize,
    /// `None` picks the backend's profile: 2 for native, 4 otherwise.
    pub subpel_scale: Option<u32>,
    pub fusion: FusionMode,
    pub d: usize,
    pub d_v: usize,
    pub anchor_rule: AnchorRule,
    pub convention: IntervalConvention,
    pub mv_agg: MvAggregation,
    pub ifr_downscale: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            anchors: 8,
            motion_tokens: 64,
            tokens_per_frame: 1396,
            block_size: 16,
            search_range: 8,
            subpel_scale: None,
            fusion: FusionMode::Gated,
            d: 64,
            d_v: 6,
            anchor_rule: AnchorRule::Center,
            convention: IntervalConvention::Bracket,
            mv_agg: MvAggregation::Mean,
            ifr_downscale: 2,
        }
    }
}

impl PipelineConfig {
    pub fn subpel_for(&self, backend: BackendKind) -> u32 {
        self.subpel_scale.unwrap_or(match backend {
            BackendKind::NativeFixedGop => 2,
            _ => 4,
        })
    }

    pub fn decomposition(&self, frames: usize) -> Result<Decomposition> {
        Ok(Decomposition::new(frames, self.anchors, self.anchor_rule, self.convention)?)
    }

    pub fn params<'a>(&self, backend: BackendKind, sidecar: Option<&'a [SidecarRecord]>) -> ExtractParams<'a> {
        ExtractParams {
            search: MotionSearch {
                block_size: self.block_size,
                search_range: self.search_range,
                subpel_scale: self.subpel_for(backend),
            },
            mv_agg: self.mv_agg,
            ifr_downscale: self.ifr_downscale,
            sidecar,
        }
    }
}

/// A pool with `threads` workers, or rayon's default (one per core).
pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Input("--threads must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Internal(e.to_string()))
}

/// Extract every interval on `pool`. Output order matches the decomposition
/// and is identical to sequential extraction.
pub fn extract_parallel(
    pool: &rayon::ThreadPool,
    seq: &FrameSequence,
    decomp: &Decomposition,
    backend: &BackendChoice,
    params: &ExtractParams<'_>,
) -> Result<Vec<TriStreamInterval>> {
    pool.install(|| {
        (0..decomp.interval_count())
            .into_par_iter()
            .map(|k| extract_interval(seq, decomp, k, backend, params))
            .collect::<Result<Vec<_>, _>>()
    })
    .map_err(Error::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    /// Mean displacement in pixels.
    pub mv_mean: [f64; 2],
    pub mv_mean_magnitude: f64,
    pub mv_energy: f64,
    pub residual_abs_sum: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractSummary {
    pub schema_version: u32,
    pub backend: BackendChoice,
    pub frames: usize,
    pub anchors: Vec<usize>,
    pub intervals: usize,
    pub block_size: usize,
    pub subpel_scale: u32,
    pub threads: usize,
    pub per_interval: Vec<IntervalSummary>,
}

pub const SCHEMA_VERSION: u32 = 1;

pub fn summarize(
    decomp: &Decomposition,
    backend: &BackendChoice,
    intervals: &[TriStreamInterval],
    threads: usize,
) -> ExtractSummary {
    let per_interval = decomp
        .intervals
        .iter()
        .zip(intervals)
        .enumerate()
        .map(|(index, (iv, t))| {
            let (mx, my) = t.mv.mean_vector();
            IntervalSummary {
                index,
                start: iv.start,
                end: iv.end,
                mv_mean: [mx, my],
                mv_mean_magnitude: t.mv.mean_magnitude(),
                mv_energy: t.mv.energy(),
                residual_abs_sum: t.residual.abs_sum(),
            }
        })
        .collect();
    let first = intervals.first();
    ExtractSummary {
        schema_version: SCHEMA_VERSION,
        backend: backend.clone(),
        frames: decomp.frames,
        anchors: decomp.anchors.clone(),
        intervals: intervals.len(),
        block_size: first.map_or(0, |t| t.mv.block_size()),
        subpel_scale: first.map_or(0, |t| t.mv.subpel_scale()),
        threads,
        per_interval,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub backend: BackendChoice,
    pub video_seconds: f64,
    /// Median over repeats.
    pub wall_ms: f64,
    pub ms_per_video_second: f64,
    pub repeats: usize,
    /// Always 1: extraction is timed single-threaded.
    pub threads: usize,
    pub samples_ms: Vec<f64>,
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Median single-threaded wall time of a full extraction.
pub fn bench_backend(
    seq: &FrameSequence,
    decomp: &Decomposition,
    backend: &BackendChoice,
    params: &ExtractParams<'_>,
    repeats: usize,
) -> Result<LatencyReport> {
    if repeats == 0 {
        return Err(Error::Input("repeats must be at least 1".into()));
    }
    let samples_ms = (0..repeats)
        .map(|_| {
            let t = Instant::now();
            tristream_core::codec::extract_tristream(seq, decomp, backend, params)?;
            Ok(t.elapsed().as_secs_f64() * 1e3)
        })
        .collect::<Result<Vec<_>>>()?;
    let wall_ms = median(&samples_ms);
    let video_seconds = seq.duration_seconds();
    Ok(LatencyReport {
        backend: backend.clone(),
        video_seconds,
        wall_ms,
        ms_per_video_second: wall_ms / video_seconds,
        repeats,
        threads: 1,
        samples_ms,
    })
}
