//! Token budgets and the consolidated run report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tristream_core::adapter::GateRow;
use tristream_core::hierarchy::token_budget;

use crate::error::{Error, Result};
use crate::pipeline::{LatencyReport, SCHEMA_VERSION};
use crate::train::{parse_history_csv, TrainSummary};
use crate::trs::{read_trs, TrsHeader};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub anchors: u64,
    pub tokens_per_frame: u64,
    pub intervals: u64,
    pub tokens_per_interval: u64,
    pub text_overhead: u64,
    pub anchor_tokens: u64,
    pub motion_tokens: u64,
    pub total: u64,
    /// Uniform dense sampling at the same per-frame cost, for comparison.
    pub dense_frames: u64,
    pub dense_total: u64,
    pub reduction: f64,
}

pub fn budget_report(
    anchors: u64,
    tokens_per_frame: u64,
    intervals: u64,
    tokens_per_interval: u64,
    text_overhead: u64,
    dense_frames: u64,
) -> BudgetReport {
    let b = token_budget(anchors, tokens_per_frame, intervals, tokens_per_interval, text_overhead);
    let dense = token_budget(dense_frames, tokens_per_frame, 0, 0, text_overhead);
    BudgetReport {
        anchors,
        tokens_per_frame,
        intervals,
        tokens_per_interval,
        text_overhead,
        anchor_tokens: b.anchor_tokens,
        motion_tokens: b.motion_tokens,
        total: b.total,
        dense_frames,
        dense_total: dense.total,
        reduction: if b.total == 0 {
            0.0
        } else {
            dense.total as f64 / b.total as f64
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrsInfo {
    pub intervals: u32,
    pub block_size: u32,
    pub subpel_scale: u32,
    pub ifr_size: [u32; 2],
    pub grid_size: [u32; 2],
    pub channels: u32,
}

impl From<TrsHeader> for TrsInfo {
    fn from(h: TrsHeader) -> Self {
        Self {
            intervals: h.intervals,
            block_size: h.block_size,
            subpel_scale: h.subpel_scale,
            ifr_size: [h.ifr_w, h.ifr_h],
            grid_size: [h.grid_w, h.grid_h],
            channels: h.channels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub budget: Option<BudgetReport>,
    pub gate_report: Option<Vec<GateRow>>,
    pub latency: Option<LatencyReport>,
    pub train: Option<TrainSummary>,
    pub trs: Option<TrsInfo>,
}

/// Artifact paths; any subset may be given.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub budget: Option<PathBuf>,
    pub gates: Option<PathBuf>,
    pub latency: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub trs: Option<PathBuf>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Gate reports may come straight from `align` output or as a bare row list.
fn read_gates(path: &Path) -> Result<Vec<GateRow>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Gates {
        Rows(Vec<GateRow>),
        Outcome { gates: Vec<GateRow> },
    }
    Ok(match read_json::<Gates>(path)? {
        Gates::Rows(r) | Gates::Outcome { gates: r } => r,
    })
}

pub fn build_report(a: &Artifacts) -> Result<Report> {
    let missing: Vec<PathBuf> = [&a.budget, &a.gates, &a.latency, &a.history, &a.trs]
        .into_iter()
        .flatten()
        .filter(|p| !p.is_file())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts(missing));
    }
    let train = match &a.history {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Some(TrainSummary::from_history(&parse_history_csv(&text)?)?)
        }
        None => None,
    };
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        budget: a.budget.as_deref().map(read_json).transpose()?,
        gate_report: a.gates.as_deref().map(read_gates).transpose()?,
        latency: a.latency.as_deref().map(read_json).transpose()?,
        train,
        trs: a.trs.as_deref().map(|p| read_trs(p).map(|(h, _)| h.into())).transpose()?,
    })
}
