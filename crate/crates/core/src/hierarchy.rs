//! Anchor selection, interval partitioning and token-budget accounting.
//!
//! Frame indices are 1-based throughout, matching how anchors are usually
//! quoted (`t_1 … t_{N_a}` over `[1, T]`). Intervals are half-open.

use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AnchorRule {
    /// Centre of each of `N_a` equal bins.
    #[default]
    Center,
    /// Evenly spaced including both endpoints.
    Endpoint,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum IntervalConvention {
    /// `K = N_a`: interval k starts at anchor k, the last runs to T.
    #[default]
    Bracket,
    /// `K = N_a − 1`: intervals between consecutive anchors.
    Between,
}

/// Uniformly spaced anchor frames.
pub fn select_anchors(frames: usize, count: usize, rule: AnchorRule) -> Result<Vec<usize>> {
    if count == 0 || count > frames {
        return Err(Error::AnchorCount {
            anchors: count,
            frames,
        });
    }
    let (t, n) = (frames as u64, count as u64);
    let anchors: Vec<usize> = (1..=n)
        .map(|i| {
            let idx = match rule {
                AnchorRule::Center => (2 * i - 1) * t / (2 * n) + 1,
                AnchorRule::Endpoint if n == 1 => 1,
                AnchorRule::Endpoint => (i - 1) * (t - 1) / (n - 1) + 1,
            };
            idx.clamp(1, t) as usize
        })
        .collect();
    if let Some(w) = anchors.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::DuplicateAnchor { index: w[1] });
    }
    Ok(anchors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Interval {
    /// Index into the anchor list of the opening anchor.
    pub start_anchor: usize,
    /// Closing anchor, absent for the tail interval of the bracket convention.
    pub end_anchor: Option<usize>,
    /// First frame (1-based, inclusive).
    pub start: usize,
    /// One past the last frame.
    pub end: usize,
}

impl Interval {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Consecutive frame pairs `(f, f + 1)` spanned by the interval, closing
    /// anchor included. A single-frame tail borrows its predecessor.
    pub fn frame_pairs(&self, frames: usize) -> Vec<(usize, usize)> {
        let mut pairs: Vec<_> = (self.start..self.end)
            .filter(|&f| f < frames)
            .map(|f| (f, f + 1))
            .collect();
        if pairs.is_empty() && frames >= 2 {
            let last = self.start.clamp(2, frames);
            pairs.push((last - 1, last));
        }
        pairs
    }
}

pub fn partition_intervals(
    anchors: &[usize],
    frames: usize,
    convention: IntervalConvention,
) -> Result<Vec<Interval>> {
    if anchors.is_empty() {
        return Err(Error::AnchorCount { anchors: 0, frames });
    }
    if anchors[0] == 0 || *anchors.last().unwrap() > frames {
        return Err(Error::AnchorCount {
            anchors: anchors.len(),
            frames,
        });
    }
    if let Some(w) = anchors.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::DuplicateAnchor { index: w[1] });
    }
    let mut out: Vec<Interval> = anchors
        .windows(2)
        .enumerate()
        .map(|(k, w)| Interval {
            start_anchor: k,
            end_anchor: Some(k + 1),
            start: w[0],
            end: w[1],
        })
        .collect();
    if convention == IntervalConvention::Bracket {
        out.push(Interval {
            start_anchor: anchors.len() - 1,
            end_anchor: None,
            start: *anchors.last().unwrap(),
            end: frames + 1,
        });
    }
    Ok(out)
}

/// Anchors plus the intervals they induce over a `frames`-long clip.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Decomposition {
    pub frames: usize,
    pub anchors: Vec<usize>,
    pub intervals: Vec<Interval>,
}

impl Decomposition {
    pub fn new(
        frames: usize,
        anchor_count: usize,
        rule: AnchorRule,
        convention: IntervalConvention,
    ) -> Result<Self> {
        let anchors = select_anchors(frames, anchor_count, rule)?;
        let intervals = partition_intervals(&anchors, frames, convention)?;
        Ok(Self {
            frames,
            anchors,
            intervals,
        })
    }

    pub fn anchor_count(&self) -> usize {
        self.anchors.len()
    }

    pub fn interval_count(&self) -> usize {
        self.intervals.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TokenBudget {
    pub anchor_tokens: u64,
    pub motion_tokens: u64,
    pub text_overhead: u64,
    pub total: u64,
}

/// Exact context-length accounting:
/// `anchors · tokens_per_frame + intervals · tokens_per_interval + text`.
pub fn token_budget(
    anchors: u64,
    tokens_per_frame: u64,
    intervals: u64,
    tokens_per_interval: u64,
    text_overhead: u64,
) -> TokenBudget {
    let anchor_tokens = anchors * tokens_per_frame;
    let motion_tokens = intervals * tokens_per_interval;
    TokenBudget {
        anchor_tokens,
        motion_tokens,
        text_overhead,
        total: anchor_tokens + motion_tokens + text_overhead,
    }
}
