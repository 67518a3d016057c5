//! Placeholder layouts and out-of-place scatter injection of motion tokens.
//!
//! The one-hot selector is never materialised: a layout is the sorted list
//! of placeholder row indices, and injection copies `M[j]` to row
//! `positions[j]` of a fresh sequence.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PlacementStrategy {
    /// All slots immediately before the first anchor span.
    Prefix,
    /// `K_m` slots immediately after each anchor span.
    PerAnchor,
    /// All slots immediately after the last anchor span.
    Suffix,
}

impl PlacementStrategy {
    pub const ALL: [PlacementStrategy; 3] = [Self::Prefix, Self::PerAnchor, Self::Suffix];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Prefix => "prefix",
            Self::PerAnchor => "per_anchor",
            Self::Suffix => "suffix",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s || k.as_str().replace('_', "-") == s)
    }
}

/// Token span `[start, start + len)` of one anchor frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Span {
    pub start: usize,
    pub len: usize,
}

impl Span {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlaceholderLayout {
    seq_len: usize,
    positions: Vec<usize>,
    strategy: Option<PlacementStrategy>,
}

impl PlaceholderLayout {
    /// A layout from explicit positions (strictly increasing, inside the sequence).
    pub fn from_positions(seq_len: usize, positions: Vec<usize>) -> Result<Self> {
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidLayout {
                reason: "positions must be strictly increasing",
            });
        }
        if positions.last().is_some_and(|&p| p >= seq_len) {
            return Err(Error::InvalidLayout {
                reason: "position beyond sequence end",
            });
        }
        Ok(Self {
            seq_len,
            positions,
            strategy: None,
        })
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn strategy(&self) -> Option<PlacementStrategy> {
        self.strategy
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn contains(&self, row: usize) -> bool {
        self.positions.binary_search(&row).is_ok()
    }

    /// Index `j` such that `positions[j] == row`.
    pub fn slot_of(&self, row: usize) -> Option<usize> {
        self.positions.binary_search(&row).ok()
    }
}

fn check_spans(spans: &[Span], seq_len: usize) -> Result<()> {
    let mut prev_end = 0;
    for (i, s) in spans.iter().enumerate() {
        if s.len == 0 {
            return Err(Error::InvalidLayout {
                reason: "anchor spans must be non-empty",
            });
        }
        if (i > 0 && s.start < prev_end) || s.end() > seq_len {
            return Err(Error::OverlappingSpans { index: i });
        }
        prev_end = s.end();
    }
    Ok(())
}

/// Place `k * k_m` placeholder slots around the anchor token spans.
pub fn build_layout(
    strategy: PlacementStrategy,
    spans: &[Span],
    k: usize,
    k_m: usize,
    seq_len: usize,
) -> Result<PlaceholderLayout> {
    check_spans(spans, seq_len)?;
    let n = k * k_m;
    let layout = |positions| PlaceholderLayout {
        seq_len,
        positions,
        strategy: Some(strategy),
    };
    if n == 0 {
        return Ok(layout(Vec::new()));
    }
    let (first, last) = match (spans.first(), spans.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::EmptyInput { what: "anchor spans" }),
    };
    let positions = match strategy {
        PlacementStrategy::Prefix => {
            if first.start < n {
                return Err(Error::InsufficientRoom {
                    needed: n,
                    available: first.start,
                });
            }
            (first.start - n..first.start).collect()
        }
        PlacementStrategy::Suffix => {
            let available = seq_len - last.end();
            if available < n {
                return Err(Error::InsufficientRoom { needed: n, available });
            }
            (last.end()..last.end() + n).collect()
        }
        PlacementStrategy::PerAnchor => {
            if spans.len() != k {
                return Err(Error::ShapeMismatch {
                    what: "anchor span count",
                    expected: k,
                    actual: spans.len(),
                });
            }
            let mut out = Vec::with_capacity(n);
            for (i, s) in spans.iter().enumerate() {
                let limit = spans.get(i + 1).map_or(seq_len, |next| next.start);
                let available = limit - s.end();
                if available < k_m {
                    return Err(Error::InsufficientRoom {
                        needed: k_m,
                        available,
                    });
                }
                out.extend(s.end()..s.end() + k_m);
            }
            out
        }
    };
    Ok(layout(positions))
}

/// Host embedding sequence `E` (`seq_len × dim`, row-major) with a
/// per-row stop-gradient flag.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmbeddingSeq {
    seq_len: usize,
    dim: usize,
    data: Vec<f64>,
    frozen: Vec<bool>,
}

impl EmbeddingSeq {
    pub fn new(seq_len: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != seq_len * dim {
            return Err(Error::DataLength {
                expected: seq_len * dim,
                actual: data.len(),
            });
        }
        Ok(Self {
            seq_len,
            dim,
            data,
            frozen: vec![false; seq_len],
        })
    }

    /// `E` with the layout's rows frozen, ready for injection.
    pub fn with_placeholders(seq_len: usize, dim: usize, data: Vec<f64>, layout: &PlaceholderLayout) -> Result<Self> {
        let mut seq = Self::new(seq_len, dim, data)?;
        seq.freeze(layout)?;
        Ok(seq)
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }

    pub fn frozen_mask(&self) -> &[bool] {
        &self.frozen
    }

    pub fn freeze(&mut self, layout: &PlaceholderLayout) -> Result<()> {
        if layout.seq_len != self.seq_len {
            return Err(Error::ShapeMismatch {
                what: "layout length",
                expected: self.seq_len,
                actual: layout.seq_len,
            });
        }
        layout.positions.iter().for_each(|&p| self.frozen[p] = true);
        Ok(())
    }

    /// `E -= lr · grad` on every row that is not frozen.
    pub fn apply_gradient(&mut self, grad: &[f64], lr: f64) -> Result<()> {
        if grad.len() != self.data.len() {
            return Err(Error::DataLength {
                expected: self.data.len(),
                actual: grad.len(),
            });
        }
        for (i, (row, g)) in self
            .data
            .chunks_exact_mut(self.dim.max(1))
            .zip(grad.chunks_exact(self.dim.max(1)))
            .enumerate()
        {
            if !self.frozen[i] {
                row.iter_mut().zip(g).for_each(|(e, g)| *e -= lr * g);
            }
        }
        Ok(())
    }
}

/// Where an output row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RowSource {
    /// Row `i` of the host sequence.
    Host(usize),
    /// Row `j` of the motion-token matrix.
    Motion(usize),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Injected {
    pub seq: EmbeddingSeq,
    pub provenance: Vec<RowSource>,
}

impl Injected {
    pub fn motion_rows(&self) -> usize {
        self.provenance.iter().filter(|s| matches!(s, RowSource::Motion(_))).count()
    }
}

/// `E' = (I - ΠΠᵀ)E + ΠM` as a fresh sequence; `seq` is left untouched.
///
/// `m` is row-major with `layout.len()` rows of width `seq.dim()`.
pub fn scatter_inject(seq: &EmbeddingSeq, layout: &PlaceholderLayout, m: &[f64]) -> Result<Injected> {
    if layout.seq_len != seq.seq_len {
        return Err(Error::ShapeMismatch {
            what: "layout length",
            expected: seq.seq_len,
            actual: layout.seq_len,
        });
    }
    if m.len() != layout.len() * seq.dim {
        return Err(Error::ShapeMismatch {
            what: "motion token rows",
            expected: layout.len(),
            actual: m.len().checked_div(seq.dim).unwrap_or(0),
        });
    }
    if let Some(&position) = layout.positions.iter().find(|&&p| !seq.frozen[p]) {
        return Err(Error::UnfrozenPlaceholder { position });
    }
    let mut out = seq.clone();
    let mut provenance: Vec<RowSource> = (0..seq.seq_len).map(RowSource::Host).collect();
    let d = seq.dim;
    for (j, &p) in layout.positions.iter().enumerate() {
        out.data[p * d..(p + 1) * d].copy_from_slice(&m[j * d..(j + 1) * d]);
        provenance[p] = RowSource::Motion(j);
    }
    Ok(Injected { seq: out, provenance })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FlowViolation {
    /// Loss sensitivity to `M[slot]` differs from that of the output row it lands on.
    Routing { slot: usize, col: usize },
    /// A frozen (overwritten) host row still influences the loss.
    FrozenLeak { row: usize, col: usize },
    /// A host row does not reach the output unchanged.
    HostRouting { row: usize, col: usize },
    /// An update changed a frozen row.
    FrozenUpdated { row: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GradFlowReport {
    /// Central-difference `∂L/∂M`, row-major like `M`.
    pub d_m: Vec<f64>,
    pub violations: Vec<FlowViolation>,
}

impl GradFlowReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Probe gradient routing through `scatter_inject` with central differences.
///
/// `loss` maps the injected data (`seq_len × dim`, row-major) to a scalar.
/// Routing is compared exactly: perturbing `M[j]` and perturbing output row
/// `positions[j]` must give bit-identical losses, and so on for host rows.
pub fn grad_flow_check<F>(seq: &EmbeddingSeq, layout: &PlaceholderLayout, m: &[f64], loss: F, eps: f64) -> Result<GradFlowReport>
where
    F: Fn(&[f64]) -> f64,
{
    let base = scatter_inject(seq, layout, m)?;
    let d = seq.dim;
    let mut violations = Vec::new();
    let eval_out = |row: usize, col: usize, delta: f64| {
        let mut e = base.seq.data.clone();
        e[row * d + col] += delta;
        loss(&e)
    };
    let mut d_m = vec![0.0; m.len()];
    for (j, &p) in layout.positions.iter().enumerate() {
        for c in 0..d {
            let probe = |delta: f64| -> Result<f64> {
                let mut mm = m.to_vec();
                mm[j * d + c] += delta;
                Ok(loss(&scatter_inject(seq, layout, &mm)?.seq.data))
            };
            let (plus, minus) = (probe(eps)?, probe(-eps)?);
            d_m[j * d + c] = (plus - minus) / (2.0 * eps);
            if plus != eval_out(p, c, eps) || minus != eval_out(p, c, -eps) {
                violations.push(FlowViolation::Routing { slot: j, col: c });
            }
        }
    }
    let base_loss = loss(&base.seq.data);
    for row in 0..seq.seq_len {
        for c in 0..d {
            let mut e = seq.clone();
            e.data[row * d + c] += eps;
            let l = loss(&scatter_inject(&e, layout, m)?.seq.data);
            if layout.contains(row) {
                if l != base_loss {
                    violations.push(FlowViolation::FrozenLeak { row, col: c });
                }
            } else if l != eval_out(row, c, eps) {
                violations.push(FlowViolation::HostRouting { row, col: c });
            }
        }
    }
    let mut updated = seq.clone();
    updated.apply_gradient(&vec![1.0; seq.data.len()], eps)?;
    for &p in &layout.positions {
        if updated.row(p) != seq.row(p) {
            violations.push(FlowViolation::FrozenUpdated { row: p });
        }
    }
    Ok(GradFlowReport { d_m, violations })
}
