//! Alignment objectives with analytic gradients.
//!
//! With `m̂`, `v̂` the row-normalised codes and `S = M̂ V̂ᵀ`, the contrastive
//! term averages the row-wise (motion → vision) and column-wise
//! (vision → motion) cross-entropies of `S / τ` against the diagonal.
//! Its gradient w.r.t. `S` is `(P + Q − 2I) / (2Bτ)` where `P` and `Q` are
//! the row and column softmaxes; the chain through row normalisation is
//! `(g − (g·x̂) x̂) / ‖x‖`.

use alloc::vec;
use alloc::vec::Vec;

use super::{AlignmentBatch, AlignmentHead};
use crate::linalg::{axpy, dot, norm, Mat};
use crate::{Error, Result};

/// Auxiliary regression weight of the hybrid objective.
pub const DEFAULT_MSE_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LossKind {
    InfoNce,
    Mse,
    Hybrid,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::InfoNce => "infonce",
            LossKind::Mse => "mse",
            LossKind::Hybrid => "hybrid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "infonce" => Some(LossKind::InfoNce),
            "mse" => Some(LossKind::Mse),
            "hybrid" => Some(LossKind::Hybrid),
            _ => None,
        }
    }
}

/// A loss value with gradients w.r.t. `M`, `V` and `log τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrads {
    pub loss: f64,
    pub d_m: Mat,
    pub d_v: Mat,
    pub d_log_tau: f64,
}

impl LossGrads {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            loss: 0.0,
            d_m: Mat::zeros(rows, cols),
            d_v: Mat::zeros(rows, cols),
            d_log_tau: 0.0,
        }
    }

    /// `self += w · other`
    pub fn add_scaled(&mut self, w: f64, other: &LossGrads) {
        self.loss += w * other.loss;
        axpy(w, &other.d_m.data, &mut self.d_m.data);
        axpy(w, &other.d_v.data, &mut self.d_v.data);
        self.d_log_tau += w * other.d_log_tau;
    }
}

struct Normalized {
    unit: Mat,
    norms: Vec<f64>,
}

fn normalize_rows(x: &Mat) -> Normalized {
    let mut unit = x.clone();
    let mut norms = Vec::with_capacity(x.rows);
    for r in 0..x.rows {
        let n = norm(x.row(r));
        unit.row_mut(r).iter_mut().for_each(|v| *v /= n);
        norms.push(n);
    }
    Normalized { unit, norms }
}

/// Pull a gradient w.r.t. unit rows back to the raw rows.
fn unnormalize_grad(g_unit: &Mat, n: &Normalized) -> Mat {
    let mut out = g_unit.clone();
    for r in 0..g_unit.rows {
        let u = n.unit.row(r);
        let proj = dot(g_unit.row(r), u);
        let inv = 1.0 / n.norms[r];
        for (o, &ui) in out.row_mut(r).iter_mut().zip(u) {
            *o = (*o - proj * ui) * inv;
        }
    }
    out
}

fn log_softmax_diag(logits: &[f64], k: usize, probs: &mut [f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (p, &l) in probs.iter_mut().zip(logits) {
        *p = libm::exp(l - max);
        z += *p;
    }
    probs.iter_mut().for_each(|p| *p /= z);
    logits[k] - max - libm::log(z)
}

/// Bidirectional InfoNCE over cosine similarities at temperature `tau`.
pub fn infonce_loss(batch: &AlignmentBatch, tau: f64) -> Result<LossGrads> {
    let b = batch.rows();
    if b < 2 {
        return Err(Error::BatchTooSmall { rows: b });
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter {
            name: "temperature",
            reason: "must be positive and finite",
        });
    }
    batch.check_norms()?;
    let mn = normalize_rows(&batch.m);
    let vn = normalize_rows(&batch.v);
    let sim = Mat::from_fn(b, b, |i, j| dot(mn.unit.row(i), vn.unit.row(j)));

    // dL/dS accumulated in `g`.
    let scale = 1.0 / (2.0 * b as f64 * tau);
    let mut g = Mat::zeros(b, b);
    let mut loss = 0.0;
    let mut logits = vec![0.0; b];
    let mut probs = vec![0.0; b];
    for k in 0..b {
        logits.iter_mut().enumerate().for_each(|(j, l)| *l = sim.get(k, j) / tau);
        loss -= log_softmax_diag(&logits, k, &mut probs);
        for (j, p) in probs.iter().enumerate() {
            g.data[k * b + j] += scale * (p - if j == k { 1.0 } else { 0.0 });
        }
        logits.iter_mut().enumerate().for_each(|(i, l)| *l = sim.get(i, k) / tau);
        loss -= log_softmax_diag(&logits, k, &mut probs);
        for (i, p) in probs.iter().enumerate() {
            g.data[i * b + k] += scale * (p - if i == k { 1.0 } else { 0.0 });
        }
    }
    loss /= 2.0 * b as f64;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }

    let d = batch.m.cols;
    let mut g_mu = Mat::zeros(b, d);
    let mut g_vu = Mat::zeros(b, d);
    for i in 0..b {
        for j in 0..b {
            let gij = g.get(i, j);
            axpy(gij, vn.unit.row(j), g_mu.row_mut(i));
            axpy(gij, mn.unit.row(i), g_vu.row_mut(j));
        }
    }
    // Logits are S·e^{−log τ}, so ∂L/∂log τ = −Σ (∂L/∂logit)·logit = −Σ G∘S.
    let d_log_tau = -g.data.iter().zip(&sim.data).map(|(g, s)| g * s).sum::<f64>();
    Ok(LossGrads {
        loss,
        d_m: unnormalize_grad(&g_mu, &mn),
        d_v: unnormalize_grad(&g_vu, &vn),
        d_log_tau,
    })
}

/// `mean_k (1 − cos(m_k, v_k))`, unweighted.
pub fn cosine_loss(batch: &AlignmentBatch) -> Result<LossGrads> {
    batch.check_norms()?;
    let b = batch.rows();
    let mn = normalize_rows(&batch.m);
    let vn = normalize_rows(&batch.v);
    let mut out = LossGrads::zeros(b, batch.m.cols);
    let inv_b = 1.0 / b as f64;
    let mut g_mu = Mat::zeros(b, batch.m.cols);
    let mut g_vu = Mat::zeros(b, batch.m.cols);
    for k in 0..b {
        let c = dot(mn.unit.row(k), vn.unit.row(k));
        out.loss += (1.0 - c) * inv_b;
        axpy(-inv_b, vn.unit.row(k), g_mu.row_mut(k));
        axpy(-inv_b, mn.unit.row(k), g_vu.row_mut(k));
    }
    out.d_m = unnormalize_grad(&g_mu, &mn);
    out.d_v = unnormalize_grad(&g_vu, &vn);
    Ok(out)
}

/// InfoNCE at the head's temperature plus `λ_cos` times the cosine term.
pub fn align_loss(batch: &AlignmentBatch, head: &AlignmentHead) -> Result<LossGrads> {
    let mut total = infonce_loss(batch, head.tau())?;
    if batch.lambda_cos != 0.0 {
        total.add_scaled(batch.lambda_cos, &cosine_loss(batch)?);
    }
    Ok(total)
}

/// `(1/B) Σ ‖m_k − v_k‖²`.
pub fn mse_loss(batch: &AlignmentBatch) -> Result<LossGrads> {
    let (b, d) = (batch.rows(), batch.m.cols);
    let mut out = LossGrads::zeros(b, d);
    let inv_b = 1.0 / b as f64;
    for i in 0..b * d {
        let diff = batch.m.data[i] - batch.v.data[i];
        out.loss += diff * diff * inv_b;
        out.d_m.data[i] = 2.0 * diff * inv_b;
        out.d_v.data[i] = -2.0 * diff * inv_b;
    }
    if !out.loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok(out)
}

/// Contrastive alignment plus `mse_weight` times the regression term.
pub fn hybrid_loss(batch: &AlignmentBatch, head: &AlignmentHead, mse_weight: f64) -> Result<LossGrads> {
    let mut total = align_loss(batch, head)?;
    if mse_weight != 0.0 {
        total.add_scaled(mse_weight, &mse_loss(batch)?);
    }
    Ok(total)
}
