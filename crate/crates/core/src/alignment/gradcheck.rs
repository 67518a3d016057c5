//! Central finite-difference verification of analytic gradients.

use alloc::vec::Vec;

use super::loss::{align_loss, cosine_loss, hybrid_loss, mse_loss};
use super::{AlignmentBatch, AlignmentHead, LossGrads, LossKind};
use crate::linalg::Mat;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// `max |a − f| / max(1, |a|, |f|)` over all coordinates.
    pub max_rel_err: f64,
    /// Coordinate where the maximum occurred.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compare `f`'s analytic gradient at `params` with central differences of
/// step `eps`. `f` returns `(loss, gradient)`.
pub fn grad_check<F>(f: F, params: &[f64], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: "must lie in [1e-7, 1e-3]",
        });
    }
    let (loss, analytic) = f(params)?;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    if analytic.len() != params.len() {
        return Err(Error::ShapeMismatch {
            what: "gradient length",
            expected: params.len(),
            actual: analytic.len(),
        });
    }
    let mut x = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let (up, _) = f(&x)?;
        x[i] = orig - eps;
        let (down, _) = f(&x)?;
        x[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic[i];
        let rel = libm::fabs(a - numeric) / 1f64.max(libm::fabs(a)).max(libm::fabs(numeric));
        if rel > report.max_rel_err {
            report = GradCheckReport {
                max_rel_err: rel,
                worst_index: i,
                analytic: a,
                numeric,
            };
        }
    }
    Ok(report)
}

/// Which objective [`flat_loss`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlatObjective {
    Loss(LossKind),
    Cosine,
}

/// Evaluate an objective on the packed parameter vector `[M | V | log τ]`
/// for a `rows × cols` batch; returns the loss and the packed gradient.
pub fn flat_loss(
    objective: impl Into<FlatObjective>,
    rows: usize,
    cols: usize,
    lambda_cos: f64,
    mse_weight: f64,
    params: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = rows * cols;
    if params.len() != 2 * n + 1 {
        return Err(Error::ShapeMismatch {
            what: "packed alignment parameters",
            expected: 2 * n + 1,
            actual: params.len(),
        });
    }
    let m = Mat {
        rows,
        cols,
        data: params[..n].to_vec(),
    };
    let v = Mat {
        rows,
        cols,
        data: params[n..2 * n].to_vec(),
    };
    let batch = AlignmentBatch::new(m, v, lambda_cos)?;
    let head = AlignmentHead {
        proj: Mat::zeros(0, 0),
        log_tau: params[2 * n],
    };
    let g: LossGrads = match objective.into() {
        FlatObjective::Loss(LossKind::InfoNce) => align_loss(&batch, &head)?,
        FlatObjective::Loss(LossKind::Mse) => mse_loss(&batch)?,
        FlatObjective::Loss(LossKind::Hybrid) => hybrid_loss(&batch, &head, mse_weight)?,
        FlatObjective::Cosine => cosine_loss(&batch)?,
    };
    let mut grad = Vec::with_capacity(params.len());
    grad.extend_from_slice(&g.d_m.data);
    grad.extend_from_slice(&g.d_v.data);
    grad.push(g.d_log_tau);
    Ok((g.loss, grad))
}

impl From<LossKind> for FlatObjective {
    fn from(k: LossKind) -> Self {
        FlatObjective::Loss(k)
    }
}
