//! Motion-space alignment: targets, losses, gradient checks and training.

mod dataset;
mod features;
mod gradcheck;
mod loss;
mod train;

use crate::linalg::{norm, Mat};
use crate::{Error, Result};

pub use dataset::{DatasetConfig, MotionClass, MotionDataset, Sample};
pub use features::{host_features, visual_delta, FeatureGrid};
pub use gradcheck::{flat_loss, grad_check, FlatObjective, GradCheckReport};
pub use loss::{
    align_loss, cosine_loss, hybrid_loss, infonce_loss, mse_loss, LossGrads, LossKind,
    DEFAULT_MSE_WEIGHT,
};
pub use train::{
    between_class_separation, embed, fused_with_labels, mean_cosine, model_loss, train_stage1,
    Model, TrainConfig,
    TrainHistory, TrainRun, TrainStep,
};

/// Default weight of the cosine regulariser.
pub const DEFAULT_LAMBDA_COS: f64 = 0.1;

/// Projection from the fused embedding to the alignment space plus a
/// learned temperature, stored as `log τ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlignmentHead {
    /// `d_v × d`
    pub proj: Mat,
    pub log_tau: f64,
}

impl AlignmentHead {
    pub fn new(proj: Mat, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter {
                name: "temperature",
                reason: "must be positive and finite",
            });
        }
        if !proj.is_finite() {
            return Err(Error::InvalidParameter {
                name: "alignment projection",
                reason: "entries must be finite",
            });
        }
        Ok(Self {
            proj,
            log_tau: libm::log(tau),
        })
    }

    pub fn tau(&self) -> f64 {
        libm::exp(self.log_tau)
    }
}

/// Paired motion codes `M` and visual deltas `V`, one row per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentBatch {
    pub m: Mat,
    pub v: Mat,
    pub lambda_cos: f64,
}

impl AlignmentBatch {
    pub fn new(m: Mat, v: Mat, lambda_cos: f64) -> Result<Self> {
        if m.rows != v.rows || m.cols != v.cols {
            return Err(Error::ShapeMismatch {
                what: "alignment batch",
                expected: m.rows * m.cols,
                actual: v.rows * v.cols,
            });
        }
        if m.rows == 0 {
            return Err(Error::EmptyInput {
                what: "alignment batch",
            });
        }
        if !(lambda_cos.is_finite() && lambda_cos >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda_cos",
                reason: "must be nonnegative",
            });
        }
        if !m.is_finite() || !v.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        Ok(Self { m, v, lambda_cos })
    }

    pub fn rows(&self) -> usize {
        self.m.rows
    }

    /// Rows must be nonzero for cosine similarity to exist.
    pub(crate) fn check_norms(&self) -> Result<()> {
        for (name, mat) in [("M", &self.m), ("V", &self.v)] {
            if let Some(row) = (0..mat.rows).find(|&r| norm(mat.row(r)) == 0.0) {
                return Err(Error::ZeroNormRow { matrix: name, row });
            }
        }
        Ok(())
    }
}
