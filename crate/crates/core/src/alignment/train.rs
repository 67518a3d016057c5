//! Deterministic desk-scale alignment training.
//!
//! Host features are frozen; the trainable parameters are the three branch
//! encoders, both fusion gates and the alignment head (projection and
//! temperature). Optimisation is SGD with heavy-ball momentum.

use alloc::vec;
use alloc::vec::Vec;
use core::slice;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{MotionClass, MotionDataset};
use super::loss::{align_loss, hybrid_loss, mse_loss, LossGrads, LossKind, DEFAULT_MSE_WEIGHT};
use super::{AlignmentBatch, AlignmentHead, DEFAULT_LAMBDA_COS};
use crate::adapter::{Adapter, BranchInputs, BranchParams, FusedEmbedding, GateParams, TriStreamFusion};
use crate::linalg::{axpy, dot, norm, Mat};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Minibatch size; the whole set is used when it is not larger.
    pub batch: usize,
    pub d: usize,
    pub d_v: usize,
    pub lambda_cos: f64,
    pub loss: LossKind,
    pub mse_weight: f64,
    pub init_tau: f64,
    /// Extra per-branch alignment heads, each adding its own loss term.
    pub branch_heads: bool,
    pub mv_patch: usize,
    pub res_patch: usize,
    pub ifr_patch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            lr: 0.01,
            momentum: 0.9,
            batch: 256,
            d: 64,
            d_v: 6,
            lambda_cos: DEFAULT_LAMBDA_COS,
            loss: LossKind::InfoNce,
            mse_weight: DEFAULT_MSE_WEIGHT,
            init_tau: 0.1,
            branch_heads: false,
            mv_patch: 2,
            res_patch: 8,
            ifr_patch: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Model {
    pub adapter: Adapter,
    pub head: AlignmentHead,
    /// Optional heads on `h_mv`, `h_res`, `h_ifr`.
    pub branch_heads: Option<[AlignmentHead; 3]>,
}

impl Model {
    /// Random initialisation for maps with the given channel counts.
    pub fn init(config: &TrainConfig, channels: (usize, usize, usize)) -> Result<Self> {
        if config.d == 0 || config.d_v == 0 {
            return Err(Error::InvalidParameter {
                name: "model width",
                reason: "d and d_v must be positive",
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.d;
        let adapter = Adapter {
            mv: BranchParams::random(d, config.mv_patch, channels.0, &mut rng),
            res: BranchParams::random(d, config.res_patch, channels.1, &mut rng),
            ifr: BranchParams::random(d, config.ifr_patch, channels.2, &mut rng),
            fusion: TriStreamFusion {
                mr: GateParams::random(d, &mut rng),
                tri: GateParams::random(d, &mut rng),
            },
        };
        let mut head = || AlignmentHead::new(Mat::glorot(config.d_v, d, &mut rng), config.init_tau);
        let main = head()?;
        let branch_heads = if config.branch_heads {
            Some([head()?, head()?, head()?])
        } else {
            None
        };
        Ok(Self {
            adapter,
            head: main,
            branch_heads,
        })
    }

    pub fn zeros_like(&self) -> Self {
        let zero_head = |h: &AlignmentHead| AlignmentHead {
            proj: Mat::zeros(h.proj.rows, h.proj.cols),
            log_tau: 0.0,
        };
        Self {
            adapter: self.adapter.zeros_like(),
            head: zero_head(&self.head),
            branch_heads: self
                .branch_heads
                .as_ref()
                .map(|hs| [zero_head(&hs[0]), zero_head(&hs[1]), zero_head(&hs[2])]),
        }
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self.adapter.param_slices_mut().into_iter().collect();
        out.push(&mut self.head.proj.data);
        out.push(slice::from_mut(&mut self.head.log_tau));
        if let Some(hs) = self.branch_heads.as_mut() {
            for h in hs.iter_mut() {
                out.push(&mut h.proj.data);
                out.push(slice::from_mut(&mut h.log_tau));
            }
        }
        out
    }

    pub fn flatten(&mut self) -> Vec<f64> {
        self.param_slices_mut().into_iter().flat_map(|s| s.iter().copied()).collect()
    }

    pub fn unflatten(&mut self, flat: &[f64]) {
        let mut at = 0;
        for s in self.param_slices_mut() {
            s.copy_from_slice(&flat[at..at + s.len()]);
            at += s.len();
        }
    }

    pub fn embed_one(&self, x: &BranchInputs) -> Result<(Vec<f64>, FusedEmbedding)> {
        let t = self.adapter.forward(x)?;
        Ok((self.head.proj.matvec(&t.fused.h_fused), t.fused))
    }
}

fn objective(kind: LossKind, batch: &AlignmentBatch, head: &AlignmentHead, mse_weight: f64) -> Result<LossGrads> {
    match kind {
        LossKind::InfoNce => align_loss(batch, head),
        LossKind::Mse => mse_loss(batch),
        LossKind::Hybrid => hybrid_loss(batch, head, mse_weight),
    }
}

fn rows_mat(rows: &[Vec<f64>]) -> Mat {
    let cols = rows.first().map_or(0, Vec::len);
    Mat {
        rows: rows.len(),
        cols,
        data: rows.iter().flatten().copied().collect(),
    }
}

fn mean_row_cosine(m: &Mat, v: &Mat) -> f64 {
    let total: f64 = (0..m.rows)
        .map(|r| {
            let denom = norm(m.row(r)) * norm(v.row(r));
            if denom == 0.0 {
                0.0
            } else {
                (dot(m.row(r), v.row(r)) / denom).clamp(-1.0, 1.0)
            }
        })
        .sum();
    total / m.rows as f64
}

/// Loss, parameter gradient and mean cosine of `model` on one batch.
pub fn model_loss(
    model: &Model,
    inputs: &[&BranchInputs],
    targets: &Mat,
    config: &TrainConfig,
) -> Result<(f64, Model, f64)> {
    let traces = inputs
        .iter()
        .map(|x| model.adapter.forward(x))
        .collect::<Result<Vec<_>>>()?;
    let m_rows: Vec<Vec<f64>> = traces
        .iter()
        .map(|t| model.head.proj.matvec(&t.fused.h_fused))
        .collect();
    let batch = AlignmentBatch::new(rows_mat(&m_rows), targets.clone(), config.lambda_cos)?;
    let cosine = mean_row_cosine(&batch.m, targets);
    let main = objective(config.loss, &batch, &model.head, config.mse_weight)?;

    let mut grads = model.zeros_like();
    let mut loss = main.loss;
    grads.head.log_tau = main.d_log_tau;
    for (k, (x, t)) in inputs.iter().zip(&traces).enumerate() {
        let dm = main.d_m.row(k);
        grads.head.proj.add_outer(1.0, dm, &t.fused.h_fused);
        let d_fused = model.head.proj.matvec_t(dm);
        model.adapter.backward(x, t, &d_fused, &mut grads.adapter);
    }

    if let (Some(heads), Some(gheads)) = (model.branch_heads.as_ref(), grads.branch_heads.as_mut()) {
        for (b, (head, ghead)) in heads.iter().zip(gheads.iter_mut()).enumerate() {
            let h_of = |t: &crate::adapter::AdapterTrace| match b {
                0 => t.h_mv.clone(),
                1 => t.h_res.clone(),
                _ => t.h_ifr.clone(),
            };
            let hs: Vec<Vec<f64>> = traces.iter().map(h_of).collect();
            let rows: Vec<Vec<f64>> = hs.iter().map(|h| head.proj.matvec(h)).collect();
            let bb = AlignmentBatch::new(rows_mat(&rows), targets.clone(), config.lambda_cos)?;
            let g = objective(config.loss, &bb, head, config.mse_weight)?;
            loss += g.loss;
            ghead.log_tau += g.d_log_tau;
            for (k, x) in inputs.iter().enumerate() {
                let dm = g.d_m.row(k);
                ghead.proj.add_outer(1.0, dm, &hs[k]);
                let dh = head.proj.matvec_t(dm);
                let (branch, mean) = match b {
                    0 => (&mut grads.adapter.mv, &x.mv),
                    1 => (&mut grads.adapter.res, &x.res),
                    _ => (&mut grads.adapter.ifr, &x.ifr),
                };
                branch.accumulate_grad(mean, &dh);
            }
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok((loss, grads, cosine))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainStep {
    pub loss: f64,
    pub mean_cosine: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainHistory {
    pub steps: Vec<TrainStep>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Means of consecutive non-overlapping windows of `window` steps
    /// (a trailing partial window is dropped).
    pub fn smoothed_loss(&self, window: usize) -> Vec<f64> {
        if window == 0 {
            return Vec::new();
        }
        self.steps
            .chunks_exact(window)
            .map(|c| c.iter().map(|s| s.loss).sum::<f64>() / window as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub history: TrainHistory,
    pub model: Model,
}

fn check_config(config: &TrainConfig, data: &MotionDataset) -> Result<()> {
    if config.steps == 0 {
        return Err(Error::InvalidParameter {
            name: "steps",
            reason: "must be at least 1",
        });
    }
    if data.is_empty() {
        return Err(Error::EmptyInput { what: "training set" });
    }
    if config.d_v != data.target_dim() {
        return Err(Error::ShapeMismatch {
            what: "target dimension d_v",
            expected: data.target_dim(),
            actual: config.d_v,
        });
    }
    let need_pairs = matches!(config.loss, LossKind::InfoNce | LossKind::Hybrid);
    if need_pairs && config.batch.min(data.len()) < 2 {
        return Err(Error::BatchTooSmall {
            rows: config.batch.min(data.len()),
        });
    }
    if !(config.lr.is_finite() && config.lr > 0.0) || !(0.0..1.0).contains(&config.momentum) {
        return Err(Error::InvalidParameter {
            name: "optimiser",
            reason: "lr must be positive and momentum in [0, 1)",
        });
    }
    Ok(())
}

fn prepare(model: &Model, data: &MotionDataset) -> Result<(Vec<BranchInputs>, Mat)> {
    let inputs = data
        .samples
        .iter()
        .map(|s| model.adapter.inputs(&s.mv, &s.res, &s.ifr))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<Vec<f64>> = data.samples.iter().map(|s| s.target.clone()).collect();
    Ok((inputs, rows_mat(&targets)))
}

/// Train from a fresh initialisation. Deterministic for a fixed config.
pub fn train_stage1(config: &TrainConfig, data: &MotionDataset) -> Result<TrainRun> {
    check_config(config, data)?;
    let first = &data.samples[0];
    let mut model = Model::init(config, (first.mv.channels, first.res.channels, first.ifr.channels))?;
    let (inputs, targets) = prepare(&model, data)?;
    let n = inputs.len();
    let b = config.batch.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_ba7c_4000_0001);
    let mut velocity = model.zeros_like();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = TrainHistory::default();

    for step in 0..config.steps {
        if b < n {
            // Partial Fisher–Yates: the first b entries become the batch.
            for i in 0..b {
                let j = rng.gen_range(i..n);
                order.swap(i, j);
            }
        }
        let idx = &order[..b];
        let batch_inputs: Vec<&BranchInputs> = idx.iter().map(|&i| &inputs[i]).collect();
        let batch_targets = Mat::from_fn(b, targets.cols, |r, c| targets.get(idx[r], c));
        let (loss, grads, cosine) = match model_loss(&model, &batch_inputs, &batch_targets, config) {
            Ok(v) => v,
            Err(Error::NonFiniteLoss) => return Err(Error::Diverged { step }),
            Err(e) => return Err(e),
        };
        history.steps.push(TrainStep {
            loss,
            mean_cosine: cosine,
            tau: model.head.tau(),
        });

        let mut grads = grads;
        for ((p, g), v) in model
            .param_slices_mut()
            .into_iter()
            .zip(grads.param_slices_mut())
            .zip(velocity.param_slices_mut())
        {
            for ((p, g), v) in p.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                *v = config.momentum * *v + g;
                *p -= config.lr * *v;
            }
        }
        if model.flatten().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { step });
        }
    }
    Ok(TrainRun { history, model })
}

/// Motion codes `m_k` for every sample, one row each.
pub fn embed(model: &Model, data: &MotionDataset) -> Result<Mat> {
    let (inputs, _) = prepare(model, data)?;
    let rows = inputs
        .iter()
        .map(|x| model.embed_one(x).map(|(m, _)| m))
        .collect::<Result<Vec<_>>>()?;
    Ok(rows_mat(&rows))
}

/// Mean `cos(m_k, v_k)` over the whole set.
pub fn mean_cosine(model: &Model, data: &MotionDataset) -> Result<f64> {
    let (_, targets) = prepare(model, data)?;
    Ok(mean_row_cosine(&embed(model, data)?, &targets))
}

/// Mean pairwise angle (radians) between the unit mean directions of each
/// class's unit-normalised embeddings.
pub fn between_class_separation(embeddings: &Mat, labels: &[MotionClass]) -> Result<f64> {
    if embeddings.rows != labels.len() {
        return Err(Error::ShapeMismatch {
            what: "label count",
            expected: embeddings.rows,
            actual: labels.len(),
        });
    }
    let mut centroids: Vec<Vec<f64>> = Vec::new();
    for class in MotionClass::ALL {
        let mut c = vec![0.0; embeddings.cols];
        let mut count = 0;
        for (r, _) in labels.iter().enumerate().filter(|(_, l)| **l == class) {
            let row = embeddings.row(r);
            let n = norm(row);
            if n > 0.0 {
                axpy(1.0 / n, row, &mut c);
                count += 1;
            }
        }
        let n = norm(&c);
        if count > 0 && n > 0.0 {
            c.iter_mut().for_each(|v| *v /= n);
            centroids.push(c);
        }
    }
    if centroids.len() < 2 {
        return Err(Error::EmptyInput {
            what: "class centroids",
        });
    }
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..centroids.len() {
        for j in i + 1..centroids.len() {
            total += libm::acos(dot(&centroids[i], &centroids[j]).clamp(-1.0, 1.0));
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Fused embeddings with their class labels, for gate reporting.
pub fn fused_with_labels(model: &Model, data: &MotionDataset) -> Result<Vec<(FusedEmbedding, &'static str)>> {
    let (inputs, _) = prepare(model, data)?;
    inputs
        .iter()
        .zip(&data.samples)
        .map(|(x, s)| Ok((model.embed_one(x)?.1, s.class.as_str())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::{grad_check, DatasetConfig};

    fn tiny() -> (TrainConfig, MotionDataset) {
        let data = MotionDataset::synthetic(&DatasetConfig {
            clips: 4,
            ..Default::default()
        })
        .unwrap();
        let config = TrainConfig {
            d: 6,
            batch: 8,
            steps: 5,
            ..Default::default()
        };
        (config, data)
    }

    fn check_model_gradient(config: &TrainConfig) {
        let (_, data) = tiny();
        let mut model = Model::init(config, (2, 1, 1)).unwrap();
        let (inputs, targets) = prepare(&model, &data).unwrap();
        let idx: Vec<usize> = (0..6).collect();
        let xs: Vec<&BranchInputs> = idx.iter().map(|&i| &inputs[i]).collect();
        let v = Mat::from_fn(6, targets.cols, |r, c| targets.get(idx[r], c));
        let flat = model.flatten();
        let probe = model.clone();
        let f = |p: &[f64]| {
            let mut m = probe.clone();
            m.unflatten(p);
            let (loss, mut g, _) = model_loss(&m, &xs, &v, config)?;
            Ok((loss, g.flatten()))
        };
        let report = grad_check(f, &flat, 1e-6).unwrap();
        assert!(report.max_rel_err <= 1e-4, "{report:?}");
        model.unflatten(&flat);
    }

    #[test]
    fn model_gradient_matches_finite_differences() {
        let (config, _) = tiny();
        for loss in [LossKind::InfoNce, LossKind::Mse, LossKind::Hybrid] {
            check_model_gradient(&TrainConfig { loss, ..config.clone() });
        }
        check_model_gradient(&TrainConfig {
            branch_heads: true,
            ..config
        });
    }

    #[test]
    fn training_is_deterministic() {
        let (config, data) = tiny();
        let a = train_stage1(&config, &data).unwrap();
        let b = train_stage1(&config, &data).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.history.len(), 5);
        let c = train_stage1(&TrainConfig { seed: 1, ..config }, &data).unwrap();
        assert_ne!(a.history, c.history);
    }

    #[test]
    fn rejects_bad_configs() {
        let (config, data) = tiny();
        assert!(matches!(
            train_stage1(&TrainConfig { steps: 0, ..config.clone() }, &data),
            Err(Error::InvalidParameter { name: "steps", .. })
        ));
        assert!(train_stage1(&TrainConfig { d_v: 5, ..config.clone() }, &data).is_err());
        assert!(train_stage1(&TrainConfig { batch: 1, ..config.clone() }, &data).is_err());
        assert!(matches!(
            train_stage1(&TrainConfig { lr: 1e6, steps: 50, loss: LossKind::Mse, ..config }, &data),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn separation_of_axis_aligned_classes() {
        let rows = [[0.0, -1.0], [0.0, 1.0], [-1.0, 0.0], [1.0, 0.0]];
        let m = Mat::from_fn(4, 2, |r, c| rows[r][c]);
        let s = between_class_separation(&m, &MotionClass::ALL).unwrap();
        // Two opposite pairs (π) and four orthogonal pairs (π/2).
        let expect = (2.0 * core::f64::consts::PI + 4.0 * core::f64::consts::FRAC_PI_2) / 6.0;
        assert!((s - expect).abs() < 1e-12);
    }

    #[test]
    fn smoothing_windows() {
        let h = TrainHistory {
            steps: (0..7)
                .map(|i| TrainStep {
                    loss: i as f64,
                    mean_cosine: 0.0,
                    tau: 1.0,
                })
                .collect(),
        };
        assert_eq!(h.smoothed_loss(3), vec![1.0, 4.0]);
    }
}
