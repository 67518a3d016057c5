//! Branch encoders and gated tri-stream fusion.
//!
//! Each branch encoder patchifies its codec map, applies one linear
//! projection per patch and mean-pools. Because pooling commutes with the
//! projection, the encoder only ever needs the mean patch vector, which is
//! what [`patch_mean`] computes and what the trainer caches.
//!
//! Fusion is two sigmoid gates: motion with residual, then the result with
//! the I-frame context.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::codec::{MotionField, ResidualMap};
use crate::frames::FrameBuffer;
use crate::linalg::{dot, Mat};
use crate::{Error, Result};

/// Real-valued `width × height × channels` map fed to a branch encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::DataLength {
                expected: width * height * channels,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// One cell per block, two channels (x, y) in pixels.
    pub fn from_motion(field: &MotionField) -> Self {
        let s = field.subpel_scale() as f64;
        let data = field
            .vectors()
            .iter()
            .flat_map(|v| [v.x as f64 / s, v.y as f64 / s])
            .collect();
        Self {
            width: field.grid_w(),
            height: field.grid_h(),
            channels: 2,
            data,
        }
    }

    /// Residual samples scaled to `[-1, 1]`.
    pub fn from_residual(res: &ResidualMap) -> Self {
        Self {
            width: res.width(),
            height: res.height(),
            channels: res.channels(),
            data: res.data().iter().map(|&v| v as f64 / 255.0).collect(),
        }
    }

    /// Frame samples scaled to `[0, 1]`.
    pub fn from_frame(frame: &FrameBuffer) -> Self {
        Self {
            width: frame.width(),
            height: frame.height(),
            channels: frame.channels(),
            data: frame.data().iter().map(|&v| v as f64 / 255.0).collect(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * alpha).collect(),
            ..self.clone()
        }
    }
}

/// Mean over non-overlapping `patch × patch` tiles of the flattened tile
/// (row-major, channels interleaved).
pub fn patch_mean(map: &FeatureMap, patch: usize) -> Result<Vec<f64>> {
    if patch == 0 || !map.width.is_multiple_of(patch) || !map.height.is_multiple_of(patch) {
        return Err(Error::InvalidDimensions {
            width: map.width,
            height: map.height,
            reason: "not divisible by the encoder patch size",
        });
    }
    let ch = map.channels;
    let mut acc = vec![0.0; patch * patch * ch];
    for y in 0..map.height {
        for x in 0..map.width {
            let slot = ((y % patch) * patch + x % patch) * ch;
            let src = (y * map.width + x) * ch;
            for c in 0..ch {
                acc[slot + c] += map.data[src + c];
            }
        }
    }
    let tiles = (map.width / patch * (map.height / patch)) as f64;
    acc.iter_mut().for_each(|v| *v /= tiles);
    Ok(acc)
}

/// Linear patch tokenizer for one branch.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BranchParams {
    pub patch: usize,
    pub in_channels: usize,
    /// `d × patch²·in_channels`
    pub proj: Mat,
    pub bias: Vec<f64>,
}

impl BranchParams {
    pub fn new(patch: usize, in_channels: usize, proj: Mat, bias: Vec<f64>) -> Result<Self> {
        let fan_in = patch * patch * in_channels;
        if proj.rows == 0 || proj.cols != fan_in {
            return Err(Error::ShapeMismatch {
                what: "branch projection columns",
                expected: fan_in,
                actual: proj.cols,
            });
        }
        if bias.len() != proj.rows {
            return Err(Error::ShapeMismatch {
                what: "branch bias",
                expected: proj.rows,
                actual: bias.len(),
            });
        }
        if !proj.is_finite() {
            return Err(Error::InvalidParameter {
                name: "branch projection",
                reason: "entries must be finite",
            });
        }
        Ok(Self {
            patch,
            in_channels,
            proj,
            bias,
        })
    }

    pub fn random<R: Rng + ?Sized>(d: usize, patch: usize, in_channels: usize, rng: &mut R) -> Self {
        Self {
            patch,
            in_channels,
            proj: Mat::glorot(d, patch * patch * in_channels, rng),
            // Nonzero so an all-zero input (e.g. a perfect prediction) still
            // yields a usable code.
            bias: (0..d).map(|_| rng.gen_range(-0.1..0.1)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.proj.rows
    }

    /// Add `∂L/∂θ` for an encoding of patch mean `mean` with upstream `d_h`.
    pub fn accumulate_grad(&mut self, mean: &[f64], d_h: &[f64]) {
        self.proj.add_outer(1.0, d_h, mean);
        self.bias.iter_mut().zip(d_h).for_each(|(b, d)| *b += d);
    }

    /// `proj · x̄ + bias` for a precomputed patch mean.
    pub fn encode_mean(&self, mean: &[f64]) -> Vec<f64> {
        let mut h = self.proj.matvec(mean);
        h.iter_mut().zip(&self.bias).for_each(|(h, b)| *h += b);
        h
    }
}

/// Encode a codec map into one `d`-vector.
pub fn encode_branch(map: &FeatureMap, params: &BranchParams) -> Result<Vec<f64>> {
    if map.channels != params.in_channels {
        return Err(Error::ChannelMismatch {
            expected: params.in_channels,
            actual: map.channels,
        });
    }
    Ok(params.encode_mean(&patch_mean(map, params.patch)?))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GateParams {
    /// `d × 2d`
    pub w: Mat,
    pub b: Vec<f64>,
}

impl GateParams {
    pub fn zeros(d: usize) -> Self {
        Self {
            w: Mat::zeros(d, 2 * d),
            b: vec![0.0; d],
        }
    }

    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        Self {
            w: Mat::glorot(d, 2 * d, rng),
            b: vec![0.0; d],
        }
    }

    pub fn with_bias(d: usize, bias: f64) -> Self {
        Self {
            w: Mat::zeros(d, 2 * d),
            b: vec![bias; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }
}

/// Logistic function kept inside the open interval (0, 1).
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// `g = σ(W[a; b] + bias)`, `g ⊙ a + (1 − g) ⊙ b`.
fn gated_mix(a: &[f64], b: &[f64], gate: &GateParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = gate.dim();
    if gate.w.rows != d || gate.w.cols != 2 * d {
        return Err(Error::ShapeMismatch {
            what: "gate weight",
            expected: 2 * d * d,
            actual: gate.w.rows * gate.w.cols,
        });
    }
    for v in [a, b] {
        if v.len() != d {
            return Err(Error::ShapeMismatch {
                what: "gate operand",
                expected: d,
                actual: v.len(),
            });
        }
    }
    let mut g = Vec::with_capacity(d);
    let mut mixed = Vec::with_capacity(d);
    for r in 0..d {
        let row = gate.w.row(r);
        let z = dot(&row[..d], a) + dot(&row[d..], b) + gate.b[r];
        let gr = sigmoid(z);
        g.push(gr);
        mixed.push(gr * a[r] + (1.0 - gr) * b[r]);
    }
    Ok((mixed, g))
}

/// Motion–residual fusion, returns `(h_mr, g_mr)`.
pub fn fuse_mr(h_mv: &[f64], h_res: &[f64], gate: &GateParams) -> Result<(Vec<f64>, Vec<f64>)> {
    gated_mix(h_mv, h_res, gate)
}

/// Second stage, returns `(h_fused, g_tri)`.
pub fn fuse_tri(h_mr: &[f64], h_ifr: &[f64], gate: &GateParams) -> Result<(Vec<f64>, Vec<f64>)> {
    gated_mix(h_mr, h_ifr, gate)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FusedEmbedding {
    pub h_fused: Vec<f64>,
    pub g_mr: Vec<f64>,
    pub g_tri: Vec<f64>,
}

/// Both gates of the staged fusion, each with its own parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TriStreamFusion {
    pub mr: GateParams,
    pub tri: GateParams,
}

impl TriStreamFusion {
    pub fn fuse(&self, h_mv: &[f64], h_res: &[f64], h_ifr: &[f64]) -> Result<FusedEmbedding> {
        let (h_mr, g_mr) = fuse_mr(h_mv, h_res, &self.mr)?;
        let (h_fused, g_tri) = fuse_tri(&h_mr, h_ifr, &self.tri)?;
        Ok(FusedEmbedding {
            h_fused,
            g_mr,
            g_tri,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FusionMode {
    Concat,
    WeightedSum,
    ConcatMlp,
    Gated,
}

impl FusionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FusionMode::Concat => "concat",
            FusionMode::WeightedSum => "weighted_sum",
            FusionMode::ConcatMlp => "concat_mlp",
            FusionMode::Gated => "gated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "concat" => Some(FusionMode::Concat),
            "weighted_sum" | "weighted-sum" => Some(FusionMode::WeightedSum),
            "concat_mlp" | "concat-mlp" => Some(FusionMode::ConcatMlp),
            "gated" => Some(FusionMode::Gated),
            _ => None,
        }
    }
}

/// Parameters for the ablation fusion modes.
#[derive(Debug, Clone, PartialEq)]
pub enum FusionParams {
    /// `proj · [mv; res; ifr] + bias`, `proj: d × 3d`.
    Concat { proj: Mat, bias: Vec<f64> },
    /// Softmax over three scalar logits.
    WeightedSum { logits: [f64; 3] },
    /// `w2 · tanh(w1 · [mv; res; ifr] + b1) + b2`.
    ConcatMlp {
        w1: Mat,
        b1: Vec<f64>,
        w2: Mat,
        b2: Vec<f64>,
    },
    Gated(TriStreamFusion),
}

fn concat3(a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len() + c.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v.extend_from_slice(c);
    v
}

fn affine(w: &Mat, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if w.cols != x.len() || w.rows != b.len() {
        return Err(Error::ShapeMismatch {
            what: "fusion projection",
            expected: w.cols,
            actual: x.len(),
        });
    }
    let mut y = w.matvec(x);
    y.iter_mut().zip(b).for_each(|(y, b)| *y += b);
    Ok(y)
}

pub fn fuse_variant(
    mode: FusionMode,
    h_mv: &[f64],
    h_res: &[f64],
    h_ifr: &[f64],
    params: &FusionParams,
) -> Result<Vec<f64>> {
    if h_mv.len() != h_res.len() || h_mv.len() != h_ifr.len() {
        return Err(Error::ShapeMismatch {
            what: "branch embedding",
            expected: h_mv.len(),
            actual: if h_res.len() != h_mv.len() { h_res.len() } else { h_ifr.len() },
        });
    }
    match (mode, params) {
        (FusionMode::Concat, FusionParams::Concat { proj, bias }) => {
            affine(proj, &concat3(h_mv, h_res, h_ifr), bias)
        }
        (FusionMode::WeightedSum, FusionParams::WeightedSum { logits }) => {
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e = logits.map(|l| libm::exp(l - m));
            let z: f64 = e.iter().sum();
            let w = e.map(|v| v / z);
            Ok((0..h_mv.len())
                .map(|i| w[0] * h_mv[i] + w[1] * h_res[i] + w[2] * h_ifr[i])
                .collect())
        }
        (FusionMode::ConcatMlp, FusionParams::ConcatMlp { w1, b1, w2, b2 }) => {
            let hidden: Vec<f64> = affine(w1, &concat3(h_mv, h_res, h_ifr), b1)?
                .into_iter()
                .map(libm::tanh)
                .collect();
            affine(w2, &hidden, b2)
        }
        (FusionMode::Gated, FusionParams::Gated(fusion)) => {
            Ok(fusion.fuse(h_mv, h_res, h_ifr)?.h_fused)
        }
        (mode, _) => Err(Error::MissingFusionParams {
            mode: mode.as_str(),
        }),
    }
}

/// Per-label mean of the effective branch weights induced by the two gates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GateRow {
    pub label: String,
    pub w_mv: f64,
    pub w_res: f64,
    pub w_ifr: f64,
    pub n: usize,
}

/// Effective weights of one sample: `g_tri·g_mr`, `g_tri·(1 − g_mr)`,
/// `1 − g_tri`, each averaged over hidden units.
pub fn effective_weights(e: &FusedEmbedding) -> (f64, f64, f64) {
    let d = e.g_mr.len() as f64;
    let (mut mv, mut res, mut ifr) = (0.0, 0.0, 0.0);
    for (&gm, &gt) in e.g_mr.iter().zip(&e.g_tri) {
        mv += gt * gm;
        res += gt * (1.0 - gm);
        ifr += 1.0 - gt;
    }
    (mv / d, res / d, ifr / d)
}

/// Rows sorted by label.
pub fn gate_report<S: AsRef<str>>(samples: &[(FusedEmbedding, S)]) -> Result<Vec<GateRow>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput {
            what: "gate report samples",
        });
    }
    let mut acc: BTreeMap<&str, (f64, f64, f64, usize)> = BTreeMap::new();
    for (e, label) in samples {
        if e.g_mr.is_empty() || e.g_mr.len() != e.g_tri.len() {
            return Err(Error::ShapeMismatch {
                what: "gate vectors",
                expected: e.g_mr.len(),
                actual: e.g_tri.len(),
            });
        }
        let (mv, res, ifr) = effective_weights(e);
        let slot = acc.entry(label.as_ref()).or_default();
        slot.0 += mv;
        slot.1 += res;
        slot.2 += ifr;
        slot.3 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|(label, (mv, res, ifr, n))| {
            let k = n as f64;
            GateRow {
                label: String::from(label),
                w_mv: mv / k,
                w_res: res / k,
                w_ifr: ifr / k,
                n,
            }
        })
        .collect())
}

/// Cached forward state of one sample through the adapter.
#[derive(Debug, Clone)]
pub struct AdapterTrace {
    pub h_mv: Vec<f64>,
    pub h_res: Vec<f64>,
    pub h_ifr: Vec<f64>,
    pub h_mr: Vec<f64>,
    pub fused: FusedEmbedding,
}

/// Patch means of one interval's three maps.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchInputs {
    pub mv: Vec<f64>,
    pub res: Vec<f64>,
    pub ifr: Vec<f64>,
}

/// The full adapter: three encoders plus staged gated fusion.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Adapter {
    pub mv: BranchParams,
    pub res: BranchParams,
    pub ifr: BranchParams,
    pub fusion: TriStreamFusion,
}

impl Adapter {
    pub fn dim(&self) -> usize {
        self.mv.dim()
    }

    pub fn inputs(&self, mv: &FeatureMap, res: &FeatureMap, ifr: &FeatureMap) -> Result<BranchInputs> {
        let check = |map: &FeatureMap, p: &BranchParams| {
            if map.channels != p.in_channels {
                return Err(Error::ChannelMismatch {
                    expected: p.in_channels,
                    actual: map.channels,
                });
            }
            patch_mean(map, p.patch)
        };
        Ok(BranchInputs {
            mv: check(mv, &self.mv)?,
            res: check(res, &self.res)?,
            ifr: check(ifr, &self.ifr)?,
        })
    }

    pub fn forward(&self, x: &BranchInputs) -> Result<AdapterTrace> {
        let h_mv = self.mv.encode_mean(&x.mv);
        let h_res = self.res.encode_mean(&x.res);
        let h_ifr = self.ifr.encode_mean(&x.ifr);
        let (h_mr, g_mr) = fuse_mr(&h_mv, &h_res, &self.fusion.mr)?;
        let (h_fused, g_tri) = fuse_tri(&h_mr, &h_ifr, &self.fusion.tri)?;
        Ok(AdapterTrace {
            h_mv,
            h_res,
            h_ifr,
            h_mr,
            fused: FusedEmbedding {
                h_fused,
                g_mr,
                g_tri,
            },
        })
    }

    /// Accumulate `∂L/∂θ` into `grads` given `∂L/∂h_fused`.
    pub fn backward(&self, x: &BranchInputs, t: &AdapterTrace, d_fused: &[f64], grads: &mut Adapter) {
        let d = self.dim();
        let mut d_mr = vec![0.0; d];
        let mut d_ifr = vec![0.0; d];
        gate_backward(
            &self.fusion.tri,
            &t.h_mr,
            &t.h_ifr,
            &t.fused.g_tri,
            d_fused,
            &mut grads.fusion.tri,
            &mut d_mr,
            &mut d_ifr,
        );
        let mut d_mv = vec![0.0; d];
        let mut d_res = vec![0.0; d];
        gate_backward(
            &self.fusion.mr,
            &t.h_mv,
            &t.h_res,
            &t.fused.g_mr,
            &d_mr,
            &mut grads.fusion.mr,
            &mut d_mv,
            &mut d_res,
        );
        grads.mv.accumulate_grad(&x.mv, &d_mv);
        grads.res.accumulate_grad(&x.res, &d_res);
        grads.ifr.accumulate_grad(&x.ifr, &d_ifr);
    }

    pub fn zeros_like(&self) -> Adapter {
        let z = |p: &BranchParams| BranchParams {
            patch: p.patch,
            in_channels: p.in_channels,
            proj: Mat::zeros(p.proj.rows, p.proj.cols),
            bias: vec![0.0; p.bias.len()],
        };
        Adapter {
            mv: z(&self.mv),
            res: z(&self.res),
            ifr: z(&self.ifr),
            fusion: TriStreamFusion {
                mr: GateParams::zeros(self.dim()),
                tri: GateParams::zeros(self.dim()),
            },
        }
    }

    /// Parameter slices in a fixed order, for flat optimisers and checks.
    pub fn param_slices(&self) -> [&[f64]; 10] {
        [
            &self.mv.proj.data,
            &self.mv.bias,
            &self.res.proj.data,
            &self.res.bias,
            &self.ifr.proj.data,
            &self.ifr.bias,
            &self.fusion.mr.w.data,
            &self.fusion.mr.b,
            &self.fusion.tri.w.data,
            &self.fusion.tri.b,
        ]
    }

    pub fn param_slices_mut(&mut self) -> [&mut [f64]; 10] {
        [
            &mut self.mv.proj.data,
            &mut self.mv.bias,
            &mut self.res.proj.data,
            &mut self.res.bias,
            &mut self.ifr.proj.data,
            &mut self.ifr.bias,
            &mut self.fusion.mr.w.data,
            &mut self.fusion.mr.b,
            &mut self.fusion.tri.w.data,
            &mut self.fusion.tri.b,
        ]
    }
}

/// Backward through `out = g ⊙ a + (1 − g) ⊙ b`, `g = σ(W[a; b] + bias)`.
#[allow(clippy::too_many_arguments)]
fn gate_backward(
    gate: &GateParams,
    a: &[f64],
    b: &[f64],
    g: &[f64],
    d_out: &[f64],
    grad: &mut GateParams,
    d_a: &mut [f64],
    d_b: &mut [f64],
) {
    let d = gate.dim();
    let mut dz = vec![0.0; d];
    for r in 0..d {
        d_a[r] += d_out[r] * g[r];
        d_b[r] += d_out[r] * (1.0 - g[r]);
        dz[r] = d_out[r] * (a[r] - b[r]) * g[r] * (1.0 - g[r]);
    }
    let ab = concat3(a, b, &[]);
    grad.w.add_outer(1.0, &dz, &ab);
    grad.b.iter_mut().zip(&dz).for_each(|(gb, dz)| *gb += dz);
    let back = gate.w.matvec_t(&dz);
    d_a.iter_mut().zip(&back[..d]).for_each(|(x, y)| *x += y);
    d_b.iter_mut().zip(&back[d..]).for_each(|(x, y)| *x += y);
}
