//! Trainer config files, history CSV and run summaries.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tristream_core::adapter::{gate_report, GateRow};
use tristream_core::alignment::{
    between_class_separation, embed, fused_with_labels, mean_cosine, train_stage1, DatasetConfig, LossKind,
    MotionDataset, TrainConfig, TrainHistory, TrainRun, TrainStep,
};

use crate::error::{Error, Result};

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        reason: format!("bad value '{value}' for {key}"),
    })
}

/// Parse a flat `key = value` file. `#` starts a comment; `data.*` keys
/// configure the synthetic dataset.
pub fn parse_train_config(text: &str) -> Result<(TrainConfig, DatasetConfig)> {
    let mut t = TrainConfig::default();
    let mut d = DatasetConfig::default();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            reason: "expected key = value".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(Error::Config {
                line,
                reason: format!("duplicate key {key}"),
            });
        }
        macro_rules! set {
            ($field:expr) => {
                $field = parse_value(line, key, value)?
            };
        }
        match key {
            "steps" => set!(t.steps),
            "lr" => set!(t.lr),
            "momentum" => set!(t.momentum),
            "batch" => set!(t.batch),
            "d" => set!(t.d),
            "d_v" => set!(t.d_v),
            "lambda_cos" => set!(t.lambda_cos),
            "loss" => {
                t.loss = LossKind::parse(value).ok_or_else(|| Error::Config {
                    line,
                    reason: format!("unknown loss '{value}' (infonce, mse, hybrid)"),
                })?
            }
            "mse_weight" => set!(t.mse_weight),
            "init_tau" => set!(t.init_tau),
            "branch_heads" => set!(t.branch_heads),
            "mv_patch" => set!(t.mv_patch),
            "res_patch" => set!(t.res_patch),
            "ifr_patch" => set!(t.ifr_patch),
            "seed" => set!(t.seed),
            "data.clips" => set!(d.clips),
            "data.frames" => set!(d.frames),
            "data.anchors" => set!(d.anchors),
            "data.size" => set!(d.size),
            "data.block_size" => set!(d.search.block_size),
            "data.search_range" => set!(d.search.search_range),
            "data.subpel_scale" => set!(d.search.subpel_scale),
            "data.feature_patch" => set!(d.feature_patch),
            "data.ifr_downscale" => set!(d.ifr_downscale),
            "data.noise" => set!(d.noise),
            "data.seed" => set!(d.seed),
            _ => {
                return Err(Error::Config {
                    line,
                    reason: format!("unknown key {key}"),
                })
            }
        }
    }
    Ok((t, d))
}

pub const HISTORY_HEADER: &str = "step,loss,mean_cosine,tau";

pub fn history_csv(h: &TrainHistory) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for (i, s) in h.steps.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{},{}", s.loss, s.mean_cosine, s.tau);
    }
    out
}

pub fn parse_history_csv(text: &str) -> Result<TrainHistory> {
    let mut lines = text.lines();
    if lines.next() != Some(HISTORY_HEADER) {
        return Err(Error::Config {
            line: 1,
            reason: format!("expected header '{HISTORY_HEADER}'"),
        });
    }
    let mut steps = Vec::new();
    for (i, l) in lines.enumerate() {
        let line = i + 2;
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 4 || f[0].parse::<usize>().ok() != Some(i) {
            return Err(Error::Config {
                line,
                reason: "expected step,loss,mean_cosine,tau with consecutive steps".into(),
            });
        }
        steps.push(TrainStep {
            loss: parse_value(line, "loss", f[1])?,
            mean_cosine: parse_value(line, "mean_cosine", f[2])?,
            tau: parse_value(line, "tau", f[3])?,
        });
    }
    Ok(TrainHistory { steps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub initial_mean_cosine: f64,
    pub final_mean_cosine: f64,
    pub final_tau: f64,
}

impl TrainSummary {
    pub fn from_history(h: &TrainHistory) -> Result<Self> {
        match (h.steps.first(), h.steps.last()) {
            (Some(a), Some(b)) => Ok(Self {
                steps: h.len(),
                initial_loss: a.loss,
                final_loss: b.loss,
                initial_mean_cosine: a.mean_cosine,
                final_mean_cosine: b.mean_cosine,
                final_tau: b.tau,
            }),
            _ => Err(Error::Input("training history is empty".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignOutcome {
    pub schema_version: u32,
    pub loss: LossKind,
    pub seed: u64,
    pub samples: usize,
    pub summary: TrainSummary,
    /// Mean cosine over the whole set after training.
    pub eval_mean_cosine: f64,
    /// Mean pairwise angle between class centroid directions, radians.
    pub separation: f64,
    pub gates: Vec<GateRow>,
}

/// Build the dataset, train, and evaluate.
pub fn run_align(train: &TrainConfig, data: &DatasetConfig) -> Result<(TrainRun, AlignOutcome)> {
    let set = MotionDataset::synthetic(data)?;
    let run = train_stage1(train, &set)?;
    let labels: Vec<_> = set.samples.iter().map(|s| s.class).collect();
    let separation = between_class_separation(&embed(&run.model, &set)?, &labels)?;
    let gates = gate_report(&fused_with_labels(&run.model, &set)?)?;
    let outcome = AlignOutcome {
        schema_version: crate::pipeline::SCHEMA_VERSION,
        loss: train.loss,
        seed: train.seed,
        samples: set.len(),
        summary: TrainSummary::from_history(&run.history)?,
        eval_mean_cosine: mean_cosine(&run.model, &set)?,
        separation,
        gates,
    };
    Ok((run, outcome))
}

pub const GATE_CSV_HEADER: &str = "label,w_mv,w_res,w_ifr,n";

pub fn gates_csv(rows: &[GateRow]) -> String {
    let mut out = String::from(GATE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.label, r.w_mv, r.w_res, r.w_ifr, r.n);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_keys() {
        let text = "# demo\nsteps = 20\nloss=mse # trailing\n\ndata.clips = 8\ndata.subpel_scale=2\nbranch_heads = true\n";
        let (t, d) = parse_train_config(text).unwrap();
        assert_eq!((t.steps, t.loss, t.branch_heads), (20, LossKind::Mse, true));
        assert_eq!((d.clips, d.search.subpel_scale), (8, 2));
        assert_eq!(t.lr, TrainConfig::default().lr);
    }

    #[test]
    fn config_errors_name_lines() {
        for (text, line) in [
            ("steps = 1\nbogus = 2\n", 2),
            ("steps = x\n", 1),
            ("\n\nsteps\n", 3),
            ("seed = 1\nseed = 2\n", 2),
            ("loss = l2\n", 1),
        ] {
            match parse_train_config(text) {
                Err(Error::Config { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn history_round_trip() {
        let h = TrainHistory {
            steps: vec![
                TrainStep {
                    loss: 1.25,
                    mean_cosine: 0.1,
                    tau: 0.07,
                },
                TrainStep {
                    loss: 0.3333333333333333,
                    mean_cosine: -0.5,
                    tau: 1e-3,
                },
            ],
        };
        let text = history_csv(&h);
        assert!(text.starts_with("step,loss,mean_cosine,tau\n0,1.25,0.1,0.07\n"));
        assert_eq!(parse_history_csv(&text).unwrap(), h);
        assert!(parse_history_csv("step,loss\n").is_err());
        assert!(parse_history_csv(&text.replace("\n1,", "\n5,")).is_err());
    }
}
