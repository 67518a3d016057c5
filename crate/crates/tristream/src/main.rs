use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tristream::core::codec::{estimate_motion, field_to_sidecar, route_backend, MotionSearch, MvAggregation, SidecarRecord};
use tristream::core::frames::{gen_synthetic, FrameSequence, SceneObject, SceneSpec, Shape};
use tristream::core::hierarchy::{AnchorRule, IntervalConvention};
use tristream::core::inject::{build_layout, scatter_inject, EmbeddingSeq, PlacementStrategy, RowSource, Span};
use tristream::core::stats::{accuracy, wilson_interval, BinomialResult};
use tristream::pipeline::{bench_backend, extract_parallel, summarize, thread_pool, PipelineConfig};
use tristream::report::{budget_report, build_report, Artifacts};
use tristream::train::{gates_csv, history_csv, parse_train_config, run_align};
use tristream::visualize::{render_mv, render_residual};
use tristream::{io, sidecar, trs, Error, Result};

const SEED_ENV: &str = "TRISTREAM_SEED";

#[derive(Parser)]
#[command(name = "tristream", version, about = "Compressed-domain tri-stream video pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic translation clip to a raw file.
    Synth(SynthArgs),
    /// Extract tri-stream intervals into a .trs file.
    Extract(ExtractArgs),
    /// Render one stream of one interval as PGM/PPM.
    Visualize(VisualizeArgs),
    /// Token-budget arithmetic.
    Budget(BudgetArgs),
    /// Stage-1 alignment training on the synthetic motion set.
    Align(AlignArgs),
    /// Placeholder layout and scatter injection walkthrough.
    InjectDemo(InjectArgs),
    /// Single-threaded extraction latency.
    Bench(BenchArgs),
    /// Evaluation statistics.
    Stats(StatsArgs),
    /// Merge run artifacts into one JSON document.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 32)]
    frames: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 1)]
    channels: usize,
    /// Object velocity `vx,vy` in pixels per frame.
    #[arg(long, default_value = "1,0", allow_hyphen_values = true)]
    velocity: String,
    /// Square object side in pixels.
    #[arg(long, default_value_t = 24)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    noise: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write block-matching vectors as sidecar CSV.
    #[arg(long)]
    sidecar_out: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    /// Raw frames: 8-bit, channel-interleaved, concatenated.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    #[arg(long, default_value_t = 1)]
    channels: usize,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    /// Codec tag used for backend routing.
    #[arg(long, default_value = "unknown")]
    codec: String,
    /// Exported motion-vector CSV; enables the sidecar backend.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Pretend the native fixed-GOP reader is missing.
    #[arg(long)]
    no_native: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MvAggArg {
    Mean,
    Last,
    MaxMag,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnchorRuleArg {
    Center,
    Endpoint,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Bracket,
    Between,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, default_value_t = 8)]
    anchors: usize,
    #[arg(long, default_value_t = 16)]
    block_size: usize,
    #[arg(long, default_value_t = 8)]
    search_range: usize,
    /// 1, 2 or 4; defaults to the backend's profile.
    #[arg(long)]
    subpel_scale: Option<u32>,
    #[arg(long, value_enum, default_value_t = MvAggArg::Mean)]
    mv_agg: MvAggArg,
    #[arg(long, value_enum, default_value_t = AnchorRuleArg::Center)]
    anchor_rule: AnchorRuleArg,
    #[arg(long, value_enum, default_value_t = ConventionArg::Bracket)]
    convention: ConventionArg,
    #[arg(long, default_value_t = 2)]
    ifr_downscale: usize,
}

impl PipelineArgs {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            anchors: self.anchors,
            block_size: self.block_size,
            search_range: self.search_range,
            subpel_scale: self.subpel_scale,
            mv_agg: match self.mv_agg {
                MvAggArg::Mean => MvAggregation::Mean,
                MvAggArg::Last => MvAggregation::Last,
                MvAggArg::MaxMag => MvAggregation::MaxMag,
            },
            anchor_rule: match self.anchor_rule {
                AnchorRuleArg::Center => AnchorRule::Center,
                AnchorRuleArg::Endpoint => AnchorRule::Endpoint,
            },
            convention: match self.convention {
                ConventionArg::Bracket => IntervalConvention::Bracket,
                ConventionArg::Between => IntervalConvention::Between,
            },
            ifr_downscale: self.ifr_downscale,
            ..PipelineConfig::default()
        }
    }
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    out: PathBuf,
    /// Summary JSON path; printed to stdout when omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StreamArg {
    Ifr,
    Mv,
    Res,
}

#[derive(Args)]
struct VisualizeArgs {
    #[arg(long)]
    trs: PathBuf,
    /// Zero-based interval index.
    #[arg(long)]
    interval: usize,
    #[arg(long, value_enum)]
    stream: StreamArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BudgetArgs {
    #[arg(long, default_value_t = 8)]
    anchors: u64,
    #[arg(long, default_value_t = 1396)]
    tokens_per_frame: u64,
    #[arg(long, default_value_t = 8)]
    intervals: u64,
    #[arg(long, default_value_t = 64)]
    motion_tokens: u64,
    #[arg(long, default_value_t = 0)]
    text_overhead: u64,
    /// Frame count of the dense baseline.
    #[arg(long, default_value_t = 32)]
    dense_frames: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Infonce,
    Mse,
    Hybrid,
}

#[derive(Args)]
struct AlignArgs {
    /// Flat key=value trainer config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// History CSV (step,loss,mean_cosine,tau).
    #[arg(long)]
    history: Option<PathBuf>,
    /// Gate report; CSV when the name ends in .csv, JSON otherwise.
    #[arg(long)]
    gates: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Prefix,
    PerAnchor,
    Suffix,
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long, value_enum, default_value_t = StrategyArg::PerAnchor)]
    strategy: StrategyArg,
    /// Anchor token spans as `start:len` pairs.
    #[arg(long, default_value = "0:3,7:3")]
    spans: String,
    #[arg(long, default_value_t = 14)]
    seq_len: usize,
    /// Motion tokens per interval.
    #[arg(long, default_value_t = 2)]
    k_m: usize,
    /// Interval count; defaults to the number of spans.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(subcommand)]
    command: StatsCommand,
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Accuracy with a Wilson score interval, in percent.
    Wilson {
        correct: u64,
        total: u64,
        #[arg(long, default_value_t = 0.95)]
        conf: f64,
    },
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    budget: Option<PathBuf>,
    #[arg(long)]
    gates: Option<PathBuf>,
    #[arg(long)]
    latency: Option<PathBuf>,
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long)]
    trs: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Input(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Pretty JSON to `path`, or stdout.
fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    text.push('\n');
    match path {
        Some(p) => write_text(p, &text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Internal(e.to_string())),
    }
}

fn parse_pair<T: std::str::FromStr>(s: &str, sep: char, what: &str) -> Result<(T, T)> {
    s.split_once(sep)
        .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
        .ok_or_else(|| Error::Input(format!("bad {what} '{s}'")))
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let velocity: (f64, f64) = parse_pair(&a.velocity, ',', "velocity")?;
    let seed = env_seed()?.unwrap_or(a.seed);
    let (w, h, t) = (a.width as f64, a.height as f64, a.frames as f64);
    // Start so the object stays centred over the clip.
    let origin = (
        ((w - a.size as f64) / 2.0 - velocity.0 * (t - 1.0) / 2.0).round() as i64,
        ((h - a.size as f64) / 2.0 - velocity.1 * (t - 1.0) / 2.0).round() as i64,
    );
    let spec = SceneSpec {
        objects: vec![SceneObject {
            shape: Shape::Rect,
            size: (a.size, a.size),
            origin,
            velocity,
            intensity: 200,
            texture: 40,
        }],
        background: 60,
        noise_amplitude: a.noise,
        channels: a.channels,
        seed,
    };
    let seq = gen_synthetic(&spec, a.frames, a.width, a.height)?;
    io::save_raw(&seq, &a.out)?;
    if let Some(path) = a.sidecar_out {
        let search = MotionSearch::default();
        let mut records: Vec<SidecarRecord> = Vec::new();
        for f in 2..=seq.len() {
            let field = estimate_motion(seq.frame(f - 1), seq.frame(f), search)?;
            records.extend(field_to_sidecar(&field, f as u32)?);
        }
        write_text(&path, &sidecar::write_sidecar(&records))?;
    }
    Ok(())
}

fn load_input(a: &InputArgs) -> Result<(FrameSequence, Option<Vec<SidecarRecord>>)> {
    let seq = io::load_raw(&a.input, a.width, a.height, a.channels, a.fps)?;
    let records = match &a.sidecar {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Some(sidecar::parse_sidecar(&text)?)
        }
        None => None,
    };
    Ok((seq, records))
}

fn cmd_extract(a: ExtractArgs) -> Result<()> {
    let (seq, records) = load_input(&a.input)?;
    let config = a.pipeline.config();
    let backend = route_backend(&a.input.codec, !a.input.no_native, records.is_some());
    let decomp = config.decomposition(seq.len())?;
    let params = config.params(backend.kind, records.as_deref());
    let pool = thread_pool(a.threads)?;
    let intervals = extract_parallel(&pool, &seq, &decomp, &backend, &params)?;
    trs::write_trs(&a.out, &intervals)?;
    let summary = summarize(&decomp, &backend, &intervals, pool.current_num_threads());
    emit_json(&summary, a.summary.as_deref())
}

fn cmd_visualize(a: VisualizeArgs) -> Result<()> {
    let (_, intervals) = trs::read_trs(&a.trs)?;
    let iv = intervals.get(a.interval).ok_or_else(|| {
        Error::Input(format!(
            "interval {} out of range, file has {}",
            a.interval,
            intervals.len()
        ))
    })?;
    let image = match a.stream {
        StreamArg::Ifr => iv.ifr.clone(),
        StreamArg::Mv => render_mv(&iv.mv)?,
        StreamArg::Res => render_residual(&iv.residual)?,
    };
    io::save_pnm(&image, &a.out)
}

fn cmd_budget(a: BudgetArgs) -> Result<()> {
    let b = budget_report(
        a.anchors,
        a.tokens_per_frame,
        a.intervals,
        a.motion_tokens,
        a.text_overhead,
        a.dense_frames,
    );
    emit_json(&b, a.out.as_deref())
}

fn cmd_align(a: AlignArgs) -> Result<()> {
    let (mut train, data) = match &a.config {
        Some(p) => parse_train_config(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => parse_train_config("")?,
    };
    if let Some(s) = a.steps {
        train.steps = s;
    }
    if let Some(l) = a.loss {
        train.loss = match l {
            LossArg::Infonce => tristream::core::alignment::LossKind::InfoNce,
            LossArg::Mse => tristream::core::alignment::LossKind::Mse,
            LossArg::Hybrid => tristream::core::alignment::LossKind::Hybrid,
        };
    }
    if let Some(s) = a.seed {
        train.seed = s;
    }
    if let Some(s) = env_seed()? {
        train.seed = s;
    }
    let (run, outcome) = run_align(&train, &data)?;
    if let Some(p) = &a.history {
        write_text(p, &history_csv(&run.history))?;
    }
    if let Some(p) = &a.gates {
        if p.extension().is_some_and(|e| e == "csv") {
            write_text(p, &gates_csv(&outcome.gates))?;
        } else {
            emit_json(&outcome.gates, Some(p))?;
        }
    }
    emit_json(&outcome, a.out.as_deref())
}

fn cmd_inject(a: InjectArgs) -> Result<()> {
    let spans = a
        .spans
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_pair::<usize>(s, ':', "span").map(|(start, len)| Span { start, len }))
        .collect::<Result<Vec<_>>>()?;
    let strategy = match a.strategy {
        StrategyArg::Prefix => PlacementStrategy::Prefix,
        StrategyArg::PerAnchor => PlacementStrategy::PerAnchor,
        StrategyArg::Suffix => PlacementStrategy::Suffix,
    };
    let k = a.k.unwrap_or(spans.len());
    let layout = build_layout(strategy, &spans, k, a.k_m, a.seq_len)?;
    let d = a.dim;
    let host: Vec<f64> = (0..a.seq_len * d).map(|i| (i / d) as f64).collect();
    let seq = EmbeddingSeq::with_placeholders(a.seq_len, d, host, &layout)?;
    let m: Vec<f64> = (0..layout.len() * d).map(|i| -1.0 - (i / d) as f64).collect();
    let out = scatter_inject(&seq, &layout, &m)?;
    let mut text = format!(
        "strategy {}  positions {:?}\nrow\tsource\tindex\tvalue\n",
        strategy.as_str(),
        layout.positions()
    );
    for (row, src) in out.provenance.iter().enumerate() {
        let (tag, idx) = match src {
            RowSource::Host(i) => ("E", i),
            RowSource::Motion(j) => ("M", j),
        };
        text.push_str(&format!("{row}\t{tag}\t{idx}\t{:?}\n", out.seq.row(row)));
    }
    std::io::stdout()
        .write_all(text.as_bytes())
        .map_err(|e| Error::Internal(e.to_string()))
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let (seq, records) = load_input(&a.input)?;
    let config = a.pipeline.config();
    let backend = route_backend(&a.input.codec, !a.input.no_native, records.is_some());
    let decomp = config.decomposition(seq.len())?;
    let params = config.params(backend.kind, records.as_deref());
    let report = bench_backend(&seq, &decomp, &backend, &params, a.repeats)?;
    emit_json(&report, a.out.as_deref())
}

#[derive(Serialize)]
struct WilsonOut {
    acc: f64,
    lo: f64,
    hi: f64,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    match a.command {
        StatsCommand::Wilson { correct, total, conf } => {
            let r = BinomialResult::new(correct, total, conf)?;
            let (lo, hi) = wilson_interval(&r)?;
            emit_json(
                &WilsonOut {
                    acc: accuracy(correct, total)?,
                    lo: round2(lo * 100.0),
                    hi: round2(hi * 100.0),
                },
                None,
            )
        }
    }
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let report = build_report(&Artifacts {
        budget: a.budget,
        gates: a.gates,
        latency: a.latency,
        history: a.history,
        trs: a.trs,
    })?;
    emit_json(&report, a.out.as_deref())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Visualize(a) => cmd_visualize(a),
        Command::Budget(a) => cmd_budget(a),
        Command::Align(a) => cmd_align(a),
        Command::InjectDemo(a) => cmd_inject(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(tristream::error::EXIT_INPUT as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
