//! The `tsom` command-line driver.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::circuit::{self, TrialReport};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::eval::{self, RocCurve, SweepParam, TuneOptions};
use crate::io;
use crate::manifest::RunManifest;
use crate::pipeline::Detector;
use crate::raster::{Raster, Sequence};
use crate::rt::Detection;
use crate::synth::{self, AerialParams, GroundTruth, SceneParams, SynthConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_PROPERTY: i32 = 4;

pub const DEFAULT_SEED: u64 = 1;

/// False-alarm rates reported by `eval`.
pub const REPORT_FA: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Parser)]
#[command(name = "tsom", version, about = "Small moving object detection in image sequences")]
pub struct Cli {
    #[command(flatten)]
    pub shared: Shared,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Shared {
    /// JSON configuration file; missing fields take defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "tsom-out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect small moving objects in a frame directory or animated PNG.
    Detect(DetectArgs),
    /// Render synthetic overhead scenes with ground truth.
    Synth(SynthArgs),
    /// Score detections against ground truth, or compare against the
    /// frame-difference baseline on a sequence.
    Eval(EvalArgs),
    /// Tuning curve over one scene parameter.
    Tune(TuneArgs),
    /// Monte Carlo check that two-stage accumulation never beats one stage.
    CircuitVerify(CircuitArgs),
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Frame directory or (animated) PNG.
    pub input: PathBuf,
    #[arg(long, default_value_t = io::DEFAULT_FPS)]
    pub fps: f64,
    /// Detections kept per frame (overrides the config).
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Minimum detection score (overrides the config).
    #[arg(long)]
    pub floor: Option<f64>,
    /// Write retina/dendrite/soma/rt maps for these frames.
    #[arg(long = "trace", value_delimiter = ',')]
    pub trace: Vec<usize>,
    /// Write every frame with detections circled.
    #[arg(long)]
    pub overlay: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Render the five-sweep comparison suite instead of one scene.
    #[arg(long)]
    pub suite: bool,
    #[arg(long)]
    pub frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Detections CSV (`frame,x,y,score`).
    #[arg(long, conflicts_with_all = ["sequence", "suite"])]
    pub detections: Option<PathBuf>,
    /// Generate this many comparison scenes and pool them.
    #[arg(long, conflicts_with = "sequence")]
    pub suite: Option<usize>,
    /// Frame directory: run the detector and the frame-difference baseline.
    #[arg(long)]
    pub sequence: Option<PathBuf>,
    /// Ground-truth CSV (`frame,x,y`); defaults to `ground_truth.csv` next
    /// to the sequence.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Evaluated frames as `start:end` (end exclusive).
    #[arg(long)]
    pub frames: Option<String>,
    #[arg(long, default_value_t = io::DEFAULT_FPS)]
    pub fps: f64,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// radius, v_a, luminance, v_b or theta_bg.
    pub param: String,
    /// Comma-separated sweep values (default: the parameter's standard sweep).
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<f64>,
    /// Base scene JSON.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Also measure top-1 localization precision over full-length scenes.
    #[arg(long)]
    pub precision: bool,
    #[arg(long, default_value_t = TuneOptions::default().response_frames)]
    pub response_frames: usize,
}

#[derive(Debug, Args)]
pub struct CircuitArgs {
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub min_subsets: Option<usize>,
    #[arg(long)]
    pub max_subsets: Option<usize>,
}

/// Background of a synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackgroundSpec {
    /// Procedural aerial texture; the seed defaults to `--seed`.
    Aerial {
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        params: AerialParams,
    },
    Image { path: PathBuf },
    Flat { value: f64 },
}

impl Default for BackgroundSpec {
    fn default() -> Self {
        BackgroundSpec::Aerial { seed: None, params: AerialParams::default() }
    }
}

impl BackgroundSpec {
    pub fn render(&self, size: usize, seed: u64) -> Result<Raster> {
        match self {
            BackgroundSpec::Aerial { seed: s, params } => {
                Ok(synth::aerial_background(size, size, s.unwrap_or(seed), params))
            }
            BackgroundSpec::Image { path } => io::load_image(path),
            BackgroundSpec::Flat { value } => Ok(Raster::filled(size, size, *value)),
        }
    }

    fn resolved(&self, seed: u64) -> BackgroundSpec {
        match self {
            BackgroundSpec::Aerial { seed: s, params } => {
                BackgroundSpec::Aerial { seed: Some(s.unwrap_or(seed)), params: params.clone() }
            }
            other => other.clone(),
        }
    }
}

/// Configuration file of `synth` and `tune`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub scene: SceneParams,
    pub background: BackgroundSpec,
}

/// Configuration file of `circuit-verify`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircuitSpec {
    pub trials: u64,
    pub min_subsets: usize,
    pub max_subsets: usize,
}

impl Default for CircuitSpec {
    fn default() -> Self {
        CircuitSpec { trials: 100_000, min_subsets: 1, max_subsets: 20 }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::PropertyViolation(_) => EXIT_PROPERTY,
        e if e.is_io() => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let threads = match cli.shared.threads {
        Some(0) => return Err(Error::invalid("--threads must be at least 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let ctx = Context { shared: cli.shared.clone(), threads, started: Instant::now() };
    pool.install(|| match &cli.command {
        Command::Detect(a) => cmd_detect(&ctx, a),
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Tune(a) => cmd_tune(&ctx, a),
        Command::CircuitVerify(a) => cmd_circuit_verify(&ctx, a),
    })
}

struct Context {
    shared: Shared,
    threads: usize,
    started: Instant,
}

impl Context {
    fn seed(&self, default: u64) -> u64 {
        self.shared.seed.unwrap_or(default)
    }

    fn out(&self) -> &Path {
        &self.shared.out
    }

    fn create_out(&self) -> Result<()> {
        fs::create_dir_all(self.out()).map_err(|e| Error::io(self.out(), e))
    }

    fn read_config<T: for<'de> Deserialize<'de> + Default>(&self) -> Result<T> {
        match &self.shared.config {
            None => Ok(T::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", p.display())))
            }
        }
    }

    fn manifest(&self, command: &str, config: serde_json::Value, seed: u64) -> RunManifest {
        let mut m = RunManifest::new(command, config, self.out(), seed, self.threads);
        m.inputs.extend(self.shared.config.iter().cloned());
        m
    }

    fn finish(&self, mut m: RunManifest) -> Result<()> {
        m.finish(self.started.elapsed())?;
        Ok(())
    }
}

fn pipeline_config(ctx: &Context) -> Result<PipelineConfig> {
    let cfg: PipelineConfig = ctx.read_config()?;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_detect(ctx: &Context, a: &DetectArgs) -> Result<()> {
    let mut cfg = pipeline_config(ctx)?;
    if let Some(k) = a.top_k {
        cfg.top_k = k;
    }
    if let Some(f) = a.floor {
        cfg.score_floor = f;
    }
    cfg.validate()?;
    let seq = io::load_sequence(&a.input, a.fps)?;
    let det = Detector::for_sequence(&cfg, &seq)?;
    if let Some(&t) = a.trace.iter().find(|&&t| !det.output_times(seq.len()).contains(&t)) {
        return Err(Error::invalid(format!("cannot trace frame {t}: outputs exist for frames {:?}", det.output_times(seq.len()))));
    }
    let detections = det.detect(&seq)?;

    ctx.create_out()?;
    io::write_detections(&detections, &ctx.out().join("detections.csv"))?;
    for &t in &a.trace {
        let maps = det.trace_frame(&seq, t)?.layer_maps();
        let dir = ctx.out().join("layers");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (name, map) in [("retina", &maps.retina), ("dendrite", &maps.dendrite), ("soma", &maps.soma), ("rt", &maps.rt)] {
            io::save_map(map, &dir.join(format!("frame_{t:04}_{name}.png")))?;
        }
    }
    if a.overlay {
        let dir = ctx.out().join("overlay");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (t, frame) in seq.frames().iter().enumerate() {
            let here: Vec<Detection> = detections.iter().filter(|d| d.t == t).copied().collect();
            io::save_frame(&io::overlay_detections(frame, &here), &dir.join(format!("frame_{t:04}.png")))?;
        }
    }
    println!("{} detections in {} frames", detections.len(), seq.len());

    let config = json!({
        "pipeline": cfg,
        "input": a.input,
        "fps": a.fps,
        "trace": a.trace,
        "overlay": a.overlay,
    });
    let mut m = ctx.manifest("detect", config, ctx.seed(DEFAULT_SEED));
    m.inputs.push(a.input.clone());
    ctx.finish(m)
}

fn write_scene(dir: &Path, seq: &Sequence, gt: &GroundTruth, spec: &SceneSpec) -> Result<()> {
    io::save_sequence(seq, &dir.join("frames"))?;
    io::write_ground_truth(gt, &dir.join("ground_truth.csv"))?;
    io::write_text(&dir.join("scene.json"), &(serde_json::to_string_pretty(spec).expect("scene serializes") + "\n"))
}

fn cmd_synth(ctx: &Context, a: &SynthArgs) -> Result<()> {
    let mut spec: SceneSpec = ctx.read_config()?;
    if let Some(n) = a.frames {
        spec.scene.n_frames = n;
    }
    spec.scene.validate()?;
    let seed = ctx.seed(DEFAULT_SEED);
    spec.background = spec.background.resolved(seed);

    let scenes: Vec<(SynthConfig, Option<String>)> = if a.suite {
        let bg = Arc::new(spec.background.render(synth::bevs_background_size(), seed)?);
        synth::bevs_suite(bg, seed)
            .into_iter()
            .map(|(mut c, label)| {
                c.scene.n_frames = spec.scene.n_frames;
                (c, Some(label))
            })
            .collect()
    } else {
        let bg = Arc::new(spec.background.render(spec.scene.required_background(), seed)?);
        vec![(SynthConfig { background: bg, scene: spec.scene.clone() }, None)]
    };
    let rendered = scenes
        .iter()
        .map(|(c, label)| synth::generate(c).map(|(s, g)| (s, g, c.scene.clone(), label.clone())))
        .collect::<Result<Vec<_>>>()?;

    ctx.create_out()?;
    for (seq, gt, scene, label) in &rendered {
        let dir = label.as_ref().map_or_else(|| ctx.out().to_path_buf(), |l| ctx.out().join(l));
        write_scene(&dir, seq, gt, &SceneSpec { scene: scene.clone(), background: spec.background.clone() })?;
    }
    println!("{} scene(s) written to {}", rendered.len(), ctx.out().display());

    let config = json!({ "spec": spec, "suite": a.suite });
    ctx.finish(ctx.manifest("synth", config, seed))
}

fn parse_frames(s: &str) -> Result<std::ops::Range<usize>> {
    let bad = || Error::invalid(format!("--frames expects start:end, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a >= b {
        return Err(bad());
    }
    Ok(a..b)
}

fn roc_rows(curve: &RocCurve) -> Vec<Vec<String>> {
    curve
        .thresholds
        .iter()
        .zip(&curve.points)
        .map(|(t, (fa, dr))| vec![fa.to_string(), dr.to_string(), t.to_string()])
        .collect()
}

fn write_roc(path: &Path, curve: &RocCurve) -> Result<()> {
    io::write_table(path, &["fa", "dr", "threshold"], &roc_rows(curve))
}

fn rates(curve: &RocCurve) -> serde_json::Value {
    REPORT_FA.iter().map(|&fa| json!({ "fa": fa, "dr": curve.detection_rate_at(fa) })).collect()
}

fn write_comparison(ctx: &Context, scene: &eval::ScoredScene) -> Result<()> {
    let (tsom, baseline) = scene.curves()?;
    ctx.create_out()?;
    write_roc(&ctx.out().join("roc_tsom.csv"), &tsom)?;
    write_roc(&ctx.out().join("roc_frame_difference.csv"), &baseline)?;
    let summary = json!({
        "frames": [scene.frames.start, scene.frames.end],
        "tsom": rates(&tsom),
        "frame_difference": rates(&baseline),
    });
    io::write_text(&ctx.out().join("summary.json"), &(serde_json::to_string_pretty(&summary).expect("json") + "\n"))?;
    for &fa in &REPORT_FA {
        println!(
            "F_A<={fa}: D_R tsom={} frame_difference={}",
            tsom.detection_rate_at(fa),
            baseline.detection_rate_at(fa)
        );
    }
    Ok(())
}

fn cmd_eval(ctx: &Context, a: &EvalArgs) -> Result<()> {
    let cfg = pipeline_config(ctx)?;
    match (&a.detections, &a.sequence) {
        (Some(dets), None) => {
            let gt_path = a.gt.clone().ok_or_else(|| Error::invalid("--gt is required with --detections"))?;
            let detections = io::read_detections(dets)?;
            let probe = io::read_ground_truth(&gt_path, usize::MAX)?;
            let last = probe
                .objects
                .keys()
                .copied()
                .chain(detections.iter().map(|d| d.t))
                .max()
                .map_or(0, |t| t + 1);
            let gt = io::read_ground_truth(&gt_path, last)?;
            let frames = match &a.frames {
                Some(s) => parse_frames(s)?,
                None => 0..last,
            };
            if frames.end > last {
                return Err(Error::FrameOutOfRange { frame: frames.end - 1 });
            }
            let result = eval::match_detections_in(&detections, &gt, frames.clone(), eval::MATCH_THRESHOLD)?;
            let (dr, fa) = eval::metrics(&result)?;
            let curve = eval::roc_sweep(&detections, &gt, frames.clone(), usize::MAX)?;

            ctx.create_out()?;
            write_roc(&ctx.out().join("roc.csv"), &curve)?;
            let summary = json!({
                "d_r": dr,
                "f_a": fa,
                "true_positives": result.true_positives,
                "false_positives": result.false_positives,
                "actual_objects": result.actual_objects,
                "n_frames": result.n_frames,
            });
            io::write_text(&ctx.out().join("metrics.json"), &(serde_json::to_string_pretty(&summary).expect("json") + "\n"))?;
            println!("D_R={dr} F_A={fa}");
            let config = json!({ "frames": [frames.start, frames.end], "match_threshold": eval::MATCH_THRESHOLD });
            let mut m = ctx.manifest("eval", config, ctx.seed(DEFAULT_SEED));
            m.inputs.extend([dets.clone(), gt_path]);
            ctx.finish(m)
        }
        (None, Some(seq_path)) => {
            let gt_path = a.gt.clone().unwrap_or_else(|| {
                let dir = if seq_path.file_name().is_some_and(|n| n == "frames") {
                    seq_path.parent().map(Path::to_path_buf).unwrap_or_default()
                } else {
                    seq_path.clone()
                };
                dir.join("ground_truth.csv")
            });
            let seq = io::load_sequence(seq_path, a.fps)?;
            let gt = io::read_ground_truth(&gt_path, seq.len())?;
            let scene = eval::score_scene(&seq, &gt, &cfg, a.frames.as_deref().map(parse_frames).transpose()?)?;
            write_comparison(ctx, &scene)?;
            let config = json!({ "pipeline": cfg, "fps": a.fps, "candidates": eval::ROC_CANDIDATES });
            let mut m = ctx.manifest("eval", config, ctx.seed(DEFAULT_SEED));
            m.inputs.extend([seq_path.clone(), gt_path]);
            ctx.finish(m)
        }
        (None, None) if a.suite.is_some() => {
            let n = a.suite.unwrap_or_default();
            if n == 0 {
                return Err(Error::invalid("--suite needs at least one scene"));
            }
            let seed = ctx.seed(DEFAULT_SEED);
            let scenes = synth::comparison_scenes(n, seed, &AerialParams::default())
                .iter()
                .map(|c| {
                    let (seq, gt) = synth::generate(c)?;
                    eval::score_scene(&seq, &gt, &cfg, None)
                })
                .collect::<Result<Vec<_>>>()?;
            write_comparison(ctx, &eval::pool_scenes(&scenes)?)?;
            let config = json!({ "pipeline": cfg, "suite": n, "candidates": eval::ROC_CANDIDATES });
            ctx.finish(ctx.manifest("eval", config, seed))
        }
        _ => Err(Error::invalid("eval needs one of --detections, --sequence or --suite")),
    }
}

fn cmd_tune(ctx: &Context, a: &TuneArgs) -> Result<()> {
    let cfg = pipeline_config(ctx)?;
    let param = SweepParam::parse(&a.param)
        .ok_or_else(|| Error::invalid(format!("unknown sweep {:?}; expected radius, v_a, luminance, v_b or theta_bg", a.param)))?;
    let values = if a.values.is_empty() { param.default_values() } else { a.values.clone() };
    let mut spec = match &a.scene {
        None => SceneSpec::default(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", p.display())))?
        }
    };
    spec.scene.validate()?;
    let seed = ctx.seed(DEFAULT_SEED);
    spec.background = spec.background.resolved(seed);
    let size = values
        .iter()
        .map(|&v| param.apply(&spec.scene, v).required_background())
        .max()
        .unwrap_or_else(|| spec.scene.required_background());
    let base = SynthConfig { background: Arc::new(spec.background.render(size, seed)?), scene: spec.scene.clone() };
    let options = TuneOptions { response_frames: a.response_frames, precision: a.precision };
    let curve = eval::tuning_sweep(param, &values, &base, &cfg, options)?;

    ctx.create_out()?;
    let rows: Vec<Vec<String>> = curve
        .points
        .iter()
        .map(|p| {
            let mut row = vec![param.name().to_string(), p.value.to_string(), p.response.to_string()];
            if let Some(prec) = p.precision {
                row.push(prec.to_string());
            }
            row
        })
        .collect();
    let header: &[&str] = if a.precision { &["param", "value", "response", "precision"] } else { &["param", "value", "response"] };
    io::write_table(&ctx.out().join(format!("tune_{}.csv", param.name())), header, &rows)?;
    if let Some(peak) = curve.peak() {
        println!("{} peak at {} (response {})", param.name(), peak.value, peak.response);
    }
    let config = json!({
        "pipeline": cfg,
        "param": param.name(),
        "values": values,
        "spec": spec,
        "response_frames": a.response_frames,
        "precision": a.precision,
    });
    let mut m = ctx.manifest("tune", config, seed);
    m.inputs.extend(a.scene.iter().cloned());
    ctx.finish(m)
}

fn cmd_circuit_verify(ctx: &Context, a: &CircuitArgs) -> Result<()> {
    let mut spec: CircuitSpec = ctx.read_config()?;
    spec.trials = a.trials.unwrap_or(spec.trials);
    spec.min_subsets = a.min_subsets.unwrap_or(spec.min_subsets);
    spec.max_subsets = a.max_subsets.unwrap_or(spec.max_subsets);
    let seed = ctx.seed(circuit::DEFAULT_SEED);
    let report: TrialReport = circuit::verify_proposition(spec.trials, spec.min_subsets..=spec.max_subsets, seed)?;

    ctx.create_out()?;
    io::write_text(&ctx.out().join("circuit_report.json"), &(report.to_json() + "\n"))?;
    println!(
        "{} random + {} grid instances, {} violations, max E1-E2 = {:e}",
        report.trials, report.grid_instances, report.violations, report.max_e1_minus_e2
    );
    ctx.finish(ctx.manifest("circuit-verify", json!({ "spec": spec }), seed))?;
    if report.passed() {
        Ok(())
    } else {
        Err(Error::PropertyViolation(format!(
            "{} instance(s) with E1 > E2 + {}",
            report.violations,
            circuit::TOLERANCE
        )))
    }
}
