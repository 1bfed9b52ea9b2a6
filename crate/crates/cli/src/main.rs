//! Command-line front end: track, train, eval, explain, synth, render.
//!
//! Exit codes: 0 success, 2 input parse, 3 config, 4 divergence,
//! 5 correspondence failure. All randomness flows from the single run seed.

use clap::{Args, Parser, Subcommand};
use graphtrack_core::{
    config::RunConfig,
    detect::FrameDetections,
    error::Error,
    eval, explain,
    explain::{MaskMode, ScoreFn},
    gnn,
    gnn::GnnParams,
    graph::{AdjacencyMode, EdgeGate},
    io,
    io::{Format, TrackedFrame},
    render, synth,
    tracker::{self, TrackerState},
    Rng,
};
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "graphtrack",
    version,
    about = "Graph-based multi-object tracking engine with attribution tooling"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Track a detection stream and write MOT CSV + JSONL outputs.
    Track(TrackArgs),
    /// Fit the graph-convolution weights on a stream with ground truth.
    Train(TrainArgs),
    /// Evaluate a tracked stream against ground truth.
    Eval(EvalArgs),
    /// Attribute one frame's association decision (grad-cam, grad-cam++,
    /// eigen-cam) and report interpretability metrics.
    Explain(ExplainArgs),
    /// Generate a synthetic scenario: ground truth plus degraded detections.
    Synth(SynthArgs),
    /// Render tracked frames as SVG overlays.
    Render(RenderArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON run configuration; flags below override individual fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Adjacency mode: raw | normalized.
    #[arg(long)]
    adjacency: Option<String>,
    /// Edge existence gate: or | and.
    #[arg(long = "edge-gate")]
    edge_gate: Option<String>,
    /// Ablation: disable velocity similarity (gate and edge weights).
    #[arg(long = "no-velocity")]
    no_velocity: bool,
    /// Ablation: disable appearance similarity in edge weights.
    #[arg(long = "no-appearance")]
    no_appearance: bool,
    /// Ablation: freeze motion features to zero.
    #[arg(long = "no-temporal")]
    no_temporal: bool,
    /// Ablation: force every edge weight to 1.0.
    #[arg(long = "constant-edge-weights")]
    constant_edge_weights: bool,
    /// Output image size as WxH (pixel conversions and rendering).
    #[arg(long = "image-size")]
    image_size: Option<String>,
}

impl CommonArgs {
    fn load_config(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_json(&read_file(path)?)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(mode) = &self.adjacency {
            cfg.graph.adjacency = match mode.as_str() {
                "raw" => AdjacencyMode::Raw,
                "normalized" => AdjacencyMode::Normalized,
                other => return Err(Error::Config(format!("unknown adjacency mode '{other}'"))),
            };
        }
        if let Some(gate) = &self.edge_gate {
            cfg.graph.edge_gate = match gate.as_str() {
                "or" => EdgeGate::Or,
                "and" => EdgeGate::And,
                other => return Err(Error::Config(format!("unknown edge gate '{other}'"))),
            };
        }
        if self.no_velocity {
            cfg.graph.use_velocity = false;
        }
        if self.no_appearance {
            cfg.graph.use_appearance = false;
        }
        if self.no_temporal {
            cfg.graph.use_temporal = false;
        }
        if self.constant_edge_weights {
            cfg.graph.constant_edge_weights = true;
        }
        if let Some(size) = &self.image_size {
            let (w, h) = size
                .split_once('x')
                .and_then(|(w, h)| Some((w.parse::<f64>().ok()?, h.parse::<f64>().ok()?)))
                .ok_or_else(|| Error::Config(format!("image size '{size}' is not WxH")))?;
            cfg.image.width = w;
            cfg.image.height = h;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrackArgs {
    /// Detection stream path, or '-' to follow JSONL frames on stdin.
    #[arg(long)]
    input: String,
    /// Input format: jsonl | mot (default jsonl; '-' input is always jsonl).
    #[arg(long, default_value = "jsonl")]
    format: String,
    /// Checkpoint with trained weights; seeded init when absent.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long = "out-csv")]
    out_csv: Option<PathBuf>,
    #[arg(long = "out-jsonl")]
    out_jsonl: Option<PathBuf>,
    /// Debug dump: one JSONL line per frame with the graph's composite node
    /// vectors and weighted edges.
    #[arg(long = "dump-graphs")]
    dump_graphs: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Scenario JSON ({"scenario": .., "degradation": ..}) as training data.
    #[arg(long, conflicts_with_all = ["stream", "gt"])]
    scenario: Option<PathBuf>,
    /// Named preset as training data.
    #[arg(long, conflicts_with_all = ["scenario", "stream", "gt"])]
    preset: Option<String>,
    /// Detection stream (requires --gt).
    #[arg(long, requires = "gt")]
    stream: Option<PathBuf>,
    /// Ground-truth stream (requires --stream).
    #[arg(long, requires = "stream")]
    gt: Option<PathBuf>,
    #[arg(long, default_value = "jsonl")]
    format: String,
    #[arg(long = "checkpoint-out")]
    checkpoint_out: PathBuf,
    /// Override the configured epoch count.
    #[arg(long)]
    epochs: Option<usize>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    tracked: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Report JSON output path.
    #[arg(long)]
    report: PathBuf,
    /// Optional flat CSV export.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ExplainArgs {
    /// Detection stream to run the tracker over.
    #[arg(long, required_unless_present = "activations")]
    stream: Option<PathBuf>,
    #[arg(long, default_value = "jsonl")]
    format: String,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Frame index to attribute.
    #[arg(long, required_unless_present = "activations")]
    frame: Option<u64>,
    /// Target track id.
    #[arg(long, required_unless_present = "activations")]
    track: Option<u64>,
    /// External activation/gradient JSON instead of the engine substrate.
    #[arg(long)]
    activations: Option<PathBuf>,
    /// grad-cam | grad-cam++ | eigen-cam | all
    #[arg(long, default_value = "all")]
    method: String,
    /// Activation layer to attribute (default: last hidden layer).
    #[arg(long)]
    layer: Option<usize>,
    /// Fraction of units masked by the flipping metric.
    #[arg(long, default_value_t = 0.2)]
    budget: f64,
    /// Masking mode for perturbation metrics: zero | mean.
    #[arg(long, default_value = "zero")]
    mask: String,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Named preset: crossing | crossing-pair | separated | occlusion |
    /// throughput.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long = "out-gt")]
    out_gt: PathBuf,
    #[arg(long = "out-stream")]
    out_stream: PathBuf,
    /// Write the preset's engine config alongside the streams.
    #[arg(long = "emit-config")]
    emit_config: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct RenderArgs {
    /// Tracked stream (JSONL or MOT CSV; auto-detected).
    #[arg(long)]
    tracked: PathBuf,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    /// Data-provided FPS label for the footer.
    #[arg(long)]
    fps: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

fn read_file(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Stream(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, content: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, content).map_err(Error::Io)
}

fn parse_format(tag: &str) -> Result<Format, Error> {
    tag.parse()
}

/// Tracked/ground-truth files are MOT CSV when they open with the size
/// header, JSONL otherwise.
fn sniff_format(text: &str) -> Format {
    if text.trim_start().starts_with('#') {
        Format::Mot
    } else {
        Format::Jsonl
    }
}

fn load_params(path: &Option<PathBuf>) -> Result<Option<GnnParams>, Error> {
    match path {
        Some(p) => Ok(Some(GnnParams::from_checkpoint_json(&read_file(p)?)?)),
        None => Ok(None),
    }
}

fn cmd_track(args: &TrackArgs) -> Result<(), Error> {
    let cfg = args.common.load_config()?;
    let params = load_params(&args.checkpoint)?;
    let (img_w, img_h) = (cfg.image.width, cfg.image.height);

    if args.input == "-" {
        // Follow-stdin streaming: one frame in, one result out.
        let mut state = match params {
            Some(p) => TrackerState::with_params(cfg, p),
            None => TrackerState::new(cfg),
        };
        let stdin = std::io::stdin();
        let stdout = std::io::stdout();
        let mut out = stdout.lock();
        let mut reader = io::JsonlReader::new();
        let mut frames = 0u64;
        let started = Instant::now();
        for line in stdin.lock().lines() {
            let line = line.map_err(Error::Io)?;
            let Some(frame) = reader.read_line(&line)? else {
                continue;
            };
            let dets = FrameDetections {
                frame_index: frame.frame_index,
                detections: frame.boxes.into_iter().map(|b| b.det).collect(),
            };
            let result = tracker::step(&mut state, &dets)?;
            let tracked = result.to_tracked_frame();
            writeln!(out, "{}", io::jsonl_tracked_line(&tracked)).map_err(Error::Io)?;
            out.flush().map_err(Error::Io)?;
            frames += 1;
        }
        let wall = started.elapsed().as_secs_f64();
        if frames > 0 && wall > 0.0 {
            eprintln!("fps {:.1}", frames as f64 / wall);
        }
        return Ok(());
    }

    let format = parse_format(&args.format)?;
    let frames = io::parse_stream(&read_file(Path::new(&args.input))?, format)?;
    let started = Instant::now();
    let mut state = match params {
        Some(p) => TrackerState::with_params(cfg, p),
        None => TrackerState::new(cfg),
    };
    let mut results = Vec::with_capacity(frames.len());
    let mut dumps = args.dump_graphs.as_ref().map(|_| String::new());
    for frame in &frames {
        results.push(tracker::step(&mut state, frame)?);
        if let (Some(out), Some(trace)) = (dumps.as_mut(), state.last_trace.as_ref()) {
            out.push_str(&trace.graph.dump_line());
            out.push('\n');
        }
    }
    let wall = started.elapsed().as_secs_f64();

    if let (Some(path), Some(text)) = (&args.dump_graphs, &dumps) {
        write_file(path, text)?;
    }
    let tracked: Vec<TrackedFrame> = results.iter().map(|r| r.to_tracked_frame()).collect();
    if let Some(path) = &args.out_csv {
        write_file(path, &io::serialize_tracked_mot(&tracked, img_w, img_h))?;
    }
    if let Some(path) = &args.out_jsonl {
        write_file(path, &io::serialize_tracked(&tracked))?;
    }
    if !results.is_empty() && wall > 0.0 {
        eprintln!("fps {:.1}", results.len() as f64 / wall);
    }
    Ok(())
}

fn load_scenario(
    scenario: &Option<PathBuf>,
    preset: &Option<String>,
    common: &CommonArgs,
) -> Result<(synth::ScenarioConfig, synth::DegradationConfig, RunConfig), Error> {
    let seed = common.seed.unwrap_or(0);
    match (scenario, preset) {
        (Some(path), None) => {
            let mut file = synth::ScenarioFile::from_json(&read_file(path)?)?;
            if let Some(s) = common.seed {
                file.scenario.seed = s;
                file.degradation.seed = s.wrapping_add(1);
            }
            Ok((file.scenario, file.degradation, common.load_config()?))
        }
        (None, Some(name)) => {
            let p = synth::preset(name, seed)?;
            // Explicit --config wins over the preset's tuned config.
            let config = if common.config.is_some() {
                common.load_config()?
            } else {
                let mut cfg = p.config;
                if let Some(s) = common.seed {
                    cfg.seed = s;
                }
                cfg
            };
            Ok((p.scenario, p.degradation, config))
        }
        _ => Err(Error::Config(
            "exactly one of --scenario or --preset is required".into(),
        )),
    }
}

fn cmd_synth(args: &SynthArgs) -> Result<(), Error> {
    let (scenario, degradation, config) =
        load_scenario(&args.scenario, &args.preset, &args.common)?;
    let gt = synth::generate(&scenario)?;
    let stream = synth::degrade(&gt, &degradation);
    write_file(&args.out_gt, &io::serialize_tracked(&gt.frames))?;
    write_file(&args.out_stream, &io::serialize_stream(&stream))?;
    if let Some(path) = &args.emit_config {
        write_file(path, &config.to_json())?;
    }
    eprintln!(
        "generated {} objects x {} frames (min pairwise distance {:.4})",
        scenario.object_count,
        scenario.frame_count,
        gt.min_pairwise_distance()
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<(), Error> {
    let cfg;
    let stream;
    let gt_frames;
    if let (Some(stream_path), Some(gt_path)) = (&args.stream, &args.gt) {
        cfg = args.common.load_config()?;
        let format = parse_format(&args.format)?;
        stream = io::parse_stream(&read_file(stream_path)?, format)?;
        let gt_text = read_file(gt_path)?;
        gt_frames = io::parse_tracked(&gt_text, sniff_format(&gt_text))?;
    } else {
        let (scenario, degradation, config) =
            load_scenario(&args.scenario, &args.preset, &args.common)?;
        let gt = synth::generate(&scenario)?;
        stream = synth::degrade(&gt, &degradation);
        gt_frames = gt.frames;
        cfg = config;
    }

    let instances = gnn::build_training_set(&stream, &gt_frames, &cfg);
    if instances.is_empty() {
        return Err(Error::Correspondence(
            "no trainable frame pairs (stream and ground truth never match)".into(),
        ));
    }
    let input_dim = instances[0].pair.h0_t.cols;
    let mut dims = vec![input_dim];
    dims.extend(&cfg.gnn.hidden_dims);
    let mut rng = Rng::derive(cfg.seed, "gnn-init", 0);
    let mut params = GnnParams::init(&dims, &mut rng);

    let weights = cfg.gnn.loss_weights();
    let epochs = args.epochs.unwrap_or(cfg.gnn.epochs);
    let mut lr = cfg.gnn.learning_rate;
    let mut velocity = None;
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    for epoch in 0..epochs {
        let (next, losses) = gnn::train_step(
            &params,
            &instances,
            lr,
            cfg.gnn.momentum,
            &mut velocity,
            &weights,
        )?;
        params = next;
        println!(
            "epoch {epoch}: total {:.6} det {:.6} (bbox {:.6} cls {:.6}) track {:.6} (edge {:.6} temporal {:.6}) lr {lr:.6}",
            losses.l_total,
            losses.l_det,
            losses.l_bbox,
            losses.l_cls,
            losses.l_track,
            losses.l_track_edge,
            losses.l_track_temporal
        );
        if cfg.gnn.plateau_patience > 0 {
            if losses.l_total < best - 1e-12 {
                best = losses.l_total;
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.gnn.plateau_patience {
                    lr /= 2.0;
                    stale = 0;
                }
            }
        }
    }
    write_file(&args.checkpoint_out, &params.to_checkpoint_json())?;
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Error> {
    let cfg = args.common.load_config()?;
    let tracked_text = read_file(&args.tracked)?;
    let gt_text = read_file(&args.gt)?;
    let tracked = io::parse_tracked(&tracked_text, sniff_format(&tracked_text))?;
    let gt = io::parse_tracked(&gt_text, sniff_format(&gt_text))?;
    let report = eval::evaluate(
        &tracked,
        &gt,
        cfg.eval_iou,
        cfg.image.width,
        cfg.image.height,
    )?;
    write_file(&args.report, &report.to_json())?;
    if let Some(path) = &args.csv {
        write_file(path, &report.to_csv())?;
    }
    println!(
        "precision {:.4} recall {:.4} mAP@0.5 {:.4} mAP@0.5:0.95 {:.4}",
        report.detection.precision,
        report.detection.recall,
        report.detection.map_50,
        report.detection.map_50_95
    );
    println!(
        "MAE {:.3}px RMSE {:.3}px MAPE {:.3}% id_switches {} association_accuracy {:.4}",
        report.trajectory.mae,
        report.trajectory.rmse,
        report.trajectory.mape_percent,
        report.id_switches,
        report.association_accuracy
    );
    Ok(())
}

struct MethodOutput {
    name: &'static str,
    map: explain::AttributionMap,
    eigen: Option<explain::EigenDiagnostics>,
}

fn cmd_explain(args: &ExplainArgs) -> Result<(), Error> {
    let cfg = args.common.load_config()?;
    let mask = match args.mask.as_str() {
        "zero" => MaskMode::Zero,
        "mean" => MaskMode::Mean,
        other => return Err(Error::Config(format!("unknown mask mode '{other}'"))),
    };
    let want = |m: &str| args.method == "all" || args.method == m;
    if !["all", "grad-cam", "grad-cam++", "eigen-cam"].contains(&args.method.as_str()) {
        return Err(Error::Config(format!("unknown method '{}'", args.method)));
    }

    // Assemble the substrate: engine trace or external file.
    let acts: explain::ActivationStack;
    let score: Option<Box<dyn ScoreFn + Sync>>;
    let score_set: Option<Box<dyn explain::ScoreSet>>;
    if let Some(path) = &args.activations {
        let file = explain::ActivationFile::from_json(&read_file(path)?)?;
        acts = file.stack()?;
        score = file
            .grads
            .clone()
            .map(|weights| Box::new(explain::LinearScore { weights }) as Box<dyn ScoreFn + Sync>);
        score_set = file.grads.clone().map(|weights| {
            Box::new(explain::LinearScoreSet {
                classes: vec![explain::LinearScore { weights }],
            }) as Box<dyn explain::ScoreSet>
        });
    } else {
        let stream_path = args.stream.as_ref().expect("clap requires --stream");
        let frame_index = args.frame.expect("clap requires --frame");
        let track_id = args.track.expect("clap requires --track");
        let format = parse_format(&args.format)?;
        let frames = io::parse_stream(&read_file(stream_path)?, format)?;
        let upto: Vec<FrameDetections> = frames
            .into_iter()
            .take_while(|f| f.frame_index <= frame_index)
            .collect();
        if upto.last().map(|f| f.frame_index) != Some(frame_index) {
            return Err(Error::Stream(format!(
                "frame {frame_index} is not in the stream"
            )));
        }
        let params = load_params(&args.checkpoint)?;
        let (_results, state) = tracker::track_stream(&upto, cfg.clone(), params)?;
        let trace = state
            .last_trace
            .as_ref()
            .ok_or_else(|| Error::Stream("tracker produced no trace".into()))?;
        let engine_params = state
            .params()
            .ok_or_else(|| Error::Stream("no detections, so no activations".into()))?;
        let layer = args.layer.unwrap_or(engine_params.layer_count() - 1);
        let (stack, set, target_class) = explain::association_context(
            trace,
            engine_params,
            cfg.tracker.beta,
            track_id,
            layer,
        )?;
        acts = stack;
        score = Some(Box::new(set.scores[target_class].clone()));
        score_set = Some(Box::new(set));
    }

    let mut outputs: Vec<MethodOutput> = Vec::new();
    if want("grad-cam") {
        let s = score.as_ref().ok_or_else(|| {
            Error::Attribution("grad-cam needs gradients (none in the activation file)".into())
        })?;
        let grads = s.grads(&acts);
        outputs.push(MethodOutput {
            name: "grad_cam",
            map: explain::grad_cam(&acts, &grads)?,
            eigen: None,
        });
    }
    if want("grad-cam++") {
        let s = score.as_ref().ok_or_else(|| {
            Error::Attribution("grad-cam++ needs gradients (none in the activation file)".into())
        })?;
        outputs.push(MethodOutput {
            name: "grad_cam_pp",
            map: explain::grad_cam_pp(&acts, s.as_ref()),
            eigen: None,
        });
    }
    if want("eigen-cam") {
        let (map, diag) = explain::eigen_cam(&acts)?;
        // Gated write: the eigen-residual check must pass first.
        if diag.residual > diag.residual_threshold {
            return Err(Error::Attribution(format!(
                "eigen-residual {:.3e} exceeds threshold {:.3e}",
                diag.residual, diag.residual_threshold
            )));
        }
        outputs.push(MethodOutput {
            name: "eigen_cam",
            map,
            eigen: Some(diag),
        });
    }

    fs::create_dir_all(&args.out_dir)?;
    println!("method faithfulness flipping complexity comprehension80");
    for out in &outputs {
        write_file(
            &args.out_dir.join(format!("{}.json", out.name)),
            &out.map.to_json(),
        )?;
        write_file(
            &args.out_dir.join(format!("{}.pgm", out.name)),
            &out.map.to_pgm(),
        )?;
        if let Some(diag) = &out.eigen {
            eprintln!(
                "eigen: lambda {:.6} residual {:.3e} (threshold {:.3e}) after {} iterations",
                diag.lambda, diag.residual, diag.residual_threshold, diag.iterations
            );
        }
        let faith = match &score {
            Some(s) => match explain::faithfulness(s.as_ref(), &acts, &out.map, mask) {
                Ok(v) => format!("{v:.4}"),
                Err(_) => "n/a".into(),
            },
            None => "n/a".into(),
        };
        let flip = match &score_set {
            Some(set) => {
                let flipped = explain::flip_case(set.as_ref(), &acts, &out.map, args.budget, mask);
                format!("{:.1}", explain::flipping_rate(&[flipped]))
            }
            None => "n/a".into(),
        };
        let cx = explain::complexity(&out.map)
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|_| "n/a".into());
        let co = explain::comprehension80(&out.map)
            .map(|v| format!("{v:.2}"))
            .unwrap_or_else(|_| "n/a".into());
        println!("{} {faith} {flip} {cx} {co}", out.name);
    }
    Ok(())
}

fn cmd_render(args: &RenderArgs) -> Result<(), Error> {
    let cfg = args.common.load_config()?;
    let text = read_file(&args.tracked)?;
    let frames = io::parse_tracked(&text, sniff_format(&text))?;
    fs::create_dir_all(&args.out_dir)?;
    for frame in &frames {
        let svg = render::render_frame(frame, cfg.image.width, cfg.image.height, args.fps);
        write_file(
            &args.out_dir.join(format!("frame_{:05}.svg", frame.frame_index)),
            &svg,
        )?;
    }
    Ok(())
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Track(args) => cmd_track(args),
        Cmd::Train(args) => cmd_train(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::Explain(args) => cmd_explain(args),
        Cmd::Synth(args) => cmd_synth(args),
        Cmd::Render(args) => cmd_render(args),
    }
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
