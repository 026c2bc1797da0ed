use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use cova::blob::BlobNetModel;
use cova::meta::{read_stream, split_gops, write_stream};
use cova::pipeline::{extract_tracks, run_pipeline, train_model, PipelineConfig, PipelineReport, QueryMetric};
use cova::propagation::{analysis_path, read_analysis};
use cova::query::{evaluate, ground_truth, run_query, Query, QueryKind, Region};
use cova::scene::{encode_metadata, generate_scene, render_frame, Scene, SceneConfig};
use cova::selection::{make_report, select_all};
use cova::tracking::{read_tracks, write_tracks};
use cova::CovaError;

#[derive(Parser)]
#[command(name = "cova", version, about = "Compressed-domain video analytics over synthetic encoder metadata")]
struct Cli {
    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true, env = "COVA_SEED")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene with its metadata stream and prefix frames.
    Gen(GenArgs),
    /// Train BlobNet-lite on background-subtraction labels from the start of a video.
    Train(TrainArgs),
    /// Run the full cascade and store the frame analysis.
    Analyze(AnalyzeArgs),
    /// Answer a query from a stored analysis.
    Query(QueryArgs),
    /// Print a stored pipeline report, optionally scored against ground truth.
    Report(ReportArgs),
    /// Check a metadata stream or analysis file.
    Validate { file: PathBuf },
    /// Dump confirmed blob tracks as JSON lines.
    Tracks(TracksArgs),
    /// Choose anchor frames for dumped tracks.
    Plan(PlanArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "sparse")]
    preset: String,
    #[arg(long)]
    out: PathBuf,
    /// Override the preset's frame count.
    #[arg(long)]
    frames: Option<usize>,
    /// Fraction of the video written as PGM frames.
    #[arg(long, default_value_t = 0.03)]
    prefix: f64,
}

#[derive(Args)]
struct Inputs {
    /// Directory holding meta.jsonl, scene.json and model.bnl.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    stream: Option<PathBuf>,
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Metadata stream.
    #[arg(long)]
    video: PathBuf,
    /// Scene used for background-subtraction labels; defaults to scene.json beside the stream.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Leading fraction of the video to label.
    #[arg(long)]
    frames: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Directory for the analysis and report.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Train and save a model when none exists.
    #[arg(long)]
    train: bool,
    #[arg(long)]
    video_id: Option<String>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    analysis: PathBuf,
    /// bp, cnt, lbp or lcnt.
    #[arg(long)]
    kind: QueryKind,
    #[arg(long)]
    label: String,
    /// Preset name (upper-left, ..., full) or x0,y0,x1,y1 in normalized coordinates.
    #[arg(long)]
    region: Option<Region>,
    /// Scene whose ground truth the result is scored against.
    #[arg(long)]
    eval: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Output directory of `cova analyze`.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value = "video")]
    video_id: String,
    /// Add BP and CNT metrics for every label of this scene.
    #[arg(long)]
    eval: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TracksArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    tracks: PathBuf,
    #[arg(long)]
    stream: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(v) => {
            let text = serde_json::to_string_pretty(&v).expect("json output");
            match writeln!(io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
                    eprintln!("error: {e}");
                    ExitCode::from(3)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn run(cli: Cli) -> cova::Result<Value> {
    let seed = cli.seed;
    match cli.command {
        Command::Gen(a) => gen(a, seed),
        Command::Train(a) => train(a, seed),
        Command::Analyze(a) => analyze(a, seed),
        Command::Query(a) => query(a),
        Command::Report(a) => report(a),
        Command::Validate { file } => validate(&file),
        Command::Tracks(a) => tracks(a, seed),
        Command::Plan(a) => plan(a),
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> cova::Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn resolve(inputs: &Inputs, seed: Option<u64>) -> cova::Result<PipelineConfig> {
    let mut cfg = load_config(inputs.config.as_deref(), seed)?;
    let pick = |explicit: &Option<PathBuf>, configured: &mut Option<PathBuf>, name: &str| {
        if let Some(p) = explicit {
            *configured = Some(p.clone());
        } else if configured.is_none() {
            *configured = inputs.data.as_ref().map(|d| d.join(name));
        }
    };
    pick(&inputs.stream, &mut cfg.stream_path, "meta.jsonl");
    pick(&inputs.scene, &mut cfg.scene_path, "scene.json");
    pick(&inputs.model, &mut cfg.model_path, "model.bnl");
    Ok(cfg)
}

fn required(p: &Option<PathBuf>, what: &str) -> cova::Result<PathBuf> {
    p.clone().ok_or_else(|| CovaError::Config(format!("no {what} given; use --{what} or --data")))
}

/// Missing input files are data errors that name the file.
fn existing(path: &Path) -> cova::Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CovaError::Input(format!("{} does not exist", path.display())))
    }
}

fn gen(a: GenArgs, seed: Option<u64>) -> cova::Result<Value> {
    let mut config = SceneConfig::preset(&a.preset)
        .ok_or_else(|| CovaError::Config(format!("unknown preset {:?}; expected sparse, busy or tiny", a.preset)))?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(n) = a.frames {
        config.num_frames = n;
    }
    if !(0.0..=1.0).contains(&a.prefix) {
        return Err(CovaError::Config(format!("--prefix must lie in [0, 1], got {}", a.prefix)));
    }
    config.validate()?;
    let scene = generate_scene(&config)?;
    let stream = encode_metadata(&scene)?;
    let frames_dir = a.out.join("frames");
    fs::create_dir_all(&frames_dir)?;
    scene.save_json(a.out.join("scene.json"))?;
    write_stream(&stream, a.out.join("meta.jsonl"))?;
    let prefix = (a.prefix * config.num_frames as f64).ceil() as usize;
    for t in 0..prefix.min(config.num_frames) {
        render_frame(&scene, t)?.save_pgm(frames_dir.join(format!("frame_{t:06}.pgm")))?;
    }
    Ok(json!({
        "out": a.out,
        "frames": config.num_frames,
        "objects": scene.objects.len(),
        "pgm_frames": prefix.min(config.num_frames),
        "seed": config.seed,
    }))
}

fn train(a: TrainArgs, seed: Option<u64>) -> cova::Result<Value> {
    let mut cfg = load_config(a.config.as_deref(), seed)?;
    if let Some(f) = a.frames {
        cfg.train.train_fraction = f;
    }
    cfg.validate()?;
    let scene_path = match a.scene {
        Some(p) => p,
        None => a.video.parent().unwrap_or(Path::new(".")).join("scene.json"),
    };
    let stream = read_stream(existing(&a.video)?)?;
    let scene = Scene::load_json(existing(&scene_path)?)?;
    let (model, summary) = train_model(&scene, &stream, &cfg)?;
    model.save(&a.out)?;
    Ok(json!({ "model": a.out, "params": model.param_count(), "summary": summary }))
}

fn analyze(a: AnalyzeArgs, seed: Option<u64>) -> cova::Result<Value> {
    let mut cfg = resolve(&a.inputs, seed)?;
    if let Some(out) = a.out {
        cfg.output_dir = Some(out);
    }
    if let Some(w) = a.workers {
        cfg.worker_count = w;
    }
    if let Some(id) = a.video_id {
        cfg.video_id = id;
    }
    cfg.train_if_missing |= a.train;
    existing(&required(&cfg.stream_path, "stream")?)?;
    existing(&required(&cfg.scene_path, "scene")?)?;
    let out = run_pipeline(&cfg)?;
    let mut v = serde_json::to_value(&out.report)?;
    if let Some(dir) = &cfg.output_dir {
        v["analysis_path"] = json!(analysis_path(dir, &cfg.video_id, &out.report.config_hash));
    }
    Ok(v)
}

fn query(a: QueryArgs) -> cova::Result<Value> {
    let q = Query { kind: a.kind, label: a.label, region: a.region };
    q.validate()?;
    let (header, analysis) = read_analysis(existing(&a.analysis)?)?;
    let result = run_query(&analysis, &q)?;
    let mut v = json!({
        "video_id": header.video_id,
        "config_hash": header.config_hash,
        "num_frames": header.num_frames,
        "query": q,
        "result": result,
    });
    if let Some(scene) = a.eval {
        let truth = ground_truth(&Scene::load_json(existing(&scene)?)?);
        let name = if q.kind.is_count() { "absolute_error" } else { "accuracy" };
        v["metric"] = json!({ name: evaluate(&analysis, &truth, &q)? });
    }
    Ok(v)
}

fn report(a: ReportArgs) -> cova::Result<Value> {
    let path = a.dir.join(format!("{}.report.json", a.video_id));
    let text = fs::read_to_string(&path).map_err(|e| CovaError::Input(format!("{}: {e}", path.display())))?;
    let mut rep: PipelineReport = serde_json::from_str(&text)?;
    if let Some(scene) = a.eval {
        let scene = Scene::load_json(existing(&scene)?)?;
        let truth = ground_truth(&scene);
        let (_, analysis) = read_analysis(analysis_path(&a.dir, &a.video_id, &rep.config_hash))?;
        rep.queries.clear();
        for label in &scene.config.label_set {
            for kind in [QueryKind::Bp, QueryKind::Cnt] {
                let query = Query::global(kind, label);
                let value = evaluate(&analysis, &truth, &query)?;
                rep.queries.push(QueryMetric { query, value });
            }
        }
    }
    let v = serde_json::to_value(&rep)?;
    if let Some(out) = a.out {
        fs::write(&out, serde_json::to_string_pretty(&v)?)?;
    }
    Ok(v)
}

fn validate(file: &Path) -> cova::Result<Value> {
    let text = fs::read_to_string(existing(file)?)?;
    let first = text.lines().next().ok_or_else(|| CovaError::Header("empty file".into()))?;
    let header: Value = serde_json::from_str(first).map_err(|e| CovaError::Header(e.to_string()))?;
    match header["format"].as_str() {
        Some(cova::meta::FORMAT_TAG) => {
            let stream = read_stream(file)?;
            let gops = split_gops(&stream)?.len();
            Ok(json!({ "valid": true, "kind": "metadata", "frames": stream.len(), "gops": gops, "header": stream.header }))
        }
        Some(cova::propagation::ANALYSIS_FORMAT) => {
            let (header, analysis) = read_analysis(file)?;
            let objects: usize = analysis.frames.iter().map(Vec::len).sum();
            Ok(json!({ "valid": true, "kind": "analysis", "objects": objects, "header": header }))
        }
        other => Err(CovaError::Header(format!("unrecognized format {other:?}"))),
    }
}

fn tracks(a: TracksArgs, seed: Option<u64>) -> cova::Result<Value> {
    let cfg = resolve(&a.inputs, seed)?;
    let stream = read_stream(existing(&required(&cfg.stream_path, "stream")?)?)?;
    let model_path = required(&cfg.model_path, "model")?;
    if !model_path.exists() {
        return Err(CovaError::Config(format!("model {} not found", model_path.display())));
    }
    let model = BlobNetModel::load(&model_path)?;
    let tracks = extract_tracks(&stream, &model, &cfg)?;
    write_tracks(&tracks, &a.out)?;
    Ok(json!({ "tracks": tracks.len(), "out": a.out }))
}

fn plan(a: PlanArgs) -> cova::Result<Value> {
    let stream = read_stream(existing(&a.stream)?)?;
    let mut tracks = read_tracks(existing(&a.tracks)?)?;
    if let Some(t) = tracks.iter().find(|t| t.end_frame >= stream.len()) {
        return Err(CovaError::Input(format!("track {} ends at frame {} beyond the stream", t.track_id, t.end_frame)));
    }
    let plans = select_all(&split_gops(&stream)?, &mut tracks)?;
    let lines: Vec<String> = plans.iter().map(serde_json::to_string).collect::<Result<_, _>>()?;
    fs::write(&a.out, lines.join("\n") + "\n")?;
    Ok(serde_json::to_value(make_report(&plans, stream.len()))?)
}
