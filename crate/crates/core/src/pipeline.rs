//! End-to-end orchestration of the cascade.
//!
//! The stream is cut at I-frames into a fixed number of chunks. Worker threads take
//! chunks one at a time and run blob detection, tracking and anchor selection on
//! them. Anchor frames from every chunk go through one bounded queue to a single
//! detector thread, which serves them in batches. Results are merged in chunk order,
//! so the output does not depend on the number of workers or on scheduling.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crossbeam::channel::{bounded, Receiver, Sender};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blob::{
    blobnet_forward, blobnet_train, build_features, make_targets, threshold_mask, Bitmap, BlobNetModel, FeatureTensor,
    MogParams, MogState, TrainConfig, TrainLog,
};
use crate::blob::features::window_at;
use crate::error::{CovaError, Result};
use crate::meta::{chunk_gops, read_stream, split_gops, Chunk, MetadataStream};
use crate::oracle::{detect_batch, Detection, OracleNoise};
use crate::propagation::{
    analysis_path, emit_static, label_tracks, propagate_labels, static_merge, write_analysis, FrameAnalysis,
    LabeledTrack, LabelingStats, PropagationParams,
};
use crate::scene::{mix_seed, render_frame, Scene};
use crate::selection::{make_report, select_all, AnchorPlan, SelectionReport};
use crate::tracking::sort::confirmed;
use crate::tracking::{connected_components, SortParams, SortTracker, Track, DEFAULT_MIN_CELLS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub stream_path: Option<PathBuf>,
    pub scene_path: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub video_id: String,
    /// Threads that process chunks.
    pub worker_count: usize,
    /// Number of I-frame aligned chunks; fixed so results do not depend on `worker_count`.
    pub chunk_count: usize,
    /// Train a model when `model_path` does not exist.
    pub train_if_missing: bool,
    pub train: TrainConfig,
    pub labeling: LabelingConfig,
    pub mog: MogParams,
    pub sort: SortParams,
    pub min_blob_cells: usize,
    pub propagation: PropagationParams,
    pub oracle: OracleNoise,
    pub oracle_batch_size: usize,
    pub queue_capacity: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stream_path: None,
            scene_path: None,
            model_path: None,
            output_dir: None,
            video_id: "video".into(),
            worker_count: 1,
            chunk_count: 8,
            train_if_missing: false,
            train: TrainConfig::default(),
            labeling: LabelingConfig::default(),
            mog: MogParams::default(),
            sort: SortParams::default(),
            min_blob_cells: DEFAULT_MIN_CELLS,
            propagation: PropagationParams::default(),
            oracle: OracleNoise::noiseless(),
            oracle_batch_size: 16,
            queue_capacity: 8,
            seed: 0,
        }
    }
}

/// How the training prefix is labeled by the background model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelingConfig {
    /// The prefix grows one GoP at a time until it holds this many frames with foreground.
    pub min_positive_frames: usize,
    /// Upper bound on the labeled prefix, as a fraction of the video.
    pub max_fraction: f64,
    /// Frames used for the median background estimate.
    pub median_frames: usize,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        Self { min_positive_frames: 40, max_fraction: 0.25, median_frames: 64 }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| CovaError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| CovaError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CovaError::Config(m));
        if self.worker_count == 0 {
            return bad("worker_count must be at least 1".into());
        }
        if self.chunk_count == 0 {
            return bad("chunk_count must be at least 1".into());
        }
        if self.oracle_batch_size == 0 || self.queue_capacity == 0 {
            return bad("oracle_batch_size and queue_capacity must be at least 1".into());
        }
        if !(self.sort.iou_min >= 0.0 && self.sort.iou_min < 1.0) || self.sort.min_hits == 0 {
            return bad("sort.iou_min must lie in [0,1) and sort.min_hits be at least 1".into());
        }
        if !(self.labeling.max_fraction > 0.0 && self.labeling.max_fraction <= 1.0) {
            return bad(format!("labeling.max_fraction {} must lie in (0,1]", self.labeling.max_fraction));
        }
        if self.video_id.is_empty() || self.video_id.contains(['/', '\\']) {
            return bad(format!("video_id {:?} must be a plain non-empty name", self.video_id));
        }
        self.train.validate()?;
        self.propagation.validate()?;
        self.oracle.validate()
    }

    /// Hash of every setting that influences the analysis, together with the model weights.
    /// Paths and `worker_count` are left out.
    pub fn config_hash(&self, model: &BlobNetModel) -> String {
        let mut canon = self.clone();
        canon.stream_path = None;
        canon.scene_path = None;
        canon.model_path = None;
        canon.output_dir = None;
        canon.worker_count = 1;
        canon.train_if_missing = false;
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&canon).expect("config serializes"));
        for p in model.params() {
            h.update(p.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn oracle_noise(&self) -> OracleNoise {
        OracleNoise { seed: mix_seed(self.oracle.seed, self.seed, 0), ..self.oracle }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub labeled_frames: usize,
    pub positive_frames: usize,
    pub samples: usize,
    pub log: TrainLog,
}

/// Network input with its target mask.
pub type TrainingPair = (FeatureTensor, Bitmap);

/// Label a prefix of the video with the background model and build training pairs.
///
/// The prefix covers at least `train.train_fraction` of the frames and grows GoP by GoP
/// while it holds fewer than `labeling.min_positive_frames` frames with foreground.
/// All positive frames are kept, negatives are thinned to at most as many.
pub fn harvest_training_set(
    scene: &Scene,
    stream: &MetadataStream,
    cfg: &PipelineConfig,
) -> Result<(Vec<TrainingPair>, usize, usize)> {
    check_inputs(scene, stream)?;
    let n = stream.len();
    if n == 0 {
        return Err(CovaError::Input("cannot train on an empty stream".into()));
    }
    let depth = cfg.train.temporal_depth;
    let gop = stream.header.gop_length.max(1);
    let min_len = ((cfg.train.train_fraction * n as f64).ceil() as usize).clamp(1, n);
    let max_len = ((cfg.labeling.max_fraction * n as f64).ceil() as usize).clamp(min_len, n);

    let spaced = |len: usize| -> Result<Vec<_>> {
        let k = cfg.labeling.median_frames.clamp(1, len);
        (0..k).map(|i| render_frame(scene, i * len / k)).collect()
    };
    let mut mog = MogState::from_median(&spaced(min_len)?, cfg.mog)?;
    let mut targets: Vec<Bitmap> = Vec::new();
    let mut positives = 0;
    let mut len = min_len;
    let mut t = 0;
    loop {
        while t < len {
            let mask = mog.step(&render_frame(scene, t)?)?;
            let target = make_targets(&mask);
            positives += usize::from(!target.is_empty());
            targets.push(target);
            t += 1;
        }
        if positives >= cfg.labeling.min_positive_frames || len >= max_len {
            break;
        }
        len = (len + gop).min(max_len);
    }
    if len > min_len {
        log::info!("training prefix extended to {len} frames to collect {positives} frames with motion");
    }

    let neg_total = len - positives;
    let stride = if positives == 0 { 1 } else { neg_total.div_ceil(positives).max(1) };
    let mut samples = Vec::new();
    let mut neg_seen = 0;
    for (t, y) in targets.into_iter().enumerate() {
        let keep = if y.is_empty() {
            neg_seen += 1;
            (neg_seen - 1) % stride == 0
        } else {
            true
        };
        if keep {
            let x = FeatureTensor::from_window(&window_at(&stream.frames, t, depth))?;
            samples.push((x, y));
        }
    }
    Ok((samples, len, positives))
}

/// Train a fresh BlobNet-lite on MoG labels from the start of the video.
pub fn train_model(scene: &Scene, stream: &MetadataStream, cfg: &PipelineConfig) -> Result<(BlobNetModel, TrainingSummary)> {
    cfg.validate()?;
    let (data, labeled_frames, positive_frames) = harvest_training_set(scene, stream, cfg)?;
    let init = BlobNetModel::init(cfg.train.temporal_depth, cfg.seed);
    let train = TrainConfig { seed: cfg.seed, ..cfg.train.clone() };
    let (model, log) = blobnet_train(&init, &data, &train)?;
    Ok((model, TrainingSummary { labeled_frames, positive_frames, samples: data.len(), log }))
}

fn check_inputs(scene: &Scene, stream: &MetadataStream) -> Result<()> {
    let (h, c) = (&stream.header, &scene.config);
    if (h.width_px, h.height_px) != (c.width_px, c.height_px) {
        return Err(CovaError::Input(format!(
            "stream is {}x{} but scene is {}x{}",
            h.width_px, h.height_px, c.width_px, c.height_px
        )));
    }
    if stream.len() != c.num_frames {
        return Err(CovaError::Input(format!("stream has {} frames, scene {}", stream.len(), c.num_frames)));
    }
    Ok(())
}

/// Wall-clock and scheduling figures; these vary between runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub blob_ms: f64,
    pub tracking_ms: f64,
    pub selection_ms: f64,
    pub oracle_ms: f64,
    pub propagation_ms: f64,
    pub total_ms: f64,
    /// Metadata frames per second through the whole cascade on this CPU; not comparable
    /// to GPU decoder throughput.
    pub throughput_fps: f64,
    pub oracle_batches: usize,
    pub worker_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetric {
    pub query: crate::query::Query,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub video_id: String,
    pub config_hash: String,
    #[serde(flatten)]
    pub selection: SelectionReport,
    /// `total_frames / decoded_frames`.
    pub effective_decode_speedup: f64,
    pub chunks: usize,
    pub blob_stage_frames: usize,
    pub blobs: usize,
    pub confirmed_tracks: usize,
    pub labeling: LabelingStats,
    pub static_tracks: usize,
    pub oracle_frames: usize,
    pub detections: usize,
    #[serde(default)]
    pub queries: Vec<QueryMetric>,
    pub runtime: RuntimeStats,
}

impl PipelineReport {
    /// The report without run-dependent figures, for reproducibility comparisons.
    pub fn without_runtime(&self) -> PipelineReport {
        PipelineReport { runtime: RuntimeStats::default(), ..self.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub analysis: FrameAnalysis,
    pub report: PipelineReport,
    pub plans: Vec<AnchorPlan>,
    /// Labeled tracks with global ids, ordered by id.
    pub tracks: Vec<LabeledTrack>,
}

struct ChunkOutput {
    chunk_index: usize,
    plans: Vec<AnchorPlan>,
    labeled: Vec<LabeledTrack>,
    leftover: BTreeMap<usize, Vec<Detection>>,
    stats: LabelingStats,
    blobs: usize,
    confirmed: usize,
    detections: usize,
    timings: [Duration; 5],
}

struct OracleRequest {
    frames: Vec<usize>,
    reply: Sender<Result<Vec<Vec<Detection>>>>,
}

/// Single consumer serving anchor-frame requests from all chunks in batches.
fn oracle_consumer(scene: &Scene, noise: &OracleNoise, rx: Receiver<OracleRequest>, batch_size: usize) -> usize {
    let mut batches = 0;
    while let Ok(first) = rx.recv() {
        let mut pending = vec![first];
        let mut frames = pending[0].frames.len();
        while frames < batch_size {
            match rx.try_recv() {
                Ok(r) => {
                    frames += r.frames.len();
                    pending.push(r);
                }
                Err(_) => break,
            }
        }
        let all: Vec<usize> = pending.iter().flat_map(|r| r.frames.iter().copied()).collect();
        batches += 1;
        match detect_batch(scene, &all, noise) {
            Ok(mut dets) => {
                for r in pending.into_iter().rev() {
                    let mine = dets.split_off(dets.len() - r.frames.len());
                    let _ = r.reply.send(Ok(mine));
                }
            }
            Err(e) => {
                for r in pending {
                    let _ = r.reply.send(Err(CovaError::Input(format!("detector failed: {e}"))));
                }
            }
        }
    }
    batches
}

struct Context<'a> {
    stream: &'a MetadataStream,
    model: &'a BlobNetModel,
    cfg: &'a PipelineConfig,
}

struct ChunkTracks {
    tracks: Vec<Track>,
    blobs: usize,
    blob_time: Duration,
    tracking_time: Duration,
}

/// Blob detection and tracking over one chunk; returns the confirmed tracks.
fn track_chunk(
    stream: &MetadataStream,
    model: &BlobNetModel,
    cfg: &PipelineConfig,
    chunk: &Chunk<'_>,
    current: &AtomicUsize,
) -> Result<ChunkTracks> {
    let id_base = (chunk.chunk_index as u64) << 32;
    let mut tracker = SortTracker::new(cfg.sort, id_base);
    let (mut blob_time, mut tracking_time) = (Duration::ZERO, Duration::ZERO);
    let mut blobs_seen = 0;
    let depth = model.temporal_depth();
    for gop in &chunk.gops {
        for f in gop.frames {
            let t = f.frame_index;
            current.store(t, Ordering::Relaxed);
            let t0 = Instant::now();
            let x = build_features(&window_at(&stream.frames, t, depth), model)?;
            let probs = blobnet_forward(model, &x)?;
            let mask = threshold_mask(&probs, x.width, x.height, cfg.train.threshold);
            let blobs = connected_components(&mask, t, cfg.min_blob_cells);
            let t1 = Instant::now();
            blobs_seen += blobs.len();
            tracker.step(t, &blobs)?;
            blob_time += t1 - t0;
            tracking_time += t1.elapsed();
        }
    }
    Ok(ChunkTracks { tracks: confirmed(tracker.finish()), blobs: blobs_seen, blob_time, tracking_time })
}

/// Confirmed tracks for the whole stream, chunked as in [`run_pipeline_on`].
///
/// Track ids carry the chunk index in their upper 32 bits.
pub fn extract_tracks(stream: &MetadataStream, model: &BlobNetModel, cfg: &PipelineConfig) -> Result<Vec<Track>> {
    cfg.validate()?;
    let chunks = chunk_gops(split_gops(stream)?, cfg.chunk_count);
    let mut out = Vec::new();
    for chunk in &chunks {
        let current = AtomicUsize::new(chunk.start());
        out.extend(track_chunk(stream, model, cfg, chunk, &current)?.tracks);
    }
    Ok(out)
}

fn process_chunk(ctx: &Context<'_>, chunk: &Chunk<'_>, oracle: &Sender<OracleRequest>, current: &AtomicUsize) -> Result<ChunkOutput> {
    let cfg = ctx.cfg;
    let id_base = (chunk.chunk_index as u64) << 32;
    let mut timings = [Duration::ZERO; 5];
    let ChunkTracks { mut tracks, blobs: blobs_seen, blob_time, tracking_time } =
        track_chunk(ctx.stream, ctx.model, cfg, chunk, current)?;
    timings[0] = blob_time;
    timings[1] = tracking_time;

    let t0 = Instant::now();
    let plans = select_all(&chunk.gops, &mut tracks)?;
    timings[2] += t0.elapsed();

    let t0 = Instant::now();
    let anchors: Vec<usize> =
        plans.iter().flat_map(|p| p.anchor_frames.iter().copied()).collect::<BTreeSet<_>>().into_iter().collect();
    let mut detections: BTreeMap<usize, Vec<Detection>> = BTreeMap::new();
    if !anchors.is_empty() {
        let (tx, rx) = bounded(1);
        oracle
            .send(OracleRequest { frames: anchors.clone(), reply: tx })
            .map_err(|_| CovaError::Invariant("detector queue closed".into()))?;
        let dets = rx.recv().map_err(|_| CovaError::Invariant("detector stopped".into()))??;
        detections.extend(anchors.into_iter().zip(dets));
    }
    timings[3] += t0.elapsed();

    let t0 = Instant::now();
    let assignments: BTreeMap<u64, usize> = plans.iter().flat_map(|p| p.assignments.iter().map(|(&k, &v)| (k, v))).collect();
    let mut next_id = id_base | (1 << 31);
    let labeling = label_tracks(&tracks, &assignments, &detections, &cfg.propagation, &mut next_id)?;
    timings[4] += t0.elapsed();

    Ok(ChunkOutput {
        chunk_index: chunk.chunk_index,
        plans,
        labeled: labeling.tracks,
        leftover: labeling.leftover,
        stats: labeling.stats,
        blobs: blobs_seen,
        confirmed: tracks.len(),
        detections: detections.values().map(Vec::len).sum(),
        timings,
    })
}

/// Run the cascade on in-memory inputs.
pub fn run_pipeline_on(scene: &Scene, stream: &MetadataStream, model: &BlobNetModel, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    check_inputs(scene, stream)?;
    if model.temporal_depth() != cfg.train.temporal_depth {
        log::warn!(
            "model temporal depth {} differs from configured {}; using the model's",
            model.temporal_depth(),
            cfg.train.temporal_depth
        );
    }
    let started = Instant::now();
    let chunks = chunk_gops(split_gops(stream)?, cfg.chunk_count);
    let ctx = Context { stream, model, cfg };
    let noise = cfg.oracle_noise();

    let next_chunk = AtomicUsize::new(0);
    let results: Mutex<Vec<Result<ChunkOutput>>> = Mutex::new(Vec::new());
    let (req_tx, req_rx) = bounded::<OracleRequest>(cfg.queue_capacity);
    let batches = std::thread::scope(|s| {
        let consumer = s.spawn(|| oracle_consumer(scene, &noise, req_rx, cfg.oracle_batch_size));
        for _ in 0..cfg.worker_count.min(chunks.len().max(1)) {
            let tx = req_tx.clone();
            let (chunks, ctx, next_chunk, results) = (&chunks, &ctx, &next_chunk, &results);
            s.spawn(move || loop {
                let i = next_chunk.fetch_add(1, Ordering::SeqCst);
                let Some(chunk) = chunks.get(i) else { break };
                let current = AtomicUsize::new(chunk.start());
                let out = catch_unwind(AssertUnwindSafe(|| process_chunk(ctx, chunk, &tx, &current)))
                    .unwrap_or_else(|panic| {
                        let msg = panic
                            .downcast_ref::<String>()
                            .cloned()
                            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                            .unwrap_or_else(|| "panic".into());
                        Err(CovaError::Invariant(msg))
                    })
                    .map_err(|e| match e {
                        e @ CovaError::Chunk { .. } => e,
                        e => CovaError::Chunk { chunk: chunk.chunk_index, frame: current.load(Ordering::Relaxed), msg: e.to_string() },
                    });
                results.lock().expect("result lock").push(out);
            });
        }
        drop(req_tx);
        consumer.join().expect("detector thread")
    });

    let mut outputs = results.into_inner().expect("result lock").into_iter().collect::<Result<Vec<_>>>()?;
    outputs.sort_by_key(|o| o.chunk_index);
    merge(stream, cfg, model, chunks.len(), outputs, batches, started)
}

fn merge(
    stream: &MetadataStream,
    cfg: &PipelineConfig,
    model: &BlobNetModel,
    chunk_count: usize,
    outputs: Vec<ChunkOutput>,
    oracle_batches: usize,
    started: Instant,
) -> Result<PipelineOutput> {
    let t0 = Instant::now();
    let n = stream.len();
    let mut plans = Vec::new();
    let mut tracks = Vec::new();
    let mut leftover = BTreeMap::new();
    let mut stats = LabelingStats::default();
    let (mut blobs, mut confirmed_tracks, mut detections) = (0, 0, 0);
    let mut timings = [Duration::ZERO; 5];
    let mut next_id = 0u64;
    for out in outputs {
        let mut labeled = out.labeled;
        labeled.sort_by_key(|t| (t.start_frame, t.track_id));
        // sub-tracks of a split share the global id of the first of them as parent
        let mut parents: BTreeMap<u64, u64> = BTreeMap::new();
        for mut t in labeled {
            t.track_id = next_id;
            t.parent_id = *parents.entry(t.parent_id).or_insert(next_id);
            next_id += 1;
            tracks.push(t);
        }
        plans.extend(out.plans);
        leftover.extend(out.leftover);
        stats.matched_tracks += out.stats.matched_tracks;
        stats.unknown_tracks += out.stats.unknown_tracks;
        stats.split_tracks += out.stats.split_tracks;
        stats.label_conflicts += out.stats.label_conflicts;
        blobs += out.blobs;
        confirmed_tracks += out.confirmed;
        detections += out.detections;
        for (acc, d) in timings.iter_mut().zip(out.timings) {
            *acc += d;
        }
    }
    let statics = static_merge(&leftover, cfg.propagation.static_iou_threshold, &mut next_id);
    let mut analysis = FrameAnalysis::empty(n, stream.header.width_px, stream.header.height_px);
    propagate_labels(&tracks, &mut analysis, &cfg.propagation)?;
    emit_static(&statics, &mut analysis)?;
    analysis.canonicalize();
    timings[4] += t0.elapsed();

    let selection = make_report(&plans, n);
    let ms = |d: Duration| d.as_secs_f64() * 1e3;
    let total = started.elapsed();
    let report = PipelineReport {
        video_id: cfg.video_id.clone(),
        config_hash: cfg.config_hash(model),
        effective_decode_speedup: selection.effective_decode_speedup(),
        oracle_frames: selection.anchor_frames,
        selection,
        chunks: chunk_count,
        blob_stage_frames: n,
        blobs,
        confirmed_tracks,
        labeling: stats,
        static_tracks: statics.len(),
        detections,
        queries: Vec::new(),
        runtime: RuntimeStats {
            blob_ms: ms(timings[0]),
            tracking_ms: ms(timings[1]),
            selection_ms: ms(timings[2]),
            oracle_ms: ms(timings[3]),
            propagation_ms: ms(timings[4]),
            total_ms: ms(total),
            throughput_fps: if total.is_zero() { 0.0 } else { n as f64 / total.as_secs_f64() },
            oracle_batches,
            worker_count: cfg.worker_count,
        },
    };
    Ok(PipelineOutput { analysis, report, plans, tracks })
}

/// Load inputs from the configured paths, run the cascade and persist the results.
///
/// Without an existing model file the run fails unless `train_if_missing` is set, in
/// which case a model is trained and saved to `model_path` (when given).
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let need = |p: &Option<PathBuf>, what: &str| {
        p.clone().ok_or_else(|| CovaError::Config(format!("{what} path is not configured")))
    };
    let stream = read_stream(need(&cfg.stream_path, "stream")?)?;
    let scene = Scene::load_json(need(&cfg.scene_path, "scene")?)?;
    let model = match &cfg.model_path {
        Some(p) if p.exists() => BlobNetModel::load(p)?,
        _ if cfg.train_if_missing => {
            let (model, summary) = train_model(&scene, &stream, cfg)?;
            log::info!(
                "trained on {} samples from {} frames: loss {:.4} -> {:.4}",
                summary.samples,
                summary.labeled_frames,
                summary.log.initial_loss,
                summary.log.final_loss
            );
            if let Some(p) = &cfg.model_path {
                model.save(p)?;
            }
            model
        }
        Some(p) => return Err(CovaError::Config(format!("model {} not found and training is disabled", p.display()))),
        None => return Err(CovaError::Config("no model path configured and training is disabled".into())),
    };
    let out = run_pipeline_on(&scene, &stream, &model, cfg)?;
    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir)?;
        let path = analysis_path(dir, &cfg.video_id, &out.report.config_hash);
        write_analysis(&out.analysis, &cfg.video_id, &out.report.config_hash, &path)?;
        let report = serde_json::to_string_pretty(&out.report)?;
        fs::write(dir.join(format!("{}.report.json", cfg.video_id)), report)?;
    }
    Ok(out)
}
