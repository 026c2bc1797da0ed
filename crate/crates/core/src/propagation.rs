//! Label propagation: anchor detections are tied to tracks and their labels spread
//! over every frame of the track. Static objects, which never form blobs, are
//! recovered by chaining identical detections across consecutive anchors.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bbox::{iou, BBox};
use crate::error::{CovaError, Result};
use crate::oracle::Detection;
use crate::tracking::Track;

pub const UNKNOWN_LABEL: &str = "unknown";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Propagated,
    AnchorDetected,
    StaticMerged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzedObject {
    pub track_id: u64,
    pub label: String,
    pub bbox_px: BBox,
    pub source: Source,
}

/// Query-agnostic per-frame object list for a whole stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAnalysis {
    pub width_px: usize,
    pub height_px: usize,
    /// Entry `t` lists the objects of frame `t`.
    pub frames: Vec<Vec<AnalyzedObject>>,
}

impl FrameAnalysis {
    pub fn empty(num_frames: usize, width_px: usize, height_px: usize) -> Self {
        Self { width_px, height_px, frames: vec![Vec::new(); num_frames] }
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn push(&mut self, t: usize, obj: AnalyzedObject) -> Result<()> {
        let len = self.frames.len();
        self.frames.get_mut(t).ok_or(CovaError::Bounds { index: t, len })?.push(obj);
        Ok(())
    }

    /// Sort each frame's objects by `(track_id, source)` so equal content serializes identically.
    pub fn canonicalize(&mut self) {
        for objs in &mut self.frames {
            objs.sort_by(|a, b| a.track_id.cmp(&b.track_id).then(a.source.cmp(&b.source)));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationParams {
    /// Blob/detection pairs need an IoU strictly above this to be associated.
    pub iou_threshold: f64,
    /// Detections on consecutive anchors chain into a static object above this IoU.
    pub static_iou_threshold: f64,
    /// A detection counts as lying inside a blob when more than this fraction of it is covered.
    pub containment_threshold: f64,
    /// Drop unmatched tracks instead of emitting them as "unknown".
    pub drop_unknown: bool,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self { iou_threshold: 0.5, static_iou_threshold: 0.7, containment_threshold: 0.5, drop_unknown: false }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("iou_threshold", self.iou_threshold),
            ("static_iou_threshold", self.static_iou_threshold),
            ("containment_threshold", self.containment_threshold),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(CovaError::Config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Association {
    /// `(blob, detection, iou)` in the order they were matched.
    pub matches: Vec<(usize, usize, f64)>,
    pub unmatched_blobs: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Greedy matching by descending IoU; pairs at or below `iou_threshold` stay unmatched.
pub fn associate(blobs: &[BBox], detections: &[BBox], iou_threshold: f64) -> Association {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, b) in blobs.iter().enumerate() {
        for (j, d) in detections.iter().enumerate() {
            let v = iou(b, d);
            if v > iou_threshold {
                pairs.push((v, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut blob_used = vec![false; blobs.len()];
    let mut det_used = vec![false; detections.len()];
    let mut matches = Vec::new();
    for (v, i, j) in pairs {
        if !blob_used[i] && !det_used[j] {
            blob_used[i] = true;
            det_used[j] = true;
            matches.push((i, j, v));
        }
    }
    Association {
        matches,
        unmatched_blobs: (0..blobs.len()).filter(|&i| !blob_used[i]).collect(),
        unmatched_detections: (0..detections.len()).filter(|&j| !det_used[j]).collect(),
    }
}

/// Project `part` (given in the frame of `whole`) onto `target` proportionally.
fn project(part: &BBox, whole: &BBox, target: &BBox) -> BBox {
    let sx = if whole.w > 0.0 { target.w / whole.w } else { 0.0 };
    let sy = if whole.h > 0.0 { target.h / whole.h } else { 0.0 };
    BBox::new(target.x + (part.x - whole.x) * sx, target.y + (part.y - whole.y) * sy, part.w * sx, part.h * sy)
}

/// Split a track whose anchor-frame blob holds several detected objects.
///
/// Every detection is expressed relative to the blob box at `anchor_frame` and that
/// relative rectangle is re-applied to the blob box of every frame of the track.
/// Returns one box sequence per detection, or `None` with fewer than two detections.
pub fn split_blob(track: &Track, anchor_frame: usize, detections: &[BBox]) -> Option<Vec<Vec<BBox>>> {
    if detections.len() < 2 {
        return None;
    }
    let whole = *track.bbox_at(anchor_frame)?;
    Some(detections.iter().map(|d| track.boxes.iter().map(|b| project(d, &whole, b)).collect()).collect())
}

/// A track with the label taken from its anchor (or "unknown").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTrack {
    pub track_id: u64,
    /// Track this one came from; differs from `track_id` after a split.
    pub parent_id: u64,
    pub label: String,
    pub start_frame: usize,
    pub boxes: Vec<BBox>,
    pub anchor_frame: usize,
    /// Detection box on the anchor frame when the track was matched.
    pub anchor_box: Option<BBox>,
}

impl LabeledTrack {
    pub fn end_frame(&self) -> usize {
        self.start_frame + self.boxes.len() - 1
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelingStats {
    pub matched_tracks: usize,
    pub unknown_tracks: usize,
    pub split_tracks: usize,
    /// Tracks whose anchors disagree on the label; each track gets one anchor, so always 0.
    pub label_conflicts: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Labeling {
    pub tracks: Vec<LabeledTrack>,
    /// Anchor detections not explained by any track present on their frame.
    pub leftover: BTreeMap<usize, Vec<Detection>>,
    pub stats: LabelingStats,
}

/// Label every anchored track from the detections on its anchor frame.
///
/// `assignments` maps track ids to anchor frames; `detections` holds the oracle
/// output per anchor frame. Sub-tracks created by splits get ids from `next_id`.
pub fn label_tracks(
    tracks: &[Track],
    assignments: &BTreeMap<u64, usize>,
    detections: &BTreeMap<usize, Vec<Detection>>,
    params: &PropagationParams,
    next_id: &mut u64,
) -> Result<Labeling> {
    let mut out = Labeling::default();
    for (&anchor, dets) in detections {
        let present: Vec<&Track> = tracks.iter().filter(|t| t.contains(anchor)).collect();
        let mut served: Vec<&Track> =
            present.iter().copied().filter(|t| assignments.get(&t.track_id) == Some(&anchor)).collect();
        served.sort_by_key(|t| t.track_id);
        let det_boxes: Vec<BBox> = dets.iter().map(|d| d.bbox_px).collect();
        let mut det_taken = vec![false; dets.len()];

        // detections lying inside a served blob, each given to the blob covering it most
        let mut inside: Vec<Vec<usize>> = vec![Vec::new(); served.len()];
        for (j, d) in det_boxes.iter().enumerate() {
            let best = served
                .iter()
                .enumerate()
                .map(|(i, t)| (i, d.covered_by(t.bbox_at(anchor).expect("present"))))
                .filter(|&(_, c)| c > params.containment_threshold)
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            if let Some((i, _)) = best {
                inside[i].push(j);
            }
        }

        let mut remaining: Vec<&Track> = Vec::new();
        for (i, t) in served.iter().enumerate() {
            let parts: Vec<BBox> = inside[i].iter().map(|&j| det_boxes[j]).collect();
            match split_blob(t, anchor, &parts) {
                Some(seqs) => {
                    out.stats.split_tracks += 1;
                    for (&j, boxes) in inside[i].iter().zip(seqs) {
                        det_taken[j] = true;
                        out.tracks.push(LabeledTrack {
                            track_id: *next_id,
                            parent_id: t.track_id,
                            label: dets[j].label.clone(),
                            start_frame: t.start_frame,
                            boxes,
                            anchor_frame: anchor,
                            anchor_box: Some(det_boxes[j]),
                        });
                        *next_id += 1;
                        out.stats.matched_tracks += 1;
                    }
                }
                None => remaining.push(t),
            }
        }

        let free_dets: Vec<usize> = (0..dets.len()).filter(|&j| !det_taken[j]).collect();
        let blob_boxes: Vec<BBox> = remaining.iter().map(|t| *t.bbox_at(anchor).expect("present")).collect();
        let free_boxes: Vec<BBox> = free_dets.iter().map(|&j| det_boxes[j]).collect();
        let assoc = associate(&blob_boxes, &free_boxes, params.iou_threshold);
        let mut label_of: Vec<Option<usize>> = vec![None; remaining.len()];
        for &(i, k, _) in &assoc.matches {
            label_of[i] = Some(free_dets[k]);
            det_taken[free_dets[k]] = true;
        }
        for (i, t) in remaining.iter().enumerate() {
            let (label, anchor_box) = match label_of[i] {
                Some(j) => {
                    out.stats.matched_tracks += 1;
                    (dets[j].label.clone(), Some(det_boxes[j]))
                }
                None => {
                    out.stats.unknown_tracks += 1;
                    (UNKNOWN_LABEL.to_string(), None)
                }
            };
            out.tracks.push(LabeledTrack {
                track_id: t.track_id,
                parent_id: t.track_id,
                label,
                start_frame: t.start_frame,
                boxes: t.boxes.clone(),
                anchor_frame: anchor,
                anchor_box,
            });
        }

        // anything overlapping a present track is that track's object, not a static one
        let left: Vec<Detection> = dets
            .iter()
            .enumerate()
            .filter(|&(j, d)| {
                !det_taken[j]
                    && !present.iter().any(|t| {
                        let b = t.bbox_at(anchor).expect("present");
                        iou(b, &d.bbox_px) > params.iou_threshold
                            || d.bbox_px.covered_by(b) > params.containment_threshold
                    })
            })
            .map(|(_, d)| d.clone())
            .collect();
        out.leftover.insert(anchor, left);
    }

    for t in tracks {
        if !assignments.contains_key(&t.track_id) {
            return Err(CovaError::Invariant(format!("track {} has no anchor frame", t.track_id)));
        }
    }
    out.tracks.sort_by_key(|t| t.track_id);
    Ok(out)
}

/// Spread each track's label over its frames.
///
/// The anchor frame of a matched track carries the detection itself
/// (`anchor_detected`); every other frame carries the blob box (`propagated`).
pub fn propagate_labels(tracks: &[LabeledTrack], analysis: &mut FrameAnalysis, params: &PropagationParams) -> Result<()> {
    for tr in tracks {
        let known = tr.anchor_box.is_some();
        if !known && params.drop_unknown {
            continue;
        }
        for (k, b) in tr.boxes.iter().enumerate() {
            let t = tr.start_frame + k;
            let (bbox_px, source) = match tr.anchor_box {
                Some(d) if t == tr.anchor_frame => (d, Source::AnchorDetected),
                _ => (*b, Source::Propagated),
            };
            analysis.push(t, AnalyzedObject { track_id: tr.track_id, label: tr.label.clone(), bbox_px, source })?;
        }
    }
    Ok(())
}

/// A stationary object seen on consecutive anchor frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticTrack {
    pub track_id: u64,
    pub label: String,
    pub bbox_px: BBox,
    pub start_frame: usize,
    pub end_frame: usize,
}

/// Chain same-label detections with IoU above the static threshold across consecutive anchors.
///
/// Only chains that reach a second anchor become static tracks; each spans its first
/// to its last anchor and keeps the box of its first detection.
pub fn static_merge(detections: &BTreeMap<usize, Vec<Detection>>, iou_threshold: f64, next_id: &mut u64) -> Vec<StaticTrack> {
    struct Chain {
        label: String,
        first: BBox,
        last: BBox,
        start: usize,
        end: usize,
        anchors: usize,
    }
    let mut open: Vec<Chain> = Vec::new();
    let mut closed: Vec<Chain> = Vec::new();
    for (&t, dets) in detections {
        let chain_boxes: Vec<BBox> = open.iter().map(|c| c.last).collect();
        let det_boxes: Vec<BBox> = dets.iter().map(|d| d.bbox_px).collect();
        let assoc = associate(&chain_boxes, &det_boxes, iou_threshold);
        // label gate: a same-place detection with another label starts its own chain
        let mut extended: BTreeMap<usize, usize> =
            assoc.matches.iter().filter(|&&(c, d, _)| open[c].label == dets[d].label).map(|&(c, d, _)| (c, d)).collect();
        let mut starts_chain = vec![true; dets.len()];
        for &d in extended.values() {
            starts_chain[d] = false;
        }
        let mut next_open = Vec::new();
        for (c, chain) in open.into_iter().enumerate() {
            match extended.remove(&c) {
                Some(d) => next_open.push(Chain { last: det_boxes[d], end: t, anchors: chain.anchors + 1, ..chain }),
                None => closed.push(chain),
            }
        }
        for d in (0..dets.len()).filter(|&d| starts_chain[d]) {
            let (label, bx) = (dets[d].label.clone(), det_boxes[d]);
            next_open.push(Chain { label, first: bx, last: bx, start: t, end: t, anchors: 1 });
        }
        open = next_open;
    }
    closed.extend(open);
    closed.retain(|c| c.anchors >= 2);
    closed.sort_by(|a, b| a.start.cmp(&b.start).then(a.first.x.total_cmp(&b.first.x)).then(a.first.y.total_cmp(&b.first.y)));
    closed
        .into_iter()
        .map(|c| {
            let id = *next_id;
            *next_id += 1;
            StaticTrack { track_id: id, label: c.label, bbox_px: c.first, start_frame: c.start, end_frame: c.end }
        })
        .collect()
}

pub fn emit_static(tracks: &[StaticTrack], analysis: &mut FrameAnalysis) -> Result<()> {
    for s in tracks {
        for t in s.start_frame..=s.end_frame {
            analysis.push(
                t,
                AnalyzedObject { track_id: s.track_id, label: s.label.clone(), bbox_px: s.bbox_px, source: Source::StaticMerged },
            )?;
        }
    }
    Ok(())
}

pub const ANALYSIS_FORMAT: &str = "cova-analysis";
pub const ANALYSIS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisHeader {
    pub format: String,
    pub version: u32,
    pub video_id: String,
    pub config_hash: String,
    pub num_frames: usize,
    pub width_px: usize,
    pub height_px: usize,
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    frame: usize,
    objects: Vec<AnalyzedObject>,
}

/// Where the analysis of `video_id` under `config_hash` lives inside `dir`.
pub fn analysis_path(dir: impl AsRef<Path>, video_id: &str, config_hash: &str) -> PathBuf {
    let short = &config_hash[..config_hash.len().min(16)];
    dir.as_ref().join(format!("{video_id}.{short}.analysis.jsonl"))
}

pub fn write_analysis_to<W: Write>(analysis: &FrameAnalysis, video_id: &str, config_hash: &str, mut out: W) -> Result<()> {
    let header = AnalysisHeader {
        format: ANALYSIS_FORMAT.into(),
        version: ANALYSIS_VERSION,
        video_id: video_id.into(),
        config_hash: config_hash.into(),
        num_frames: analysis.num_frames(),
        width_px: analysis.width_px,
        height_px: analysis.height_px,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for (frame, objects) in analysis.frames.iter().enumerate() {
        serde_json::to_writer(&mut out, &FrameRecord { frame, objects: objects.clone() })?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_analysis(analysis: &FrameAnalysis, video_id: &str, config_hash: &str, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_analysis_to(analysis, video_id, config_hash, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_analysis_from<R: BufRead>(input: R) -> Result<(AnalysisHeader, FrameAnalysis)> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| CovaError::Header("empty analysis file".into()))??;
    let header: AnalysisHeader =
        serde_json::from_str(&first).map_err(|e| CovaError::Header(format!("bad analysis header: {e}")))?;
    if header.format != ANALYSIS_FORMAT || header.version != ANALYSIS_VERSION {
        return Err(CovaError::Header(format!("unsupported analysis format {} v{}", header.format, header.version)));
    }
    let mut analysis = FrameAnalysis::empty(0, header.width_px, header.height_px);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let expected = analysis.frames.len();
        let rec: FrameRecord = serde_json::from_str(&line)
            .map_err(|e| CovaError::Parse { frame: expected, msg: format!("malformed record: {e}") })?;
        if rec.frame != expected {
            return Err(CovaError::Parse { frame: expected, msg: format!("gap at index {expected}, found {}", rec.frame) });
        }
        analysis.frames.push(rec.objects);
    }
    if analysis.frames.len() != header.num_frames {
        return Err(CovaError::Parse {
            frame: analysis.frames.len(),
            msg: format!("expected {} frames, found {}", header.num_frames, analysis.frames.len()),
        });
    }
    Ok((header, analysis))
}

pub fn read_analysis(path: impl AsRef<Path>) -> Result<(AnalysisHeader, FrameAnalysis)> {
    read_analysis_from(BufReader::new(File::open(path)?))
}
