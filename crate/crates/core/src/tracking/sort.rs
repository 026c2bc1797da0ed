//! SORT: Kalman prediction plus IoU-cost Hungarian association, frame by frame.

use serde::{Deserialize, Serialize};

use crate::bbox::{iou, BBox};
use crate::error::{CovaError, Result};
use crate::tracking::hungarian::hungarian;
use crate::tracking::kalman::{KalmanBoxState, KalmanParams};
use crate::tracking::{Blob, Track, TrackStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SortParams {
    /// Minimum IoU between a prediction and a blob for them to be associated.
    pub iou_min: f64,
    /// Frames a track may go unmatched before it is dropped.
    pub max_age: usize,
    /// Consecutive hits needed before a track is confirmed.
    pub min_hits: usize,
    #[serde(default)]
    pub kalman: KalmanParams,
}

impl Default for SortParams {
    fn default() -> Self {
        Self { iou_min: 0.3, max_age: 3, min_hits: 2, kalman: KalmanParams::default() }
    }
}

#[derive(Debug, Clone)]
struct LiveTrack {
    id: u64,
    kf: KalmanBoxState,
    first_frame: usize,
    /// One box per frame since `first_frame`: the blob box when matched, the prediction otherwise.
    boxes: Vec<BBox>,
    last_matched: usize,
    confirmed_at: Option<usize>,
}

impl LiveTrack {
    fn finish(mut self) -> Track {
        self.boxes.truncate(self.last_matched - self.first_frame + 1);
        let (start, status) = match self.confirmed_at {
            Some(c) => (c, TrackStatus::Confirmed),
            None => (self.first_frame, TrackStatus::Dead),
        };
        let boxes = self.boxes.split_off(start - self.first_frame);
        Track {
            track_id: self.id,
            status,
            start_frame: start,
            end_frame: self.last_matched,
            boxes,
            anchor_assigned: false,
        }
    }

    fn snapshot(&self) -> Track {
        let mut t = self.clone().finish();
        if self.confirmed_at.is_none() {
            t.status = TrackStatus::Tentative;
        }
        t
    }
}

/// Single-threaded SORT tracker for one chunk.
///
/// Finished tracks keep status [`TrackStatus::Confirmed`] when they were confirmed at
/// some point (their history then starts at the confirmation frame) and
/// [`TrackStatus::Dead`] when they died tentative.
#[derive(Debug, Clone)]
pub struct SortTracker {
    params: SortParams,
    live: Vec<LiveTrack>,
    finished: Vec<Track>,
    next_id: u64,
    last_frame: Option<usize>,
}

impl SortTracker {
    /// `id_base` namespaces track ids, e.g. per chunk.
    pub fn new(params: SortParams, id_base: u64) -> Self {
        Self { params, live: Vec::new(), finished: Vec::new(), next_id: id_base, last_frame: None }
    }

    pub fn params(&self) -> &SortParams {
        &self.params
    }

    /// Associate the blobs of frame `t` with the live tracks.
    pub fn step(&mut self, t: usize, blobs: &[Blob]) -> Result<()> {
        if let Some(last) = self.last_frame {
            if t <= last {
                return Err(CovaError::Sequencing { last, got: t });
            }
            // coast over skipped frames
            for _ in last + 1..t {
                self.predict_all();
                self.retire_stale();
            }
        }
        if let Some(b) = blobs.iter().find(|b| b.frame_index != t) {
            return Err(CovaError::Input(format!("blob from frame {} passed at frame {t}", b.frame_index)));
        }
        self.last_frame = Some(t);

        let predicted = self.predict_all();
        let cost: Vec<Vec<f64>> =
            predicted.iter().map(|p| blobs.iter().map(|b| 1.0 - iou(p, &b.bbox_px)).collect()).collect();
        let assignment = hungarian(&cost)?;

        let mut blob_matched = vec![false; blobs.len()];
        for &(ti, bi) in &assignment.pairs {
            if iou(&predicted[ti], &blobs[bi].bbox_px) < self.params.iou_min {
                continue;
            }
            blob_matched[bi] = true;
            let tr = &mut self.live[ti];
            let measured = blobs[bi].bbox_px;
            tr.kf.update(&measured);
            *tr.boxes.last_mut().expect("predict pushed a box") = measured;
            tr.last_matched = t;
            if tr.confirmed_at.is_none() && tr.kf.hit_streak >= self.params.min_hits {
                tr.confirmed_at = Some(t);
            }
        }

        for blob in blobs.iter().zip(&blob_matched).filter(|(_, &m)| !m).map(|(b, _)| b) {
            let kf = KalmanBoxState::new(&blob.bbox_px, self.params.kalman);
            let confirmed_at = (self.params.min_hits <= 1).then_some(t);
            self.live.push(LiveTrack {
                id: self.next_id,
                kf,
                first_frame: t,
                boxes: vec![blob.bbox_px],
                last_matched: t,
                confirmed_at,
            });
            self.next_id += 1;
        }
        self.retire_stale();
        Ok(())
    }

    fn predict_all(&mut self) -> Vec<BBox> {
        self.live
            .iter_mut()
            .map(|tr| {
                tr.kf.predict();
                let b = tr.kf.bbox();
                tr.boxes.push(b);
                b
            })
            .collect()
    }

    fn retire_stale(&mut self) {
        let max_age = self.params.max_age;
        let (stale, live): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.live).into_iter().partition(|tr| tr.kf.frames_since_update > max_age);
        self.live = live;
        self.finished.extend(stale.into_iter().map(LiveTrack::finish));
    }

    /// Current state of every live track.
    pub fn live_tracks(&self) -> Vec<Track> {
        self.live.iter().map(LiveTrack::snapshot).collect()
    }

    /// Tracks that have already ended.
    pub fn finished_tracks(&self) -> &[Track] {
        &self.finished
    }

    /// End every live track at its last matched frame and return all tracks sorted by id.
    pub fn finish(mut self) -> Vec<Track> {
        let live = std::mem::take(&mut self.live);
        self.finished.extend(live.into_iter().map(LiveTrack::finish));
        self.finished.sort_by_key(|t| t.track_id);
        self.finished
    }
}

/// Only tracks that were confirmed at some point.
pub fn confirmed(tracks: Vec<Track>) -> Vec<Track> {
    tracks.into_iter().filter(|t| t.status == TrackStatus::Confirmed).collect()
}
