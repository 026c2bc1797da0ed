//! Track-aware anchor-frame selection.
//!
//! For each GoP only tracks that end inside it and have no anchor yet are considered.
//! Frames are visited in order; every frame where a considered track starts becomes
//! the current candidate, and whenever a considered track ends the current candidate
//! is committed as an anchor together with its decode-dependency closure. Since the
//! candidate is always the latest start seen so far, it lies inside the span of every
//! track that ends while it is current, and it is the earliest such frame that is
//! still covered by all tracks alive at that point, so the decode chain stays short.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{CovaError, Result};
use crate::meta::{dependent_frames, Gop};
use crate::tracking::Track;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorPlan {
    pub gop_index: usize,
    /// Anchor frames (stream indices): the only frames sent to the detector.
    pub anchor_frames: BTreeSet<usize>,
    /// Frames that must be decoded: anchors plus their dependency closures.
    pub decode_frames: BTreeSet<usize>,
    /// Anchor that serves each track, by track id.
    pub assignments: BTreeMap<u64, usize>,
}

/// Choose anchors for one GoP and mark the served tracks as anchored.
pub fn select_anchors(gop: &Gop<'_>, tracks: &mut [Track]) -> Result<AnchorPlan> {
    let mut plan = AnchorPlan { gop_index: gop.gop_index, ..AnchorPlan::default() };
    if gop.is_empty() {
        return Ok(plan);
    }
    let (first, end) = (gop.start(), gop.end());

    let considered: Vec<usize> = tracks
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.anchor_assigned && (first..end).contains(&t.end_frame))
        .map(|(i, _)| i)
        .collect();
    if considered.is_empty() {
        return Ok(plan);
    }

    // a track that began in an earlier GoP is present from this GoP's first frame
    let mut starts: Vec<usize> = considered.iter().map(|&i| tracks[i].start_frame.max(first)).collect();
    starts.sort_unstable();
    let mut ends: Vec<(usize, usize)> = considered.iter().map(|&i| (tracks[i].end_frame, i)).collect();
    ends.sort_unstable();

    let (mut sidx, mut eidx) = (0, 0);
    let mut candidate: Option<usize> = None;
    for frame in gop.frames {
        let ts = frame.frame_index;
        while sidx < starts.len() && starts[sidx] == ts {
            candidate = Some(ts);
            sidx += 1;
        }
        while eidx < ends.len() && ends[eidx].0 == ts {
            let track = &mut tracks[ends[eidx].1];
            let anchor = candidate.ok_or_else(|| {
                CovaError::Invariant(format!("track {} ends at frame {ts} before any start event", track.track_id))
            })?;
            if anchor < track.start_frame {
                return Err(CovaError::Invariant(format!(
                    "anchor {anchor} precedes start {} of track {}",
                    track.start_frame, track.track_id
                )));
            }
            if plan.anchor_frames.insert(anchor) {
                let pos = anchor - first;
                plan.decode_frames.insert(anchor);
                plan.decode_frames.extend(dependent_frames(gop, pos)?.into_iter().map(|p| p + first));
            }
            plan.assignments.insert(track.track_id, anchor);
            track.anchor_assigned = true;
            eidx += 1;
        }
    }
    Ok(plan)
}

/// Run [`select_anchors`] over consecutive GoPs.
pub fn select_all(gops: &[Gop<'_>], tracks: &mut [Track]) -> Result<Vec<AnchorPlan>> {
    gops.iter().map(|g| select_anchors(g, tracks)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub total_frames: usize,
    pub decoded_frames: usize,
    pub anchor_frames: usize,
    pub decode_filtration_rate: f64,
    pub inference_filtration_rate: f64,
}

impl SelectionReport {
    /// Decode work reduction: total frames over decoded frames.
    pub fn effective_decode_speedup(&self) -> f64 {
        if self.decoded_frames == 0 {
            f64::INFINITY
        } else {
            self.total_frames as f64 / self.decoded_frames as f64
        }
    }
}

pub fn make_report(plans: &[AnchorPlan], total_frames: usize) -> SelectionReport {
    let decoded: BTreeSet<usize> = plans.iter().flat_map(|p| p.decode_frames.iter().copied()).collect();
    let anchors: BTreeSet<usize> = plans.iter().flat_map(|p| p.anchor_frames.iter().copied()).collect();
    let rate = |n: usize| if total_frames == 0 { 1.0 } else { 1.0 - n as f64 / total_frames as f64 };
    SelectionReport {
        total_frames,
        decoded_frames: decoded.len(),
        anchor_frames: anchors.len(),
        decode_filtration_rate: rate(decoded.len()),
        inference_filtration_rate: rate(anchors.len()),
    }
}
