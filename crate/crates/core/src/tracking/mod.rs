//! Blob extraction and multi-object tracking over macroblock bitmaps.

pub mod ccl;
pub mod hungarian;
pub mod kalman;
pub mod sort;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::error::{CovaError, Result};
use crate::meta::MB_SIZE;

pub use crate::bbox::iou;
pub use ccl::{connected_components, DEFAULT_MIN_CELLS};
pub use hungarian::{hungarian, Assignment};
pub use kalman::{KalmanBoxState, KalmanParams};
pub use sort::{SortParams, SortTracker};

/// Tight box around a component, in macroblock cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MbRect {
    pub col: usize,
    pub row: usize,
    pub cols: usize,
    pub rows: usize,
}

impl MbRect {
    pub fn to_px(&self) -> BBox {
        let s = MB_SIZE as f64;
        BBox::new(self.col as f64 * s, self.row as f64 * s, self.cols as f64 * s, self.rows as f64 * s)
    }
}

/// A connected region of moving macroblocks: an object candidate without a label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub frame_index: usize,
    pub bbox_mb: MbRect,
    pub bbox_px: BBox,
    pub cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dead,
}

/// A blob followed over consecutive frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub track_id: u64,
    pub status: TrackStatus,
    pub start_frame: usize,
    pub end_frame: usize,
    /// One box per frame in `start_frame..=end_frame`.
    pub boxes: Vec<BBox>,
    #[serde(default)]
    pub anchor_assigned: bool,
}

impl Track {
    pub fn bbox_at(&self, t: usize) -> Option<&BBox> {
        if t < self.start_frame || t > self.end_frame {
            return None;
        }
        self.boxes.get(t - self.start_frame)
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn contains(&self, t: usize) -> bool {
        (self.start_frame..=self.end_frame).contains(&t)
    }

    /// Gap-free and consistent with its frame range.
    pub fn is_well_formed(&self) -> bool {
        self.end_frame >= self.start_frame && self.boxes.len() == self.end_frame - self.start_frame + 1
    }
}

/// One JSON track per line.
pub fn write_tracks(tracks: &[Track], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for t in tracks {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_tracks(path: impl AsRef<Path>) -> Result<Vec<Track>> {
    let mut tracks = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Track = serde_json::from_str(&line).map_err(|e| CovaError::Input(format!("track line {}: {e}", i + 1)))?;
        if !t.is_well_formed() {
            return Err(CovaError::Input(format!("track {} on line {} has {} boxes for frames {}..={}", t.track_id, i + 1, t.boxes.len(), t.start_frame, t.end_frame)));
        }
        tracks.push(t);
    }
    Ok(tracks)
}
