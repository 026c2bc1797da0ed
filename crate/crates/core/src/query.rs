//! Queries over a persisted [`FrameAnalysis`] and their evaluation against ground truth.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::error::{CovaError, Result};
use crate::propagation::{AnalyzedObject, FrameAnalysis, Source};
use crate::scene::Scene;

/// Rectangle in normalized frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Region {
    pub const FULL: Region = Region { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 };
    pub const UPPER_LEFT: Region = Region { x0: 0.0, y0: 0.0, x1: 0.5, y1: 0.5 };
    pub const UPPER_RIGHT: Region = Region { x0: 0.5, y0: 0.0, x1: 1.0, y1: 0.5 };
    pub const LOWER_LEFT: Region = Region { x0: 0.0, y0: 0.5, x1: 0.5, y1: 1.0 };
    pub const LOWER_RIGHT: Region = Region { x0: 0.5, y0: 0.5, x1: 1.0, y1: 1.0 };

    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let r = Region { x0, y0, x1, y1 };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if [self.x0, self.y0, self.x1, self.y1].into_iter().all(unit) && self.x0 < self.x1 && self.y0 < self.y1 {
            Ok(())
        } else {
            Err(CovaError::Config(format!("invalid region {self}")))
        }
    }

    /// Whether the centre of `b` lies in the region of a `width x height` frame.
    pub fn contains_center(&self, b: &BBox, width: usize, height: usize) -> bool {
        let (cx, cy) = b.center();
        let (nx, ny) = (cx / width as f64, cy / height as f64);
        self.x0 <= nx && nx <= self.x1 && self.y0 <= ny && ny <= self.y1
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x0, self.y0, self.x1, self.y1)
    }
}

impl FromStr for Region {
    type Err = CovaError;

    /// A preset name (`upper-left`, `lower-right`, `full`, ...) or `x0,y0,x1,y1`.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "full" => return Ok(Region::FULL),
            "upper-left" => return Ok(Region::UPPER_LEFT),
            "upper-right" => return Ok(Region::UPPER_RIGHT),
            "lower-left" => return Ok(Region::LOWER_LEFT),
            "lower-right" => return Ok(Region::LOWER_RIGHT),
            _ => {}
        }
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| CovaError::Config(format!("unknown region {s:?}")))?;
        match parts[..] {
            [x0, y0, x1, y1] => Region::new(x0, y0, x1, y1),
            _ => Err(CovaError::Config(format!("region {s:?} needs four coordinates"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Bp,
    Cnt,
    Lbp,
    Lcnt,
}

impl QueryKind {
    pub fn is_local(self) -> bool {
        matches!(self, QueryKind::Lbp | QueryKind::Lcnt)
    }

    pub fn is_count(self) -> bool {
        matches!(self, QueryKind::Cnt | QueryKind::Lcnt)
    }
}

impl FromStr for QueryKind {
    type Err = CovaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bp" => Ok(QueryKind::Bp),
            "cnt" => Ok(QueryKind::Cnt),
            "lbp" => Ok(QueryKind::Lbp),
            "lcnt" => Ok(QueryKind::Lcnt),
            _ => Err(CovaError::Config(format!("unknown query kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub kind: QueryKind,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
}

impl Query {
    pub fn global(kind: QueryKind, label: &str) -> Self {
        Self { kind, label: label.into(), region: None }
    }

    pub fn local(kind: QueryKind, label: &str, region: Region) -> Self {
        Self { kind, label: label.into(), region: Some(region) }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind.is_local(), &self.region) {
            (true, Some(r)) => r.validate(),
            (false, None) => Ok(()),
            (true, None) => Err(CovaError::Config(format!("{:?} query needs a region", self.kind))),
            (false, Some(_)) => Err(CovaError::Config(format!("{:?} query takes no region", self.kind))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryResult {
    /// Frames where the object appears.
    Frames(BTreeSet<usize>),
    /// Mean number of matching objects per frame.
    Count(f64),
}

fn matches(q: &Query, o: &AnalyzedObject, width: usize, height: usize) -> bool {
    o.label == q.label && q.region.as_ref().is_none_or(|r| r.contains_center(&o.bbox_px, width, height))
}

pub fn run_query(analysis: &FrameAnalysis, q: &Query) -> Result<QueryResult> {
    q.validate()?;
    let (w, h) = (analysis.width_px, analysis.height_px);
    let per_frame: Vec<usize> =
        analysis.frames.iter().map(|objs| objs.iter().filter(|o| matches(q, o, w, h)).count()).collect();
    if !analysis.frames.iter().flatten().any(|o| o.label == q.label) {
        log::warn!("label {:?} does not occur in the analysis", q.label);
    }
    Ok(if q.kind.is_count() {
        let n = per_frame.len();
        QueryResult::Count(if n == 0 { 0.0 } else { per_frame.iter().sum::<usize>() as f64 / n as f64 })
    } else {
        QueryResult::Frames(per_frame.iter().enumerate().filter(|(_, &c)| c > 0).map(|(t, _)| t).collect())
    })
}

/// Accuracy for frame results, absolute error for counts.
pub fn metric(result: &QueryResult, truth: &QueryResult, total_frames: usize) -> Result<f64> {
    match (result, truth) {
        (QueryResult::Frames(got), QueryResult::Frames(want)) => {
            if total_frames == 0 {
                return Err(CovaError::Evaluation("no frames to evaluate".into()));
            }
            if got.iter().chain(want).any(|&t| t >= total_frames) {
                return Err(CovaError::Evaluation(format!("frame index beyond {total_frames} frames")));
            }
            let wrong = got.symmetric_difference(want).count();
            Ok((total_frames - wrong) as f64 / total_frames as f64)
        }
        (QueryResult::Count(got), QueryResult::Count(want)) => Ok((got - want).abs()),
        _ => Err(CovaError::Evaluation("result and ground truth are of different kinds".into())),
    }
}

/// Run `q` on both analyses and score the first against the second.
pub fn evaluate(analysis: &FrameAnalysis, truth: &FrameAnalysis, q: &Query) -> Result<f64> {
    if analysis.num_frames() != truth.num_frames() {
        return Err(CovaError::Evaluation(format!(
            "analysis covers {} frames, ground truth {}",
            analysis.num_frames(),
            truth.num_frames()
        )));
    }
    metric(&run_query(analysis, q)?, &run_query(truth, q)?, truth.num_frames())
}

/// Every scene object on every frame it is present, as an analysis.
pub fn ground_truth(scene: &Scene) -> FrameAnalysis {
    let c = &scene.config;
    let mut fa = FrameAnalysis::empty(c.num_frames, c.width_px, c.height_px);
    for o in &scene.objects {
        for (k, s) in o.states.iter().enumerate() {
            fa.frames[o.first_frame + k].push(AnalyzedObject {
                track_id: o.object_id as u64,
                label: o.label.clone(),
                bbox_px: s.bbox,
                source: Source::AnchorDetected,
            });
        }
    }
    fa
}
