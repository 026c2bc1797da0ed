//! Ground-truth backed stand-in for the object detector run on decoded anchor frames.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bbox::{iou, BBox};
use crate::error::{CovaError, Result};
use crate::scene::{derived_rng, mix_seed, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame_index: usize,
    pub bbox_px: BBox,
    pub label: String,
    /// IoU of the reported box with the true box, in `(0, 1]`.
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleNoise {
    pub miss_prob: f64,
    pub misclassify_prob: f64,
    /// Standard deviation of the per-coordinate box jitter, pixels.
    pub jitter_sigma: f64,
    /// Objects with a smaller area (px²) are missed twice as often.
    pub small_object_miss_area: f64,
    pub seed: u64,
}

impl Default for OracleNoise {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl OracleNoise {
    pub fn noiseless() -> Self {
        Self { miss_prob: 0.0, misclassify_prob: 0.0, jitter_sigma: 0.0, small_object_miss_area: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(CovaError::Config(format!("{name} must lie in [0, 1], got {p}")))
            }
        };
        prob("miss_prob", self.miss_prob)?;
        prob("misclassify_prob", self.misclassify_prob)?;
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(CovaError::Config(format!("jitter_sigma must be finite and >= 0, got {}", self.jitter_sigma)));
        }
        if self.small_object_miss_area.is_nan() || self.small_object_miss_area < 0.0 {
            return Err(CovaError::Config("small_object_miss_area must be >= 0".into()));
        }
        Ok(())
    }
}

const RNG_ORACLE: u64 = 3;

/// Detections for every object present at frame `t`, moving or static.
///
/// The outcome for an object depends only on `(noise.seed, t, object_id)`, so the
/// result for a frame does not depend on which other frames were queried.
pub fn detect(scene: &Scene, t: usize, noise: &OracleNoise) -> Result<Vec<Detection>> {
    if t >= scene.config.num_frames {
        return Err(CovaError::Bounds { index: t, len: scene.config.num_frames });
    }
    let (w, h) = (scene.config.width_px as f64, scene.config.height_px as f64);
    let labels = &scene.config.label_set;
    let mut out = Vec::new();
    for (obj, state) in scene.objects_at(t) {
        let mut rng = derived_rng(mix_seed(noise.seed, RNG_ORACLE, t as u64), obj.object_id as u64, 0);
        // every draw is made unconditionally so each decision uses a fixed slot of the stream
        let miss_draw: f64 = rng.random();
        let swap_draw: f64 = rng.random();
        let swap_pick = rng.random_range(0..labels.len().max(2) - 1);
        let jitter: [f64; 4] = if noise.jitter_sigma > 0.0 {
            let n = Normal::new(0.0, noise.jitter_sigma).expect("validated sigma");
            [n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng)]
        } else {
            [0.0; 4]
        };

        let truth = state.bbox;
        let mut p_miss = noise.miss_prob;
        if truth.area() < noise.small_object_miss_area {
            p_miss = (2.0 * p_miss).min(1.0);
        }
        if miss_draw < p_miss {
            continue;
        }

        let mut label = obj.label.clone();
        if swap_draw < noise.misclassify_prob && labels.len() > 1 {
            let others: Vec<&String> = labels.iter().filter(|l| **l != obj.label).collect();
            if !others.is_empty() {
                label = others[swap_pick % others.len()].clone();
            }
        }

        let (x0, y0) = (truth.x + jitter[0], truth.y + jitter[1]);
        let (x1, y1) = (truth.x1() + jitter[2], truth.y1() + jitter[3]);
        let bbox = BBox::new(x0.min(x1), y0.min(y1), (x1 - x0).abs(), (y1 - y0).abs()).clamp_to(w, h);
        let confidence = iou(&bbox, &truth).max(f64::EPSILON);
        out.push(Detection { frame_index: t, bbox_px: bbox, label, confidence });
    }
    Ok(out)
}

/// Detect on a batch of frames; equivalent to calling [`detect`] per frame.
pub fn detect_batch(scene: &Scene, frames: &[usize], noise: &OracleNoise) -> Result<Vec<Vec<Detection>>> {
    frames.iter().map(|&t| detect(scene, t, noise)).collect()
}
