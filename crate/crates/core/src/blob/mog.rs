//! Per-pixel mixture-of-Gaussians background subtraction (Stauffer–Grimson style).
//!
//! Only used offline to label the training prefix of a video: pixels that fit none of
//! the background-ranked components are foreground, which is exactly "something moved
//! here recently". Parked objects blend into the background by construction.

use serde::{Deserialize, Serialize};

use crate::blob::mask::Bitmap;
use crate::error::{CovaError, Result};
use crate::scene::GrayscaleFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MogParams {
    pub components: usize,
    /// Learning rate for weights, means and variances.
    pub alpha: f64,
    /// Cumulative weight that the background-ranked components must exceed.
    pub background_ratio: f64,
    /// Match radius in standard deviations.
    pub match_sigmas: f64,
    /// Variance of a freshly created component (intensities scaled to [0,1]).
    pub initial_variance: f64,
    pub variance_floor: f64,
    /// Weight given to a component that replaces the weakest one.
    pub initial_weight: f64,
}

impl Default for MogParams {
    fn default() -> Self {
        Self {
            components: 3,
            alpha: 0.02,
            background_ratio: 0.3,
            match_sigmas: 2.5,
            initial_variance: 0.001,
            variance_floor: 1e-4,
            initial_weight: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MogState {
    pub width: usize,
    pub height: usize,
    pub params: MogParams,
    /// `[pixel][component]`, intensities in [0,1].
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MogState {
    /// Start from a single frame: one component per pixel centred on it.
    pub fn new(first: &GrayscaleFrame, params: MogParams) -> Self {
        Self::from_background(first.width, first.height, first.data.iter().map(|&v| v as f64 / 255.0), params)
    }

    /// Start from the per-pixel temporal median of `frames`, which removes movers that
    /// are present in the very first frame.
    pub fn from_median(frames: &[GrayscaleFrame], params: MogParams) -> Result<Self> {
        let first = frames.first().ok_or_else(|| CovaError::Input("no frames for background init".into()))?;
        if frames.iter().any(|f| (f.width, f.height) != (first.width, first.height)) {
            return Err(CovaError::Shape("frames differ in size".into()));
        }
        let mut column = Vec::with_capacity(frames.len());
        let medians = (0..first.data.len()).map(|i| {
            column.clear();
            column.extend(frames.iter().map(|f| f.data[i]));
            column.sort_unstable();
            column[column.len() / 2] as f64 / 255.0
        });
        let medians: Vec<f64> = medians.collect();
        Ok(Self::from_background(first.width, first.height, medians.into_iter(), params))
    }

    fn from_background(width: usize, height: usize, bg: impl Iterator<Item = f64>, params: MogParams) -> Self {
        let k = params.components.max(1);
        let n = width * height;
        let mut means = vec![0.0; n * k];
        let mut weights = vec![0.0; n * k];
        for (i, v) in bg.enumerate() {
            means[i * k] = v;
            weights[i * k] = 1.0;
        }
        Self { width, height, params: MogParams { components: k, ..params }, means, variances: vec![params.initial_variance; n * k], weights }
    }

    /// Feed one frame: classify every pixel, then update the mixture.
    pub fn step(&mut self, frame: &GrayscaleFrame) -> Result<Bitmap> {
        if (frame.width, frame.height) != (self.width, self.height) {
            return Err(CovaError::Shape(format!(
                "frame {}x{} vs background model {}x{}",
                frame.width, frame.height, self.width, self.height
            )));
        }
        let p = self.params;
        let k = p.components;
        let mut mask = Bitmap::new(self.width, self.height);
        let mut order: Vec<usize> = (0..k).collect();
        for (i, &raw) in frame.data.iter().enumerate() {
            let x = raw as f64 / 255.0;
            let base = i * k;
            let (mu, var, w) = (
                &mut self.means[base..base + k],
                &mut self.variances[base..base + k],
                &mut self.weights[base..base + k],
            );

            // rank by w / sigma, strongest first
            order.sort_by(|&a, &b| {
                let ra = w[a] / var[a].sqrt();
                let rb = w[b] / var[b].sqrt();
                rb.total_cmp(&ra).then(a.cmp(&b))
            });
            let mut background = 0;
            let mut acc = 0.0;
            for &c in &order {
                background += 1;
                acc += w[c];
                if acc > p.background_ratio {
                    break;
                }
            }
            let matched = order
                .iter()
                .position(|&c| w[c] > 0.0 && (x - mu[c]).abs() <= p.match_sigmas * var[c].sqrt());

            match matched {
                Some(rank) => {
                    let c = order[rank];
                    for (j, wj) in w.iter_mut().enumerate() {
                        let hit = if j == c { 1.0 } else { 0.0 };
                        *wj = (1.0 - p.alpha) * *wj + p.alpha * hit;
                    }
                    let d = x - mu[c];
                    mu[c] += p.alpha * d;
                    var[c] = ((1.0 - p.alpha) * var[c] + p.alpha * d * d).max(p.variance_floor);
                    if rank >= background {
                        mask.bits[i] = true;
                    }
                }
                None => {
                    mask.bits[i] = true;
                    let weakest = *order.last().expect("at least one component");
                    for wj in w.iter_mut() {
                        *wj *= 1.0 - p.alpha;
                    }
                    mu[weakest] = x;
                    var[weakest] = p.initial_variance;
                    w[weakest] = p.initial_weight;
                }
            }
            let total: f64 = w.iter().sum();
            for wj in w.iter_mut() {
                *wj /= total;
            }
        }
        Ok(mask)
    }

    /// Largest deviation of any pixel's weight sum from one.
    pub fn max_weight_error(&self) -> f64 {
        self.weights
            .chunks(self.params.components)
            .map(|w| (w.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}
