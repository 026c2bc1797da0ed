use crate::blob::net::BlobNetModel;
use crate::error::{CovaError, Result};
use crate::meta::FrameMeta;

/// Motion vectors are divided by this many quarter-pixels and clipped to [-1, 1].
pub const MV_SCALE: f64 = 64.0;

/// Stacked per-macroblock features for `depth` consecutive frames.
///
/// `values` is laid out `[t][row][col][channel]` with channel 0 the embedding weight
/// of the macroblock's type/partition combination and channels 1, 2 the normalised
/// motion vector. `combos` keeps the raw combination indices so the embedding can be
/// re-applied (and trained) without rebuilding the tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub depth: usize,
    pub height: usize,
    pub width: usize,
    pub combos: Vec<u8>,
    pub values: Vec<f64>,
}

impl FeatureTensor {
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.depth, self.height, self.width, 3)
    }

    pub fn get(&self, t: usize, row: usize, col: usize, ch: usize) -> f64 {
        self.values[((t * self.height + row) * self.width + col) * 3 + ch]
    }

    /// Raw features without an embedding (channel 0 left at zero).
    pub fn from_window(window: &[&FrameMeta]) -> Result<Self> {
        let first = window.first().ok_or_else(|| CovaError::Shape("empty feature window".into()))?;
        let (h, w) = (first.mb_h, first.mb_w);
        if let Some(bad) = window.iter().find(|f| f.mb_h != h || f.mb_w != w || f.grid.len() != h * w) {
            return Err(CovaError::Shape(format!(
                "frame {} has a {}x{} grid, expected {}x{}",
                bad.frame_index, bad.mb_h, bad.mb_w, h, w
            )));
        }
        let n = window.len() * h * w;
        let mut combos = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n * 3);
        for f in window {
            for mb in &f.grid {
                combos.push(mb.combo_index);
                values.push(0.0);
                values.push((mb.mv.dx as f64 / MV_SCALE).clamp(-1.0, 1.0));
                values.push((mb.mv.dy as f64 / MV_SCALE).clamp(-1.0, 1.0));
            }
        }
        Ok(Self { depth: window.len(), height: h, width: w, combos, values })
    }

    pub fn apply_embedding(&mut self, embed: &[f64]) {
        for (i, &c) in self.combos.iter().enumerate() {
            self.values[i * 3] = embed[c as usize];
        }
    }
}

/// Build the network input for a window of `model.temporal_depth()` frames.
pub fn build_features(window: &[&FrameMeta], model: &BlobNetModel) -> Result<FeatureTensor> {
    if window.len() != model.temporal_depth() {
        return Err(CovaError::Shape(format!(
            "window of {} frames, model expects {}",
            window.len(),
            model.temporal_depth()
        )));
    }
    let mut x = FeatureTensor::from_window(window)?;
    x.apply_embedding(model.embedding());
    Ok(x)
}

/// Window ending at `t`: frames `t-depth+1 ..= t`, repeating frame 0 before the stream start.
pub fn window_at(frames: &[FrameMeta], t: usize, depth: usize) -> Vec<&FrameMeta> {
    (0..depth).map(|k| &frames[(t + k + 1).saturating_sub(depth)]).collect()
}
