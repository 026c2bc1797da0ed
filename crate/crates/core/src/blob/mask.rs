use serde::{Deserialize, Serialize};

use crate::meta::MB_SIZE;

/// Foreground pixels a macroblock needs before its target cell is set (25% of 256).
pub const TARGET_MIN_PIXELS: usize = MB_SIZE * MB_SIZE / 4;

/// Row-major binary grid, used both for pixel masks and macroblock bitmaps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bitmap {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }
}

/// Downsample a pixel foreground mask to the macroblock grid: a cell is set when at
/// least a quarter of its pixels are foreground. Partial edge blocks are dropped.
pub fn make_targets(mask: &Bitmap) -> Bitmap {
    let (gw, gh) = (mask.width / MB_SIZE, mask.height / MB_SIZE);
    Bitmap::from_fn(gw, gh, |cx, cy| {
        let mut n = 0;
        for y in cy * MB_SIZE..(cy + 1) * MB_SIZE {
            let row = &mask.bits[y * mask.width + cx * MB_SIZE..y * mask.width + (cx + 1) * MB_SIZE];
            n += row.iter().filter(|&&b| b).count();
        }
        n >= TARGET_MIN_PIXELS
    })
}

/// Binarise a probability map: a cell is set iff its probability is strictly above `theta`.
pub fn threshold_mask(probs: &[f64], width: usize, height: usize, theta: f64) -> Bitmap {
    debug_assert_eq!(probs.len(), width * height);
    Bitmap { width, height, bits: probs.iter().map(|&p| p > theta).collect() }
}
