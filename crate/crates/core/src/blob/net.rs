//! BlobNet-lite: a two-level encoder/decoder that maps stacked macroblock features
//! to a per-macroblock motion logit.
//!
//! ```text
//! input (3T) ─conv─tanh─► e1 (8) ──────────────────────────────┐ skip
//!                          └pool─► p1 ─conv─tanh─► e2 (16) ──┐ │ skip
//!                                           └pool─► p2 (16)  │ │
//!                     up(p2) ++ e2 ─conv─tanh─► d1 (16) ◄────┘ │
//!                     up(d1) ++ e1 ─conv─tanh─► d2 (8)  ◄──────┘
//!                     1x1 conv ─► logit
//! ```
//!
//! Downsampling is a ceil-mode 2x2 average pool and upsampling is nearest-neighbour
//! cropped to the skip's size, so any grid size round-trips. Everything is `f64`
//! with hand-written backward passes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blob::features::FeatureTensor;
use crate::blob::mask::Bitmap;
use crate::error::{CovaError, Result};
use crate::meta::NUM_COMBOS;

pub const ENC1: usize = 8;
pub const ENC2: usize = 16;
const CHECKPOINT_MAGIC: &[u8; 8] = b"COVABNL\0";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub temporal_depth: usize,
    /// Probability above which a cell counts as moving.
    pub threshold: f64,
    /// Leading fraction of the video used to harvest training labels.
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 25,
            batch_size: 8,
            temporal_depth: 2,
            threshold: 0.5,
            train_fraction: 0.03,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CovaError::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.temporal_depth == 0 {
            return bad("batch_size and temporal_depth must be at least 1");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0,1)");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return bad("train_fraction must lie in (0,1]");
        }
        Ok(())
    }
}

/// Offsets of each parameter group inside the flat parameter vector.
#[derive(Debug, Clone)]
struct Layout {
    embed: Range<usize>,
    conv_a: (Range<usize>, Range<usize>),
    conv_b: (Range<usize>, Range<usize>),
    conv_c: (Range<usize>, Range<usize>),
    conv_d: (Range<usize>, Range<usize>),
    head: (Range<usize>, Range<usize>),
    total: usize,
}

impl Layout {
    fn new(depth: usize) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let cin = 3 * depth;
        let embed = take(NUM_COMBOS);
        let conv_a = (take(ENC1 * cin * 9), take(ENC1));
        let conv_b = (take(ENC2 * ENC1 * 9), take(ENC2));
        let conv_c = (take(ENC2 * 2 * ENC2 * 9), take(ENC2));
        let conv_d = (take(ENC1 * (ENC2 + ENC1) * 9), take(ENC1));
        let head = (take(ENC1), take(1));
        Self { embed, conv_a, conv_b, conv_c, conv_d, head, total: at }
    }

    fn shapes(&self, depth: usize) -> Vec<(String, Vec<usize>)> {
        vec![
            ("embed".into(), vec![NUM_COMBOS]),
            ("conv_a.weight".into(), vec![ENC1, 3 * depth, 3, 3]),
            ("conv_a.bias".into(), vec![ENC1]),
            ("conv_b.weight".into(), vec![ENC2, ENC1, 3, 3]),
            ("conv_b.bias".into(), vec![ENC2]),
            ("conv_c.weight".into(), vec![ENC2, 2 * ENC2, 3, 3]),
            ("conv_c.bias".into(), vec![ENC2]),
            ("conv_d.weight".into(), vec![ENC1, ENC2 + ENC1, 3, 3]),
            ("conv_d.bias".into(), vec![ENC1]),
            ("head.weight".into(), vec![ENC1]),
            ("head.bias".into(), vec![1]),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlobNetModel {
    depth: usize,
    params: Vec<f64>,
}

impl BlobNetModel {
    /// All-zero model; every output is exactly 0.5.
    pub fn zeros(temporal_depth: usize) -> Self {
        let n = Layout::new(temporal_depth).total;
        Self { depth: temporal_depth, params: vec![0.0; n] }
    }

    /// Glorot-uniform convolution weights, zero biases, small random embedding.
    pub fn init(temporal_depth: usize, seed: u64) -> Self {
        let layout = Layout::new(temporal_depth);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; layout.total];
        for v in &mut params[layout.embed.clone()] {
            *v = rng.random_range(-0.5..0.5);
        }
        let cin = 3 * temporal_depth;
        let convs = [
            (&layout.conv_a.0, cin, ENC1),
            (&layout.conv_b.0, ENC1, ENC2),
            (&layout.conv_c.0, 2 * ENC2, ENC2),
            (&layout.conv_d.0, ENC2 + ENC1, ENC1),
        ];
        for (r, fan_in, fan_out) in convs {
            let a = (6.0 / ((fan_in + fan_out) * 9) as f64).sqrt();
            for v in &mut params[r.clone()] {
                *v = rng.random_range(-a..a);
            }
        }
        let a = (6.0 / (ENC1 + 1) as f64).sqrt();
        for v in &mut params[layout.head.0.clone()] {
            *v = rng.random_range(-a..a);
        }
        Self { depth: temporal_depth, params }
    }

    pub fn temporal_depth(&self) -> usize {
        self.depth
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn embedding(&self) -> &[f64] {
        &self.params[..NUM_COMBOS]
    }

    pub fn embedding_mut(&mut self) -> &mut [f64] {
        &mut self.params[..NUM_COMBOS]
    }

    /// Named parameter groups as (name, flat range) pairs, in storage order.
    pub fn param_groups(&self) -> Vec<(String, Range<usize>)> {
        let l = Layout::new(self.depth);
        let ranges = [
            l.embed.clone(),
            l.conv_a.0.clone(),
            l.conv_a.1.clone(),
            l.conv_b.0.clone(),
            l.conv_b.1.clone(),
            l.conv_c.0.clone(),
            l.conv_c.1.clone(),
            l.conv_d.0.clone(),
            l.conv_d.1.clone(),
            l.head.0.clone(),
            l.head.1.clone(),
        ];
        l.shapes(self.depth).into_iter().map(|(n, _)| n).zip(ranges).collect()
    }

    fn check_input(&self, x: &FeatureTensor) -> Result<()> {
        if x.depth != self.depth {
            return Err(CovaError::Shape(format!("input depth {} but model depth {}", x.depth, self.depth)));
        }
        if x.height == 0 || x.width == 0 || x.combos.len() != x.depth * x.height * x.width {
            return Err(CovaError::Shape("malformed feature tensor".into()));
        }
        Ok(())
    }

    /// Per-cell logits, row-major `height x width`.
    pub fn logits(&self, x: &FeatureTensor) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward(x).logits.d)
    }

    fn forward(&self, x: &FeatureTensor) -> Cache {
        let l = Layout::new(self.depth);
        let p = &self.params;
        let input = input_map(x, &p[l.embed.clone()]);
        let (h, w) = (input.h, input.w);
        let mut e1 = conv3x3(&input, &p[l.conv_a.0.clone()], &p[l.conv_a.1.clone()]);
        tanh_inplace(&mut e1);
        let p1 = pool2(&e1);
        let mut e2 = conv3x3(&p1, &p[l.conv_b.0.clone()], &p[l.conv_b.1.clone()]);
        tanh_inplace(&mut e2);
        let p2 = pool2(&e2);
        let cat1 = concat(&upsample(&p2, e2.h, e2.w), &e2);
        let mut d1 = conv3x3(&cat1, &p[l.conv_c.0.clone()], &p[l.conv_c.1.clone()]);
        tanh_inplace(&mut d1);
        let cat2 = concat(&upsample(&d1, h, w), &e1);
        let mut d2 = conv3x3(&cat2, &p[l.conv_d.0.clone()], &p[l.conv_d.1.clone()]);
        tanh_inplace(&mut d2);
        let logits = conv1x1(&d2, &p[l.head.0.clone()], p[l.head.1.start]);
        Cache { input, e1, p1, e2, cat1, d1, cat2, d2, logits }
    }

    /// Gradient of `sum(dloss/dlogit * logit)` with respect to every parameter,
    /// accumulated into `grad`.
    fn backward(&self, x: &FeatureTensor, cache: &Cache, glogits: &[f64], grad: &mut [f64]) {
        let l = Layout::new(self.depth);
        let p = &self.params;
        let Cache { input, e1, p1, e2, cat1, d1, cat2, d2, .. } = cache;
        let (h, w) = (input.h, input.w);

        // head
        let mut gd2 = Map::zeros(ENC1, h, w);
        {
            let hw = &p[l.head.0.clone()];
            let hw_start = l.head.0.start;
            let plane = h * w;
            for (i, &g) in glogits.iter().enumerate() {
                grad[l.head.1.start] += g;
                for c in 0..ENC1 {
                    grad[hw_start + c] += g * d2.d[c * plane + i];
                    gd2.d[c * plane + i] = g * hw[c];
                }
            }
        }
        tanh_backward(&mut gd2, d2);
        let mut gcat2 = Map::zeros(cat2.c, h, w);
        conv3x3_backward(cat2, &p[l.conv_d.0.clone()], &gd2, Some(&mut gcat2), grad, &l.conv_d);
        let (gu2, ge1_skip) = split(&gcat2, ENC2);
        let mut gd1 = upsample_backward(&gu2, d1.h, d1.w);
        tanh_backward(&mut gd1, d1);
        let mut gcat1 = Map::zeros(cat1.c, cat1.h, cat1.w);
        conv3x3_backward(cat1, &p[l.conv_c.0.clone()], &gd1, Some(&mut gcat1), grad, &l.conv_c);
        let (gu1, ge2_skip) = split(&gcat1, ENC2);
        let gp2 = upsample_backward(&gu1, e2.h.div_ceil(2), e2.w.div_ceil(2));
        let mut ge2 = pool2_backward(&gp2, e2.h, e2.w);
        add_assign(&mut ge2, &ge2_skip);
        tanh_backward(&mut ge2, e2);
        let mut gp1 = Map::zeros(p1.c, p1.h, p1.w);
        conv3x3_backward(p1, &p[l.conv_b.0.clone()], &ge2, Some(&mut gp1), grad, &l.conv_b);
        let mut ge1 = pool2_backward(&gp1, h, w);
        add_assign(&mut ge1, &ge1_skip);
        tanh_backward(&mut ge1, e1);
        let mut ginput = Map::zeros(input.c, h, w);
        conv3x3_backward(input, &p[l.conv_a.0.clone()], &ge1, Some(&mut ginput), grad, &l.conv_a);

        // embedding: channel 3t of the input is embed[combo(t, cell)]
        let plane = h * w;
        for t in 0..x.depth {
            for cell in 0..plane {
                let combo = x.combos[t * plane + cell] as usize;
                grad[l.embed.start + combo] += ginput.d[3 * t * plane + cell];
            }
        }
    }

    /// Mean binary cross-entropy of one sample and its parameter gradient (accumulated
    /// into `grad` after multiplying by `scale`).
    fn loss_and_grad(&self, x: &FeatureTensor, target: &Bitmap, scale: f64, grad: &mut [f64]) -> f64 {
        let cache = self.forward(x);
        let n = cache.logits.d.len() as f64;
        let mut loss = 0.0;
        let glogits: Vec<f64> = cache
            .logits
            .d
            .iter()
            .zip(&target.bits)
            .map(|(&z, &y)| {
                let y = if y { 1.0 } else { 0.0 };
                loss += bce_with_logits(z, y);
                scale * (sigmoid(z) - y) / n
            })
            .collect();
        self.backward(x, &cache, &glogits, grad);
        loss / n
    }

    /// Mean binary cross-entropy over a dataset.
    pub fn loss(&self, data: &[(FeatureTensor, Bitmap)]) -> Result<f64> {
        if data.is_empty() {
            return Err(CovaError::Input("empty dataset".into()));
        }
        let mut total = 0.0;
        for (x, y) in data {
            check_pair(self, x, y)?;
            let z = self.forward(x).logits.d;
            total += z.iter().zip(&y.bits).map(|(&z, &y)| bce_with_logits(z, y as u8 as f64)).sum::<f64>() / z.len() as f64;
        }
        Ok(total / data.len() as f64)
    }

    /// Analytic gradient of [`Self::loss`] over `data`.
    pub fn gradient(&self, data: &[(FeatureTensor, Bitmap)]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.params.len()];
        let scale = 1.0 / data.len() as f64;
        for (x, y) in data {
            check_pair(self, x, y)?;
            self.loss_and_grad(x, y, scale, &mut grad);
        }
        Ok(grad)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let layout = Layout::new(self.depth);
        let header = CheckpointHeader {
            arch: "blobnet-lite".into(),
            version: CHECKPOINT_VERSION,
            temporal_depth: self.depth,
            channels: [ENC1, ENC2],
            param_count: self.params.len(),
            shapes: layout.shapes(self.depth),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u32).to_le_bytes())?;
        w.write_all(&json)?;
        for v in &self.params {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let bad = |m: String| CovaError::Header(format!("model checkpoint: {m}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(bad("bad magic".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        r.read_exact(&mut word)?;
        let mut json = vec![0u8; u32::from_le_bytes(word) as usize];
        r.read_exact(&mut json)?;
        let header: CheckpointHeader = serde_json::from_slice(&json).map_err(|e| bad(e.to_string()))?;
        let layout = Layout::new(header.temporal_depth);
        if header.arch != "blobnet-lite"
            || header.channels != [ENC1, ENC2]
            || header.param_count != layout.total
            || header.shapes != layout.shapes(header.temporal_depth)
        {
            return Err(bad("architecture does not match this build".into()));
        }
        let mut params = Vec::with_capacity(layout.total);
        let mut buf = [0u8; 8];
        for _ in 0..layout.total {
            r.read_exact(&mut buf)?;
            params.push(f64::from_le_bytes(buf));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite parameter".into()));
        }
        Ok(Self { depth: header.temporal_depth, params })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    arch: String,
    version: u32,
    temporal_depth: usize,
    channels: [usize; 2],
    param_count: usize,
    shapes: Vec<(String, Vec<usize>)>,
}

fn check_pair(model: &BlobNetModel, x: &FeatureTensor, y: &Bitmap) -> Result<()> {
    model.check_input(x)?;
    if (y.width, y.height) != (x.width, x.height) {
        return Err(CovaError::Shape(format!(
            "target {}x{} vs input {}x{}",
            y.width, y.height, x.width, x.height
        )));
    }
    Ok(())
}

/// Per-cell probabilities (sigmoid of the logits), row-major.
pub fn blobnet_forward(model: &BlobNetModel, x: &FeatureTensor) -> Result<Vec<f64>> {
    Ok(model.logits(x)?.into_iter().map(sigmoid).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

/// Mini-batch Adam on mean binary cross-entropy, embedding trained jointly.
pub fn blobnet_train(
    model: &BlobNetModel,
    data: &[(FeatureTensor, Bitmap)],
    cfg: &TrainConfig,
) -> Result<(BlobNetModel, TrainLog)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(CovaError::Input("training set is empty".into()));
    }
    for (x, y) in data {
        check_pair(model, x, y)?;
    }
    let initial_loss = model.loss(data)?;
    let mut model = model.clone();
    let mut adam = Adam::new(model.params.len(), cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; model.params.len()];
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut steps = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.fill(0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (x, y) = &data[i];
                epoch_loss += model.loss_and_grad(x, y, scale, &mut grad);
            }
            adam.step(&mut model.params, &grad);
            steps += 1;
        }
        let epoch_loss = epoch_loss / data.len() as f64;
        if !epoch_loss.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(CovaError::Divergence { epoch, loss: epoch_loss });
        }
        log::debug!("blobnet epoch {epoch}: loss {epoch_loss:.5}");
        epoch_losses.push(epoch_loss);
    }
    let final_loss = model.loss(data)?;
    Ok((model, TrainLog { initial_loss, final_loss, epoch_losses, steps }))
}

struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self { lr, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn bce_with_logits(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

struct Cache {
    input: Map,
    e1: Map,
    p1: Map,
    e2: Map,
    cat1: Map,
    d1: Map,
    cat2: Map,
    d2: Map,
    logits: Map,
}

/// Channel-major feature map.
#[derive(Debug, Clone)]
struct Map {
    c: usize,
    h: usize,
    w: usize,
    d: Vec<f64>,
}

impl Map {
    fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w, d: vec![0.0; c * h * w] }
    }

    fn plane(&self, c: usize) -> &[f64] {
        let n = self.h * self.w;
        &self.d[c * n..(c + 1) * n]
    }
}

fn input_map(x: &FeatureTensor, embed: &[f64]) -> Map {
    let (h, w) = (x.height, x.width);
    let plane = h * w;
    let mut m = Map::zeros(3 * x.depth, h, w);
    for t in 0..x.depth {
        for cell in 0..plane {
            let src = (t * plane + cell) * 3;
            m.d[3 * t * plane + cell] = embed[x.combos[t * plane + cell] as usize];
            m.d[(3 * t + 1) * plane + cell] = x.values[src + 1];
            m.d[(3 * t + 2) * plane + cell] = x.values[src + 2];
        }
    }
    m
}

/// Valid output column range and source offset for a kernel tap shifted by `d`.
#[inline]
fn tap_range(len: usize, d: isize) -> Range<usize> {
    let lo = (-d).max(0) as usize;
    let hi = (len as isize - d).min(len as isize).max(0) as usize;
    lo..hi.max(lo)
}

/// 3x3 convolution, stride 1, zero padding 1. Weights are `[cout][cin][3][3]`.
fn conv3x3(x: &Map, weight: &[f64], bias: &[f64]) -> Map {
    let cout = bias.len();
    let (cin, h, w) = (x.c, x.h, x.w);
    let mut out = Map::zeros(cout, h, w);
    let plane = h * w;
    for co in 0..cout {
        let o = &mut out.d[co * plane..(co + 1) * plane];
        o.fill(bias[co]);
        for ci in 0..cin {
            let inp = x.plane(ci);
            for ky in 0..3 {
                let dy = ky as isize - 1;
                let rows = tap_range(h, dy);
                for kx in 0..3 {
                    let dx = kx as isize - 1;
                    let wt = weight[((co * cin + ci) * 3 + ky) * 3 + kx];
                    let cols = tap_range(w, dx);
                    for y in rows.clone() {
                        let sy = (y as isize + dy) as usize;
                        let orow = &mut o[y * w + cols.start..y * w + cols.end];
                        let s0 = (cols.start as isize + dx) as usize;
                        let irow = &inp[sy * w + s0..sy * w + s0 + orow.len()];
                        for (ov, iv) in orow.iter_mut().zip(irow) {
                            *ov += wt * iv;
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv3x3_backward(
    x: &Map,
    weight: &[f64],
    gout: &Map,
    mut gx: Option<&mut Map>,
    grad: &mut [f64],
    ranges: &(Range<usize>, Range<usize>),
) {
    let cout = gout.c;
    let (cin, h, w) = (x.c, x.h, x.w);
    let plane = h * w;
    for co in 0..cout {
        let g = gout.plane(co);
        grad[ranges.1.start + co] += g.iter().sum::<f64>();
        for ci in 0..cin {
            let inp = x.plane(ci);
            for ky in 0..3 {
                let dy = ky as isize - 1;
                let rows = tap_range(h, dy);
                for kx in 0..3 {
                    let dx = kx as isize - 1;
                    let widx = ((co * cin + ci) * 3 + ky) * 3 + kx;
                    let wt = weight[widx];
                    let cols = tap_range(w, dx);
                    let mut gw = 0.0;
                    for y in rows.clone() {
                        let sy = (y as isize + dy) as usize;
                        let s0 = (cols.start as isize + dx) as usize;
                        let n = cols.len();
                        let grow = &g[y * w + cols.start..y * w + cols.start + n];
                        let irow = &inp[sy * w + s0..sy * w + s0 + n];
                        gw += grow.iter().zip(irow).map(|(a, b)| a * b).sum::<f64>();
                        if let Some(gx) = gx.as_deref_mut() {
                            let xrow = &mut gx.d[ci * plane + sy * w + s0..ci * plane + sy * w + s0 + n];
                            for (xv, gv) in xrow.iter_mut().zip(grow) {
                                *xv += wt * gv;
                            }
                        }
                    }
                    grad[ranges.0.start + widx] += gw;
                }
            }
        }
    }
}

fn conv1x1(x: &Map, weight: &[f64], bias: f64) -> Map {
    let plane = x.h * x.w;
    let mut out = Map::zeros(1, x.h, x.w);
    out.d.fill(bias);
    for (c, &wt) in weight.iter().enumerate() {
        for (o, v) in out.d.iter_mut().zip(x.plane(c)) {
            *o += wt * v;
        }
    }
    debug_assert_eq!(out.d.len(), plane);
    out
}

fn tanh_inplace(m: &mut Map) {
    for v in &mut m.d {
        *v = v.tanh();
    }
}

/// Multiply an upstream gradient by tanh' given the activation output.
fn tanh_backward(g: &mut Map, out: &Map) {
    for (gv, o) in g.d.iter_mut().zip(&out.d) {
        *gv *= 1.0 - o * o;
    }
}

/// 2x2 average pool, ceil mode: edge windows average only the cells that exist.
fn pool2(x: &Map) -> Map {
    let (h2, w2) = (x.h.div_ceil(2), x.w.div_ceil(2));
    let mut out = Map::zeros(x.c, h2, w2);
    for c in 0..x.c {
        let inp = x.plane(c);
        for i in 0..h2 {
            for j in 0..w2 {
                let (mut s, mut n) = (0.0, 0.0);
                for y in 2 * i..(2 * i + 2).min(x.h) {
                    for xx in 2 * j..(2 * j + 2).min(x.w) {
                        s += inp[y * x.w + xx];
                        n += 1.0;
                    }
                }
                out.d[(c * h2 + i) * w2 + j] = s / n;
            }
        }
    }
    out
}

fn pool2_backward(g: &Map, h: usize, w: usize) -> Map {
    let mut gx = Map::zeros(g.c, h, w);
    for c in 0..g.c {
        for i in 0..g.h {
            for j in 0..g.w {
                let ys = 2 * i..(2 * i + 2).min(h);
                let xs = 2 * j..(2 * j + 2).min(w);
                let n = (ys.len() * xs.len()) as f64;
                let gv = g.d[(c * g.h + i) * g.w + j] / n;
                for y in ys {
                    for x in xs.clone() {
                        gx.d[(c * h + y) * w + x] += gv;
                    }
                }
            }
        }
    }
    gx
}

/// Nearest-neighbour 2x upsample cropped to `h x w`.
fn upsample(x: &Map, h: usize, w: usize) -> Map {
    let mut out = Map::zeros(x.c, h, w);
    for c in 0..x.c {
        for y in 0..h {
            for xx in 0..w {
                out.d[(c * h + y) * w + xx] = x.d[(c * x.h + y / 2) * x.w + xx / 2];
            }
        }
    }
    out
}

fn upsample_backward(g: &Map, h: usize, w: usize) -> Map {
    let mut gx = Map::zeros(g.c, h, w);
    for c in 0..g.c {
        for y in 0..g.h {
            for x in 0..g.w {
                gx.d[(c * h + y / 2) * w + x / 2] += g.d[(c * g.h + y) * g.w + x];
            }
        }
    }
    gx
}

fn concat(a: &Map, b: &Map) -> Map {
    debug_assert_eq!((a.h, a.w), (b.h, b.w));
    let mut d = Vec::with_capacity(a.d.len() + b.d.len());
    d.extend_from_slice(&a.d);
    d.extend_from_slice(&b.d);
    Map { c: a.c + b.c, h: a.h, w: a.w, d }
}

fn split(m: &Map, first: usize) -> (Map, Map) {
    let n = first * m.h * m.w;
    (
        Map { c: first, h: m.h, w: m.w, d: m.d[..n].to_vec() },
        Map { c: m.c - first, h: m.h, w: m.w, d: m.d[n..].to_vec() },
    )
}

fn add_assign(a: &mut Map, b: &Map) {
    for (x, y) in a.d.iter_mut().zip(&b.d) {
        *x += y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn random_sample(depth: usize, h: usize, w: usize, seed: u64) -> (FeatureTensor, Bitmap) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = depth * h * w;
        let combos: Vec<u8> = (0..n).map(|_| rng.random_range(0..NUM_COMBOS as u8)).collect();
        let mut values = Vec::with_capacity(n * 3);
        for _ in 0..n {
            values.extend([0.0, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        }
        let x = FeatureTensor { depth, height: h, width: w, combos, values };
        let y = Bitmap::from_fn(w, h, |_, _| rng.random_bool(0.3));
        (x, y)
    }

    #[test]
    fn zero_model_outputs_one_half() {
        let (x, _) = random_sample(2, 6, 9, 1);
        let p = blobnet_forward(&BlobNetModel::zeros(2), &x).unwrap();
        assert_eq!(p.len(), 54);
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn output_shape_matches_input_for_odd_sizes() {
        let m = BlobNetModel::init(2, 3);
        for (h, w) in [(4, 4), (5, 7), (9, 4), (13, 11), (45, 80)] {
            let (x, _) = random_sample(2, h, w, 2);
            let p = blobnet_forward(&m, &x).unwrap();
            assert_eq!(p.len(), h * w);
            assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn parameter_budget() {
        for depth in 1..=4 {
            assert!(BlobNetModel::zeros(depth).param_count() < 50_000);
        }
    }

    #[test]
    fn forward_rejects_wrong_depth() {
        let (x, _) = random_sample(3, 4, 4, 1);
        assert!(matches!(blobnet_forward(&BlobNetModel::zeros(2), &x), Err(CovaError::Shape(_))));
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = BlobNetModel::init(2, 9);
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
        let back = BlobNetModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        buf[0] = b'X';
        assert!(BlobNetModel::read_from(buf.as_slice()).is_err());
    }

    #[test]
    fn all_zero_targets_drive_outputs_down() {
        let data: Vec<_> = (0..4)
            .map(|s| {
                let (x, _) = random_sample(2, 6, 6, s);
                (x, Bitmap::new(6, 6))
            })
            .collect();
        let cfg = TrainConfig { epochs: 60, batch_size: 4, learning_rate: 0.02, ..TrainConfig::default() };
        let (m, log) = blobnet_train(&BlobNetModel::init(2, 0), &data, &cfg).unwrap();
        assert!(log.final_loss < log.initial_loss);
        for (x, _) in &data {
            assert!(blobnet_forward(&m, x).unwrap().iter().all(|&p| p < 0.1));
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data: Vec<_> = (0..3).map(|s| random_sample(2, 5, 5, s)).collect();
        let cfg = TrainConfig { epochs: 5, batch_size: 2, ..TrainConfig::default() };
        let a = blobnet_train(&BlobNetModel::init(2, 1), &data, &cfg).unwrap();
        let b = blobnet_train(&BlobNetModel::init(2, 1), &data, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_is_reported() {
        let data = vec![random_sample(1, 4, 4, 0)];
        let mut m = BlobNetModel::init(1, 0);
        m.params_mut()[NUM_COMBOS] = f64::NAN;
        let err = blobnet_train(&m, &data, &TrainConfig { epochs: 2, ..TrainConfig::default() }).unwrap_err();
        assert!(matches!(err, CovaError::Divergence { epoch: 0, .. }));
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(blobnet_train(&BlobNetModel::zeros(1), &[], &TrainConfig::default()).is_err());
    }

    #[test]
    fn bce_is_stable() {
        assert!((bce_with_logits(0.0, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_with_logits(800.0, 1.0) < 1e-300);
        assert!((bce_with_logits(-800.0, 1.0) - 800.0).abs() < 1e-9);
    }
}
