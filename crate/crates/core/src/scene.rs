//! Deterministic synthetic world used as both the video source and the ground truth.
//!
//! A [`Scene`] holds labeled objects with piecewise-constant-velocity trajectories.
//! [`render_frame`] produces grayscale pixels for the background model, and
//! [`encode_metadata`] emulates what partial decoding of an encoded bitstream
//! would recover: macroblock types, partition modes and motion vectors.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::error::{CovaError, Result};
use crate::meta::{
    FrameMeta, FrameType, MacroblockMeta, MbType, MetadataStream, MotionVector, StreamHeader, MAX_MV, MB_SIZE,
};

/// Quarter-pixel units per pixel.
pub const QPEL: i32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub width_px: usize,
    pub height_px: usize,
    pub num_frames: usize,
    pub gop_length: usize,
    /// Probability per frame that a new moving object appears.
    pub object_spawn_rate: f64,
    pub label_set: Vec<String>,
    pub static_object_count: usize,
    /// Standard deviation of motion-vector noise, quarter-pixels.
    pub mv_noise_sigma: f64,
    /// Fraction of background macroblocks per frame that carry a spurious small vector.
    pub texture_noise_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub b_frames: bool,
    #[serde(default = "default_min_object")]
    pub min_object_px: usize,
    #[serde(default = "default_max_object")]
    pub max_object_px: usize,
    /// Largest per-axis speed of a moving object, pixels per frame.
    #[serde(default = "default_max_speed")]
    pub max_speed_px: i32,
    /// Per-frame probability that a moving object picks a new velocity.
    #[serde(default = "default_turn_prob")]
    pub velocity_change_prob: f64,
}

fn default_min_object() -> usize {
    48
}
fn default_max_object() -> usize {
    96
}
fn default_max_speed() -> i32 {
    3
}
fn default_turn_prob() -> f64 {
    0.01
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width_px: 640,
            height_px: 352,
            num_frames: 500,
            gop_length: 250,
            object_spawn_rate: 0.005,
            label_set: vec!["car".into(), "person".into(), "truck".into()],
            static_object_count: 0,
            mv_noise_sigma: 1.0,
            texture_noise_rate: 0.01,
            seed: 0,
            b_frames: false,
            min_object_px: default_min_object(),
            max_object_px: default_max_object(),
            max_speed_px: default_max_speed(),
            velocity_change_prob: default_turn_prob(),
        }
    }
}

impl SceneConfig {
    /// Named scene presets exposed on the command line.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            // Few concurrent movers plus one parked object; the end-to-end reference scene.
            "sparse" => Some(Self {
                num_frames: 5000,
                gop_length: 50,
                object_spawn_rate: 0.004,
                static_object_count: 1,
                mv_noise_sigma: 1.0,
                texture_noise_rate: 0.01,
                seed: 7,
                ..Self::default()
            }),
            "busy" => Some(Self {
                num_frames: 2000,
                gop_length: 50,
                object_spawn_rate: 0.03,
                static_object_count: 3,
                seed: 11,
                ..Self::default()
            }),
            "tiny" => Some(Self {
                width_px: 256,
                height_px: 160,
                num_frames: 200,
                gop_length: 50,
                object_spawn_rate: 0.02,
                min_object_px: 32,
                max_object_px: 64,
                seed: 3,
                ..Self::default()
            }),
            _ => None,
        }
    }

    pub fn mb_w(&self) -> usize {
        self.width_px / MB_SIZE
    }

    pub fn mb_h(&self) -> usize {
        self.height_px / MB_SIZE
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(CovaError::Config(m));
        if self.width_px == 0 || self.height_px == 0 || !self.width_px.is_multiple_of(16) || !self.height_px.is_multiple_of(16) {
            return err(format!("frame size {}x{} must be positive multiples of 16", self.width_px, self.height_px));
        }
        if self.gop_length < 2 {
            return err(format!("gop_length {} must be at least 2", self.gop_length));
        }
        if !(self.mv_noise_sigma >= 0.0 && self.mv_noise_sigma.is_finite()) {
            return err(format!("mv_noise_sigma {} must be finite and non-negative", self.mv_noise_sigma));
        }
        if !(0.0..1.0).contains(&self.texture_noise_rate) {
            return err(format!("texture_noise_rate {} must lie in [0,1)", self.texture_noise_rate));
        }
        if !(0.0..=1.0).contains(&self.object_spawn_rate) {
            return err(format!("object_spawn_rate {} must lie in [0,1]", self.object_spawn_rate));
        }
        if !(0.0..=1.0).contains(&self.velocity_change_prob) {
            return err("velocity_change_prob must lie in [0,1]".into());
        }
        let wants_objects = self.object_spawn_rate > 0.0 || self.static_object_count > 0;
        if wants_objects {
            if self.label_set.is_empty() {
                return err("label_set must not be empty".into());
            }
            if self.min_object_px == 0
                || self.min_object_px > self.max_object_px
                || self.max_object_px > self.width_px.min(self.height_px)
            {
                return err(format!(
                    "object size range {}..={} does not fit a {}x{} frame",
                    self.min_object_px, self.max_object_px, self.width_px, self.height_px
                ));
            }
            if self.max_speed_px < 1 {
                return err("max_speed_px must be at least 1".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub bbox: BBox,
    /// Displacement from the previous frame, pixels per frame.
    pub velocity: [i32; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub object_id: usize,
    pub label: String,
    pub is_static: bool,
    pub first_frame: usize,
    pub last_frame: usize,
    pub intensity: u8,
    /// One state per frame in `first_frame..=last_frame`.
    pub states: Vec<ObjectState>,
}

impl GroundTruthObject {
    pub fn is_present(&self, t: usize) -> bool {
        (self.first_frame..=self.last_frame).contains(&t)
    }

    pub fn state_at(&self, t: usize) -> Option<&ObjectState> {
        if self.is_present(t) {
            self.states.get(t - self.first_frame)
        } else {
            None
        }
    }

    /// True when the object has moved since the previous frame.
    pub fn is_moving_at(&self, t: usize) -> bool {
        self.state_at(t).is_some_and(|s| s.velocity != [0, 0])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayscaleFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayscaleFrame {
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Binary PGM (P5).
    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.data)
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_pgm(&mut w)?;
        w.flush()
    }

    /// Draw an object: base intensity plus a fixed texture in object-local coordinates.
    fn draw_object(&mut self, b: &BBox, object_id: usize, base: u8) {
        let x0 = b.x.max(0.0) as usize;
        let y0 = b.y.max(0.0) as usize;
        let x1 = (b.x1().min(self.width as f64)) as usize;
        let y1 = (b.y1().min(self.height as f64)) as usize;
        for y in y0..y1 {
            for x in x0..x1 {
                let (lx, ly) = ((x as f64 - b.x) as u64, (y as f64 - b.y) as u64);
                let v = base as i32 + texture(object_id as u64, lx, ly);
                self.data[y * self.width + x] = v.clamp(0, 255) as u8;
            }
        }
    }
}

const TEXTURE_AMPLITUDE: i32 = 20;

/// Object texture offset in `-TEXTURE_AMPLITUDE..=TEXTURE_AMPLITUDE`.
fn texture(object_id: u64, lx: u64, ly: u64) -> i32 {
    let h = mix_seed(object_id, lx, ly);
    (h % (2 * TEXTURE_AMPLITUDE as u64 + 1)) as i32 - TEXTURE_AMPLITUDE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub config: SceneConfig,
    pub objects: Vec<GroundTruthObject>,
    #[serde(skip)]
    pub background: Option<GrayscaleFrame>,
}

impl Scene {
    pub fn background(&self) -> GrayscaleFrame {
        match &self.background {
            Some(bg) => bg.clone(),
            None => render_background(&self.config),
        }
    }

    /// Objects present at frame `t` together with their state.
    pub fn objects_at(&self, t: usize) -> impl Iterator<Item = (&GroundTruthObject, &ObjectState)> {
        self.objects.iter().filter_map(move |o| o.state_at(t).map(|s| (o, s)))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Scene> {
        let r = std::io::BufReader::new(File::open(path)?);
        let mut scene: Scene = serde_json::from_reader(r)?;
        scene.config.validate()?;
        scene.background = Some(render_background(&scene.config));
        Ok(scene)
    }
}

pub(crate) fn mix_seed(seed: u64, stream: u64, index: u64) -> u64 {
    // splitmix64 finaliser over the combined key
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-purpose RNG derived from a seed; identical inputs give identical streams.
pub(crate) fn derived_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, stream, index))
}

const RNG_BACKGROUND: u64 = 1;
const RNG_ENCODER: u64 = 2;

/// Smooth shaded background with a fixed fine texture; values stay in 40..=150 so
/// every object intensity (190..=250) differs from it by at least 40 levels.
pub fn render_background(config: &SceneConfig) -> GrayscaleFrame {
    let mut rng = derived_rng(config.seed, RNG_BACKGROUND, 0);
    let (fx, fy): (f64, f64) = (rng.random_range(20.0..60.0), rng.random_range(20.0..60.0));
    let (px, py): (f64, f64) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
    let (w, h) = (config.width_px, config.height_px);
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let shade = 0.5 + 0.5 * (x as f64 / fx + px).sin() * (y as f64 / fy + py).cos();
            let grain: i32 = rng.random_range(-5..=5);
            let v = 90.0 + 50.0 * (shade - 0.5) * 2.0 + grain as f64;
            data.push(v.round().clamp(40.0, 150.0) as u8);
        }
    }
    GrayscaleFrame { width: w, height: h, data }
}

fn random_velocity(rng: &mut ChaCha8Rng, max_speed: i32) -> [i32; 2] {
    loop {
        let v = [rng.random_range(-max_speed..=max_speed), rng.random_range(-max_speed..=max_speed)];
        if v != [0, 0] {
            return v;
        }
    }
}

fn random_box(rng: &mut ChaCha8Rng, c: &SceneConfig) -> BBox {
    let w = rng.random_range(c.min_object_px..=c.max_object_px);
    let h = rng.random_range(c.min_object_px..=c.max_object_px);
    let x = rng.random_range(0..=c.width_px - w);
    let y = rng.random_range(0..=c.height_px - h);
    BBox::new(x as f64, y as f64, w as f64, h as f64)
}

fn inside(b: &BBox, c: &SceneConfig) -> bool {
    b.x >= 0.0 && b.y >= 0.0 && b.x1() <= c.width_px as f64 && b.y1() <= c.height_px as f64
}

/// Generate a scene from its configuration; pure function of `config`.
pub fn generate_scene(config: &SceneConfig) -> Result<Scene> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut objects = Vec::new();
    let n = config.num_frames;

    for k in 0..config.static_object_count {
        let min_len = 2 * config.gop_length;
        let len = if n <= min_len { n } else { rng.random_range(min_len..=min_len.max(n / 2)) };
        if len == 0 {
            break;
        }
        let first = rng.random_range(0..=n - len);
        let bbox = random_box(&mut rng, config);
        let label = config.label_set[rng.random_range(0..config.label_set.len())].clone();
        objects.push(GroundTruthObject {
            object_id: k,
            label,
            is_static: true,
            first_frame: first,
            last_frame: first + len - 1,
            intensity: rng.random_range(210..=230),
            states: vec![ObjectState { bbox, velocity: [0, 0] }; len],
        });
    }

    for t in 0..n {
        if config.object_spawn_rate <= 0.0 || !rng.random_bool(config.object_spawn_rate) {
            continue;
        }
        let mut bbox = random_box(&mut rng, config);
        let mut velocity = random_velocity(&mut rng, config.max_speed_px);
        let label = config.label_set[rng.random_range(0..config.label_set.len())].clone();
        let intensity = rng.random_range(210..=230);
        let mut states = vec![ObjectState { bbox, velocity }];
        for _ in t + 1..n {
            if rng.random_bool(config.velocity_change_prob) {
                velocity = random_velocity(&mut rng, config.max_speed_px);
            }
            let next = BBox::new(bbox.x + velocity[0] as f64, bbox.y + velocity[1] as f64, bbox.w, bbox.h);
            if !inside(&next, config) {
                break;
            }
            bbox = next;
            states.push(ObjectState { bbox, velocity });
        }
        objects.push(GroundTruthObject {
            object_id: objects.len(),
            label,
            is_static: false,
            first_frame: t,
            last_frame: t + states.len() - 1,
            intensity,
            states,
        });
    }

    Ok(Scene { config: config.clone(), objects, background: Some(render_background(config)) })
}

/// Render frame `t`: background with every live object drawn as a filled rectangle.
pub fn render_frame(scene: &Scene, t: usize) -> Result<GrayscaleFrame> {
    if t >= scene.config.num_frames {
        return Err(CovaError::Bounds { index: t, len: scene.config.num_frames });
    }
    let mut frame = scene.background();
    // static objects first so movers are drawn on top
    for (o, s) in scene.objects_at(t).filter(|(o, _)| o.is_static) {
        frame.draw_object(&s.bbox, o.object_id, o.intensity);
    }
    for (o, s) in scene.objects_at(t).filter(|(o, _)| !o.is_static) {
        frame.draw_object(&s.bbox, o.object_id, o.intensity);
    }
    Ok(frame)
}

pub fn frame_type_at(config: &SceneConfig, t: usize) -> FrameType {
    let pos = t % config.gop_length;
    if pos == 0 {
        FrameType::I
    } else if config.b_frames && pos % 2 == 1 && pos + 1 < config.gop_length && t + 1 < config.num_frames {
        FrameType::B
    } else {
        FrameType::P
    }
}

fn mb_rect(row: usize, col: usize) -> BBox {
    BBox::new((col * MB_SIZE) as f64, (row * MB_SIZE) as f64, MB_SIZE as f64, MB_SIZE as f64)
}

/// Emulate partial decoding of frame `t`.
pub fn encode_frame(scene: &Scene, t: usize) -> Result<FrameMeta> {
    let c = &scene.config;
    if t >= c.num_frames {
        return Err(CovaError::Bounds { index: t, len: c.num_frames });
    }
    let (mb_w, mb_h) = (c.mb_w(), c.mb_h());
    let frame_type = frame_type_at(c, t);
    let gop_index = t / c.gop_length;
    if frame_type == FrameType::I {
        return Ok(FrameMeta { frame_index: t, frame_type, gop_index, mb_w, mb_h, grid: vec![MacroblockMeta::intra(); mb_w * mb_h] });
    }
    let mb_type = if frame_type == FrameType::B { MbType::B } else { MbType::P };
    let max_mode: u8 = if mb_type == MbType::B { 4 } else { 5 };
    let mut rng = derived_rng(c.seed, RNG_ENCODER, t as u64);
    let noise = (c.mv_noise_sigma > 0.0).then(|| Normal::new(0.0, c.mv_noise_sigma).expect("sigma validated"));

    let movers: Vec<&ObjectState> =
        scene.objects_at(t).filter(|(o, s)| !o.is_static && s.velocity != [0, 0]).map(|(_, s)| s).collect();

    let mut grid = Vec::with_capacity(mb_w * mb_h);
    for row in 0..mb_h {
        for col in 0..mb_w {
            let cell = mb_rect(row, col);
            // topmost mover wins; later objects are drawn over earlier ones
            let owner = movers.iter().rev().find(|s| s.bbox.intersection_area(&cell) > 0.0);
            let mb = match owner {
                Some(s) => {
                    let mut mv = MotionVector::new(-QPEL * s.velocity[0], -QPEL * s.velocity[1]);
                    if let Some(n) = &noise {
                        mv.dx += n.sample(&mut rng).round() as i32;
                        mv.dy += n.sample(&mut rng).round() as i32;
                    }
                    mv.dx = mv.dx.clamp(-MAX_MV, MAX_MV);
                    mv.dy = mv.dy.clamp(-MAX_MV, MAX_MV);
                    let mode = if rng.random_bool(0.5) { rng.random_range(3..=max_mode) } else { rng.random_range(0..=2) };
                    MacroblockMeta::inter(mb_type, mode, mv)
                }
                None => {
                    if c.texture_noise_rate > 0.0 && rng.random_bool(c.texture_noise_rate) {
                        let mv = loop {
                            let (dx, dy) = (rng.random_range(-4..=4), rng.random_range(-4..=4));
                            if (dx, dy) != (0, 0) && dx * dx + dy * dy <= 16 {
                                break MotionVector::new(dx, dy);
                            }
                        };
                        MacroblockMeta::inter(mb_type, rng.random_range(0..=2), mv)
                    } else {
                        let mode = if rng.random_bool(0.7) { 0 } else { rng.random_range(1..=2) };
                        MacroblockMeta::inter(mb_type, mode, MotionVector::ZERO)
                    }
                }
            };
            grid.push(mb.expect("encoder only emits tabulated modes"));
        }
    }
    Ok(FrameMeta { frame_index: t, frame_type, gop_index, mb_w, mb_h, grid })
}

/// Metadata for the whole scene.
pub fn encode_metadata(scene: &Scene) -> Result<MetadataStream> {
    let c = &scene.config;
    c.validate()?;
    let frames = (0..c.num_frames).map(|t| encode_frame(scene, t)).collect::<Result<Vec<_>>>()?;
    Ok(MetadataStream { header: StreamHeader::new(c.width_px, c.height_px, c.gop_length, c.b_frames), frames })
}
