//! Compressed-metadata container: the per-macroblock information a partial decoder
//! recovers (type, partition mode, motion vector), GoP segmentation, decode
//! dependencies and I-frame-boundary chunking.
//!
//! On disk a stream is JSON Lines. The first line is a versioned header; every
//! further line is one frame whose grid is run-length encoded in row-major order
//! as `[run_length, combo_index, dx, dy]` quadruples.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{CovaError, Result};

pub const FORMAT_TAG: &str = "cova-meta";
pub const FORMAT_VERSION: u32 = 1;
pub const MB_SIZE: usize = 16;
pub const MAX_MV: i32 = 2048;

/// Number of (macroblock type, partition mode) combinations.
pub const NUM_COMBOS: usize = 12;

/// Fixed (type, partition mode) → combination index table.
pub const COMBO_TABLE: [(MbType, u8); NUM_COMBOS] = [
    (MbType::I, 0),
    (MbType::P, 0),
    (MbType::P, 1),
    (MbType::P, 2),
    (MbType::P, 3),
    (MbType::P, 4),
    (MbType::P, 5),
    (MbType::B, 0),
    (MbType::B, 1),
    (MbType::B, 2),
    (MbType::B, 3),
    (MbType::B, 4),
];

static STREAM_READS: AtomicUsize = AtomicUsize::new(0);

/// How many times [`read_stream`] has opened a metadata file in this process.
pub fn stream_read_count() -> usize {
    STREAM_READS.load(Ordering::SeqCst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MbType {
    I,
    P,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameType {
    I,
    P,
    B,
}

/// Motion vector in quarter-pixel units, pointing from the current block to its
/// reference in the previous frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MotionVector {
    pub dx: i32,
    pub dy: i32,
}

impl MotionVector {
    pub const ZERO: MotionVector = MotionVector { dx: 0, dy: 0 };

    pub fn new(dx: i32, dy: i32) -> Self {
        Self { dx, dy }
    }

    pub fn is_zero(&self) -> bool {
        self.dx == 0 && self.dy == 0
    }

    pub fn in_range(&self) -> bool {
        self.dx.abs() <= MAX_MV && self.dy.abs() <= MAX_MV
    }
}

pub fn combo_index(mb_type: MbType, partition_mode: u8) -> Option<u8> {
    COMBO_TABLE
        .iter()
        .position(|&(t, m)| t == mb_type && m == partition_mode)
        .map(|i| i as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MacroblockMeta {
    pub mb_type: MbType,
    pub partition_mode: u8,
    pub mv: MotionVector,
    pub combo_index: u8,
}

impl MacroblockMeta {
    pub fn intra() -> Self {
        Self { mb_type: MbType::I, partition_mode: 0, mv: MotionVector::ZERO, combo_index: 0 }
    }

    /// Build an inter macroblock; `None` if the mode is not in the combination table.
    pub fn inter(mb_type: MbType, partition_mode: u8, mv: MotionVector) -> Option<Self> {
        let combo_index = combo_index(mb_type, partition_mode)?;
        if mb_type == MbType::I {
            return (mv.is_zero()).then(Self::intra);
        }
        Some(Self { mb_type, partition_mode, mv, combo_index })
    }

    pub fn from_combo(combo: u8, mv: MotionVector) -> Option<Self> {
        let &(mb_type, partition_mode) = COMBO_TABLE.get(combo as usize)?;
        if mb_type == MbType::I && !mv.is_zero() {
            return None;
        }
        Some(Self { mb_type, partition_mode, mv, combo_index: combo })
    }
}

/// Per-frame macroblock grid, row-major, `mb_h` rows of `mb_w` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMeta {
    pub frame_index: usize,
    pub frame_type: FrameType,
    pub gop_index: usize,
    pub mb_w: usize,
    pub mb_h: usize,
    pub grid: Vec<MacroblockMeta>,
}

impl FrameMeta {
    pub fn at(&self, row: usize, col: usize) -> &MacroblockMeta {
        &self.grid[row * self.mb_w + col]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub format: String,
    pub version: u32,
    pub width_px: usize,
    pub height_px: usize,
    pub mb_w: usize,
    pub mb_h: usize,
    pub gop_length: usize,
    pub codec: String,
    pub b_frames: bool,
}

impl StreamHeader {
    pub fn new(width_px: usize, height_px: usize, gop_length: usize, b_frames: bool) -> Self {
        Self {
            format: FORMAT_TAG.to_string(),
            version: FORMAT_VERSION,
            width_px,
            height_px,
            mb_w: width_px / MB_SIZE,
            mb_h: height_px / MB_SIZE,
            gop_length,
            codec: "synthetic-h264".to_string(),
            b_frames,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetadataStream {
    pub header: StreamHeader,
    pub frames: Vec<FrameMeta>,
}

impl MetadataStream {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// One group of pictures: a borrowed run of frames beginning with an I-frame.
#[derive(Debug, Clone, Copy)]
pub struct Gop<'a> {
    pub gop_index: usize,
    pub frames: &'a [FrameMeta],
}

impl<'a> Gop<'a> {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Stream index of the GoP's first frame.
    pub fn start(&self) -> usize {
        self.frames[0].frame_index
    }

    /// Stream index one past the last frame.
    pub fn end(&self) -> usize {
        self.start() + self.frames.len()
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.start()..self.end()).contains(&frame)
    }
}

/// Consecutive whole GoPs handed to one worker.
#[derive(Debug, Clone)]
pub struct Chunk<'a> {
    pub chunk_index: usize,
    pub gops: Vec<Gop<'a>>,
}

impl<'a> Chunk<'a> {
    pub fn start(&self) -> usize {
        self.gops.first().map_or(0, |g| g.start())
    }

    pub fn end(&self) -> usize {
        self.gops.last().map_or(0, |g| g.end())
    }

    pub fn num_frames(&self) -> usize {
        self.gops.iter().map(Gop::len).sum()
    }
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    frame_index: usize,
    frame_type: FrameType,
    gop_index: usize,
    runs: Vec<[i64; 4]>,
}

fn encode_runs(grid: &[MacroblockMeta]) -> Vec<[i64; 4]> {
    let mut runs: Vec<[i64; 4]> = Vec::new();
    for mb in grid {
        let key = [mb.combo_index as i64, mb.mv.dx as i64, mb.mv.dy as i64];
        match runs.last_mut() {
            Some(run) if run[1..] == key => run[0] += 1,
            _ => runs.push([1, key[0], key[1], key[2]]),
        }
    }
    runs
}

fn decode_runs(frame: usize, runs: &[[i64; 4]], cells: usize) -> Result<Vec<MacroblockMeta>> {
    let parse = |msg: String| CovaError::Parse { frame, msg };
    let mut grid = Vec::with_capacity(cells);
    for &[n, combo, dx, dy] in runs {
        if n <= 0 {
            return Err(parse(format!("non-positive run length {n}")));
        }
        if grid.len() + n as usize > cells {
            return Err(parse(format!("dimension mismatch: runs exceed {cells} macroblocks")));
        }
        let (dx, dy) = (i32::try_from(dx), i32::try_from(dy));
        let (Ok(dx), Ok(dy)) = (dx, dy) else {
            return Err(parse("motion vector out of range".into()));
        };
        let mv = MotionVector::new(dx, dy);
        if !mv.in_range() {
            return Err(parse(format!("motion vector ({dx},{dy}) exceeds ±{MAX_MV}")));
        }
        let combo = u8::try_from(combo).ok().filter(|&c| (c as usize) < NUM_COMBOS);
        let mb = combo
            .and_then(|c| MacroblockMeta::from_combo(c, mv))
            .ok_or_else(|| parse(format!("invalid macroblock record (combo {combo:?}, mv ({dx},{dy}))")))?;
        grid.extend(std::iter::repeat_n(mb, n as usize));
    }
    if grid.len() != cells {
        return Err(parse(format!("dimension mismatch: {} of {cells} macroblocks", grid.len())));
    }
    Ok(grid)
}

/// Serialize a stream into the canonical JSONL representation.
pub fn write_stream_to<W: Write>(stream: &MetadataStream, mut out: W) -> Result<()> {
    serde_json::to_writer(&mut out, &stream.header)?;
    out.write_all(b"\n")?;
    for f in &stream.frames {
        let rec = FrameRecord {
            frame_index: f.frame_index,
            frame_type: f.frame_type,
            gop_index: f.gop_index,
            runs: encode_runs(&f.grid),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_stream(stream: &MetadataStream, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_stream_to(stream, BufWriter::new(file))
}

/// Parse a JSONL stream, validating dimensions, frame ordering and GoP bookkeeping.
pub fn read_stream_from<R: BufRead>(input: R) -> Result<MetadataStream> {
    let mut lines = input.lines();
    let header_line = lines.next().ok_or_else(|| CovaError::Header("empty file".into()))??;
    let header: StreamHeader =
        serde_json::from_str(&header_line).map_err(|e| CovaError::Header(e.to_string()))?;
    if header.format != FORMAT_TAG {
        return Err(CovaError::Header(format!("unknown format tag {:?}", header.format)));
    }
    if header.version != FORMAT_VERSION {
        return Err(CovaError::Header(format!("unsupported version {}", header.version)));
    }
    if header.mb_w * MB_SIZE != header.width_px || header.mb_h * MB_SIZE != header.height_px {
        return Err(CovaError::Header("macroblock grid does not match pixel dimensions".into()));
    }
    let cells = header.mb_w * header.mb_h;

    let mut frames: Vec<FrameMeta> = Vec::new();
    let mut gop_index: Option<usize> = None;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let expected = frames.len();
        let rec: FrameRecord = serde_json::from_str(&line)
            .map_err(|e| CovaError::Parse { frame: expected, msg: format!("malformed record: {e}") })?;
        if rec.frame_index != expected {
            let msg = if rec.frame_index > expected {
                format!("gap at index {expected}")
            } else {
                format!("non-monotone frame index {}", rec.frame_index)
            };
            return Err(CovaError::Parse { frame: rec.frame_index, msg });
        }
        let grid = decode_runs(expected, &rec.runs, cells)?;
        if rec.frame_type == FrameType::I && grid.iter().any(|m| m.mb_type != MbType::I) {
            return Err(CovaError::Parse {
                frame: expected,
                msg: "I-frame with non-intra macroblocks".into(),
            });
        }
        let g = match (rec.frame_type, gop_index) {
            (FrameType::I, None) => 0,
            (FrameType::I, Some(g)) => g + 1,
            (_, Some(g)) => g,
            (_, None) => {
                return Err(CovaError::Parse { frame: expected, msg: "stream must start with an I-frame".into() })
            }
        };
        if rec.gop_index != g {
            return Err(CovaError::Parse {
                frame: expected,
                msg: format!("gop index {} inconsistent with I-frame count (expected {g})", rec.gop_index),
            });
        }
        gop_index = Some(g);
        frames.push(FrameMeta {
            frame_index: rec.frame_index,
            frame_type: rec.frame_type,
            gop_index: g,
            mb_w: header.mb_w,
            mb_h: header.mb_h,
            grid,
        });
    }
    Ok(MetadataStream { header, frames })
}

pub fn read_stream(path: impl AsRef<Path>) -> Result<MetadataStream> {
    STREAM_READS.fetch_add(1, Ordering::SeqCst);
    let file = File::open(path)?;
    read_stream_from(BufReader::new(file))
}

/// Split a stream into GoPs at every I-frame.
pub fn split_gops(stream: &MetadataStream) -> Result<Vec<Gop<'_>>> {
    split_frames(&stream.frames)
}

pub fn split_frames(frames: &[FrameMeta]) -> Result<Vec<Gop<'_>>> {
    if frames.is_empty() {
        return Ok(Vec::new());
    }
    if frames[0].frame_type != FrameType::I {
        return Err(CovaError::Structure(format!(
            "stream starts with a {:?}-frame, expected an I-frame",
            frames[0].frame_type
        )));
    }
    let mut gops = Vec::new();
    let mut start = 0;
    for i in 1..=frames.len() {
        if i == frames.len() || frames[i].frame_type == FrameType::I {
            gops.push(Gop { gop_index: frames[start].gop_index, frames: &frames[start..i] });
            start = i;
        }
    }
    Ok(gops)
}

/// Positions inside `gop` that must be decoded before position `k` can be.
///
/// I/P frames depend on every earlier frame of the GoP. A B-frame additionally
/// depends on the next I/P frame in the GoP.
pub fn dependent_frames(gop: &Gop<'_>, k: usize) -> Result<BTreeSet<usize>> {
    if k >= gop.len() {
        return Err(CovaError::Bounds { index: k, len: gop.len() });
    }
    let mut deps: BTreeSet<usize> = (0..k).collect();
    if gop.frames[k].frame_type == FrameType::B {
        if let Some(next) = (k + 1..gop.len()).find(|&p| gop.frames[p].frame_type != FrameType::B) {
            deps.insert(next);
        }
    }
    Ok(deps)
}

/// Group whole GoPs into at most `worker_count` contiguous chunks whose sizes differ by
/// at most one GoP; earlier chunks take the remainder.
pub fn chunk_at_iframes(stream: &MetadataStream, worker_count: usize) -> Result<Vec<Chunk<'_>>> {
    let gops = split_gops(stream)?;
    Ok(chunk_gops(gops, worker_count))
}

pub fn chunk_gops(gops: Vec<Gop<'_>>, worker_count: usize) -> Vec<Chunk<'_>> {
    let n = gops.len();
    if n == 0 {
        return Vec::new();
    }
    let chunks = worker_count.max(1).min(n);
    let (base, extra) = (n / chunks, n % chunks);
    let mut it = gops.into_iter();
    (0..chunks)
        .map(|c| {
            let size = base + usize::from(c < extra);
            Chunk { chunk_index: c, gops: it.by_ref().take(size).collect() }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn synthetic_stream(types: &[FrameType], mb_w: usize, mb_h: usize, seed: u64) -> MetadataStream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gop = 0;
        let frames = types
            .iter()
            .enumerate()
            .map(|(i, &ft)| {
                if ft == FrameType::I && i > 0 {
                    gop += 1;
                }
                let grid = (0..mb_w * mb_h)
                    .map(|_| match ft {
                        FrameType::I => MacroblockMeta::intra(),
                        FrameType::P | FrameType::B => {
                            let t = if ft == FrameType::P { MbType::P } else { MbType::B };
                            let max_mode = if t == MbType::P { 5 } else { 4 };
                            let mv = if rng.random_bool(0.3) {
                                MotionVector::new(rng.random_range(-40..=40), rng.random_range(-40..=40))
                            } else {
                                MotionVector::ZERO
                            };
                            MacroblockMeta::inter(t, rng.random_range(0..=max_mode), mv).unwrap()
                        }
                    })
                    .collect();
                FrameMeta { frame_index: i, frame_type: ft, gop_index: gop, mb_w, mb_h, grid }
            })
            .collect();
        MetadataStream {
            header: StreamHeader::new(mb_w * MB_SIZE, mb_h * MB_SIZE, 50, types.contains(&FrameType::B)),
            frames,
        }
    }

    fn types_with_iframes(n: usize, iframes: &[usize]) -> Vec<FrameType> {
        (0..n).map(|i| if iframes.contains(&i) { FrameType::I } else { FrameType::P }).collect()
    }

    fn round_trip(s: &MetadataStream) -> (Vec<u8>, MetadataStream) {
        let mut buf = Vec::new();
        write_stream_to(s, &mut buf).unwrap();
        let back = read_stream_from(buf.as_slice()).unwrap();
        (buf, back)
    }

    #[test]
    fn combo_table_is_consistent() {
        for (i, &(t, m)) in COMBO_TABLE.iter().enumerate() {
            assert_eq!(combo_index(t, m), Some(i as u8));
        }
        assert_eq!(combo_index(MbType::I, 1), None);
        assert_eq!(combo_index(MbType::B, 5), None);
        assert!(MacroblockMeta::inter(MbType::I, 0, MotionVector::new(1, 0)).is_none());
    }

    #[test]
    fn empty_stream_round_trips() {
        let s = MetadataStream { header: StreamHeader::new(64, 32, 50, false), frames: vec![] };
        let (buf, back) = round_trip(&s);
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 1);
        assert_eq!(back, s);
    }

    #[test]
    fn three_frame_round_trip_is_bit_exact() {
        let s = synthetic_stream(&types_with_iframes(3, &[0]), 5, 4, 1);
        let (buf, back) = round_trip(&s);
        assert_eq!(back, s);
        let (buf2, _) = round_trip(&back);
        assert_eq!(buf, buf2);
    }

    #[test]
    fn gap_in_frame_indices_is_reported() {
        let s = synthetic_stream(&types_with_iframes(3, &[0]), 2, 2, 2);
        let mut buf = Vec::new();
        write_stream_to(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        // drop frame 1, keeping frames 0 and 2
        let kept: Vec<&str> = text.lines().enumerate().filter(|(i, _)| *i != 2).map(|(_, l)| l).collect();
        let err = read_stream_from(kept.join("\n").as_bytes()).unwrap_err();
        match err {
            CovaError::Parse { frame, msg } => {
                assert_eq!(frame, 2);
                assert!(msg.contains("gap at index 1"), "{msg}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let text = format!(
            "{}\n{}\n",
            serde_json::to_string(&StreamHeader::new(32, 32, 50, false)).unwrap(),
            r#"{"frame_index":0,"frame_type":"I","gop_index":0,"runs":[[3,0,0,0]]}"#
        );
        let err = read_stream_from(text.as_bytes()).unwrap_err();
        assert!(matches!(err, CovaError::Parse { frame: 0, ref msg } if msg.contains("dimension mismatch")));
    }

    #[test]
    fn malformed_record_is_reported() {
        let text = format!(
            "{}\n{{\"frame_index\":0,\"frame_type\":\n",
            serde_json::to_string(&StreamHeader::new(32, 32, 50, false)).unwrap()
        );
        assert!(matches!(read_stream_from(text.as_bytes()), Err(CovaError::Parse { frame: 0, .. })));
    }

    #[test]
    fn split_regular_and_irregular() {
        let s = synthetic_stream(&types_with_iframes(200, &[0, 50, 100, 150]), 2, 2, 3);
        let gops = split_gops(&s).unwrap();
        assert_eq!(gops.iter().map(Gop::len).collect::<Vec<_>>(), vec![50; 4]);

        let s = synthetic_stream(&types_with_iframes(1, &[0]), 2, 2, 3);
        assert_eq!(split_gops(&s).unwrap().len(), 1);

        let s = synthetic_stream(&types_with_iframes(100, &[0, 30]), 2, 2, 3);
        let lens: Vec<_> = split_gops(&s).unwrap().iter().map(Gop::len).collect();
        assert_eq!(lens, vec![30, 70]);
    }

    #[test]
    fn split_requires_leading_iframe() {
        let mut s = synthetic_stream(&types_with_iframes(4, &[0]), 2, 2, 3);
        s.frames.remove(0);
        assert!(matches!(split_gops(&s), Err(CovaError::Structure(_))));
    }

    #[test]
    fn dependency_saw_tooth() {
        let s = synthetic_stream(&types_with_iframes(10, &[0]), 1, 1, 4);
        let gops = split_gops(&s).unwrap();
        let g = &gops[0];
        assert!(dependent_frames(g, 0).unwrap().is_empty());
        assert_eq!(dependent_frames(g, 5).unwrap(), (0..5).collect());
        assert_eq!(dependent_frames(g, 9).unwrap().len(), 9);
        assert!(matches!(dependent_frames(g, 10), Err(CovaError::Bounds { index: 10, len: 10 })));
    }

    #[test]
    fn b_frame_depends_on_next_reference() {
        use FrameType::*;
        let s = synthetic_stream(&[I, B, P, B, P], 1, 1, 5);
        let gops = split_gops(&s).unwrap();
        assert_eq!(dependent_frames(&gops[0], 1).unwrap(), [0, 2].into());
        assert_eq!(dependent_frames(&gops[0], 3).unwrap(), [0, 1, 2, 4].into());
        assert_eq!(dependent_frames(&gops[0], 2).unwrap(), [0, 1].into());
    }

    #[test]
    fn chunking_balances_gops() {
        let sizes = |n_gops: usize, workers: usize| {
            let iframes: Vec<usize> = (0..n_gops).map(|g| g * 10).collect();
            let s = synthetic_stream(&types_with_iframes(n_gops * 10, &iframes), 1, 1, 6);
            chunk_at_iframes(&s, workers).unwrap().iter().map(|c| c.gops.len()).collect::<Vec<_>>()
        };
        assert_eq!(sizes(4, 2), vec![2, 2]);
        assert_eq!(sizes(5, 2), vec![3, 2]);
        assert_eq!(sizes(1, 4), vec![1]);
        assert_eq!(sizes(7, 3), vec![3, 2, 2]);
    }

    proptest! {
        #[test]
        fn random_streams_round_trip(seed in any::<u64>(), n in 1usize..12, mb_w in 1usize..6, mb_h in 1usize..6, every in 1usize..5) {
            let iframes: Vec<usize> = (0..n).step_by(every).collect();
            let s = synthetic_stream(&types_with_iframes(n, &iframes), mb_w, mb_h, seed);
            let (buf, back) = round_trip(&s);
            prop_assert_eq!(&back, &s);
            let (buf2, _) = round_trip(&back);
            prop_assert_eq!(buf, buf2);
        }

        #[test]
        fn gops_flatten_to_stream(n in 1usize..80, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let iframes: Vec<usize> = (0..n).filter(|&i| i == 0 || rng.random_bool(0.1)).collect();
            let s = synthetic_stream(&types_with_iframes(n, &iframes), 1, 1, seed);
            let gops = split_gops(&s).unwrap();
            let flat: Vec<usize> = gops.iter().flat_map(|g| g.frames.iter().map(|f| f.frame_index)).collect();
            prop_assert_eq!(flat, (0..n).collect::<Vec<_>>());
            for g in &gops {
                prop_assert_eq!(g.frames[0].frame_type, FrameType::I);
                prop_assert!(g.frames[1..].iter().all(|f| f.frame_type != FrameType::I));
                for k in 0..g.len() {
                    prop_assert_eq!(dependent_frames(g, k).unwrap().len(), k);
                }
            }
            for w in 1..6 {
                let chunks = chunk_gops(gops.clone(), w);
                let sizes: Vec<usize> = chunks.iter().map(|c| c.gops.len()).collect();
                let (mx, mn) = (*sizes.iter().max().unwrap(), *sizes.iter().min().unwrap());
                prop_assert!(mx - mn <= 1);
                prop_assert!(sizes.windows(2).all(|p| p[0] >= p[1]));
                let flat: Vec<usize> = chunks.iter().flat_map(|c| c.gops.iter().map(|g| g.gop_index)).collect();
                prop_assert_eq!(flat, (0..gops.len()).collect::<Vec<_>>());
            }
        }
    }
}
