//! Compressed-domain video analytics.
//!
//! The cascade works on encoder metadata (macroblock types, partition modes and
//! motion vectors) instead of decoded pixels:
//!
//! 1. [`blob`] turns metadata windows into per-macroblock motion masks with a small
//!    segmentation network, trained per video on labels harvested by a
//!    mixture-of-Gaussians background model.
//! 2. [`tracking`] groups mask cells into blobs and links them over time (SORT).
//! 3. [`selection`] picks a few anchor frames per GoP so that every track is covered
//!    while decoding as few frames as possible.
//! 4. [`oracle`] stands in for the object detector that runs on anchor frames.
//! 5. [`propagation`] spreads anchor labels along tracks and produces a
//!    query-agnostic [`propagation::FrameAnalysis`].
//! 6. [`query`] answers BP / CNT / LBP / LCNT queries over the persisted analysis.
//!
//! [`scene`] provides the deterministic synthetic world and encoder emulator used as
//! the input source and ground truth; [`pipeline`] wires everything together.

pub mod bbox;
pub mod blob;
pub mod error;
pub mod meta;
pub mod oracle;
pub mod pipeline;
pub mod propagation;
pub mod query;
pub mod scene;
pub mod selection;
pub mod tracking;

pub use bbox::{iou, BBox};
pub use error::{CovaError, Result};
