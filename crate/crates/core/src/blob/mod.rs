//! Motion-mask detection over compressed metadata.
//!
//! [`features`] turns a window of [`FrameMeta`](crate::meta::FrameMeta) into the
//! network input, [`net`] is the BlobNet-lite encoder/decoder, [`mog`] is the
//! pixel-domain background model that labels training data, and [`mask`] bridges
//! the two resolutions.

pub mod features;
pub mod mask;
pub mod mog;
pub mod net;

pub use features::{build_features, FeatureTensor, MV_SCALE};
pub use mask::{make_targets, threshold_mask, Bitmap};
pub use mog::{MogParams, MogState};
pub use net::{blobnet_forward, blobnet_train, BlobNetModel, TrainConfig, TrainLog};
