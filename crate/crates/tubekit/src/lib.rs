//! Spatio-temporal action proposals from per-frame detection boxes.
//!
//! The crate covers the whole desk-scale pipeline:
//!
//! - [`geom`] / [`tube`]: normalized boxes, IoU, per-frame detections and
//!   temporal tubes;
//! - [`grid`]: the K x K x (B·5+2) frame tensor, its decoder and the
//!   training-target encoder with responsibility masks;
//! - [`net`]: static and recurrent regression heads, the five-term grid
//!   loss, analytic gradients verified against finite differences,
//!   backpropagation through time and Adam;
//! - [`link`]: exact Viterbi linking of boxes into video-spanning paths and
//!   greedy multi-path extraction;
//! - [`trim`]: running-average smoothing, score peaks and trimming of paths
//!   into action segments;
//! - [`metrics`]: tube overlap, ABO/MABO and recall-vs-threshold curves.
//!
//! The companion `tubekit-cli` crate adds file formats, a synthetic-video
//! generator and the end-to-end command-line pipeline. A narrative guide
//! with runnable examples lives in `book/`; its code snippets compile and
//! run as doc-tests of this crate.

pub mod geom;
pub mod grid;
pub mod link;
pub mod metrics;
pub mod net;
pub mod trim;
pub mod tube;

pub use geom::{iou, mirror_box, Box2D};
pub use tube::{FrameDetections, GroundTruthTube, ScoredBox, TubePath, VideoDetections};

// The guide's code blocks double as doc-tests so the book can never drift
// from the library. Chapters about the CLI and the synthetic generator are
// attached to the tubekit-cli crate instead.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/boxes-and-tubes.md")]
    mod boxes_and_tubes {}
    #[doc = include_str!("../../../book/src/grid-encoding.md")]
    mod grid_encoding {}
    #[doc = include_str!("../../../book/src/grid-loss.md")]
    mod grid_loss {}
    #[doc = include_str!("../../../book/src/regression-heads.md")]
    mod regression_heads {}
    #[doc = include_str!("../../../book/src/path-linking.md")]
    mod path_linking {}
    #[doc = include_str!("../../../book/src/path-trimming.md")]
    mod path_trimming {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
}
