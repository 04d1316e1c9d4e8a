//! Frame-level detections and temporal tubes: the data model shared by the
//! linker, trimmer and metrics.

use thiserror::Error;

use crate::geom::Box2D;

#[derive(Debug, Error, PartialEq)]
pub enum TubeError {
    #[error("a path must contain at least one box")]
    EmptyPath,
    #[error("video frames must be indexed 0..T-1 contiguously; frame {position} has index {found}")]
    NonContiguousFrames { position: usize, found: usize },
    #[error("a video must contain at least one frame")]
    EmptyVideo,
}

/// A detection box together with the scores the network attaches to it.
///
/// `conf` is the regressed box confidence and is deliberately unbounded:
/// the loss penalizes raw prediction error, so nothing clamps it. `s_ac`
/// and `s_bg` are the actionness/background scores of the cell the box
/// came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredBox {
    pub bbox: Box2D,
    pub conf: f64,
    pub s_ac: f64,
    pub s_bg: f64,
}

impl ScoredBox {
    pub fn new(bbox: Box2D, conf: f64, s_ac: f64, s_bg: f64) -> Self {
        Self {
            bbox,
            conf,
            s_ac,
            s_bg,
        }
    }
}

/// All detections of one frame. Box order is stable: an index identifies a
/// box within its frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameDetections {
    pub frame_index: usize,
    pub boxes: Vec<ScoredBox>,
}

/// Per-frame detections over a whole video, frames indexed 0..T-1.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoDetections {
    video_id: String,
    frames: Vec<FrameDetections>,
}

impl VideoDetections {
    /// Validates that frame indices run 0..T-1 without gaps.
    pub fn new(video_id: impl Into<String>, frames: Vec<FrameDetections>) -> Result<Self, TubeError> {
        if frames.is_empty() {
            return Err(TubeError::EmptyVideo);
        }
        for (position, frame) in frames.iter().enumerate() {
            if frame.frame_index != position {
                return Err(TubeError::NonContiguousFrames {
                    position,
                    found: frame.frame_index,
                });
            }
        }
        Ok(Self {
            video_id: video_id.into(),
            frames,
        })
    }

    /// Builds a video from per-frame box lists, assigning indices 0..T-1.
    pub fn from_frame_boxes(
        video_id: impl Into<String>,
        boxes: Vec<Vec<ScoredBox>>,
    ) -> Result<Self, TubeError> {
        let frames = boxes
            .into_iter()
            .enumerate()
            .map(|(frame_index, boxes)| FrameDetections { frame_index, boxes })
            .collect();
        Self::new(video_id, frames)
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn frames(&self) -> &[FrameDetections] {
        &self.frames
    }

    /// Video length T.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// A temporally contiguous sequence of boxes, one per frame of `[start, end]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TubePath {
    start: usize,
    boxes: Vec<ScoredBox>,
}

impl TubePath {
    pub fn new(start: usize, boxes: Vec<ScoredBox>) -> Result<Self, TubeError> {
        if boxes.is_empty() {
            return Err(TubeError::EmptyPath);
        }
        Ok(Self { start, boxes })
    }

    /// First frame index m.
    pub fn start(&self) -> usize {
        self.start
    }

    /// Last frame index n (inclusive).
    pub fn end(&self) -> usize {
        self.start + self.boxes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn boxes(&self) -> &[ScoredBox] {
        &self.boxes
    }

    /// The box at absolute frame index `frame`, if the path covers it.
    pub fn box_at(&self, frame: usize) -> Option<&ScoredBox> {
        frame
            .checked_sub(self.start)
            .and_then(|offset| self.boxes.get(offset))
    }
}

/// An annotated ground-truth tube with its action class.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthTube {
    start: usize,
    boxes: Vec<Box2D>,
    class_label: String,
}

impl GroundTruthTube {
    pub fn new(
        start: usize,
        boxes: Vec<Box2D>,
        class_label: impl Into<String>,
    ) -> Result<Self, TubeError> {
        if boxes.is_empty() {
            return Err(TubeError::EmptyPath);
        }
        Ok(Self {
            start,
            boxes,
            class_label: class_label.into(),
        })
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.start + self.boxes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn boxes(&self) -> &[Box2D] {
        &self.boxes
    }

    pub fn class_label(&self) -> &str {
        &self.class_label
    }

    pub fn box_at(&self, frame: usize) -> Option<&Box2D> {
        frame
            .checked_sub(self.start)
            .and_then(|offset| self.boxes.get(offset))
    }
}
