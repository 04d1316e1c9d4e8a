//! Linking per-frame boxes into video-spanning paths.
//!
//! A path's score is the sum of its box confidences plus a weighted sum of
//! consecutive-frame IoUs; the exact maximizer over all one-box-per-frame
//! paths is found by dynamic programming. Multiple paths come out greedily:
//! extract, remove the used boxes, repeat.

use thiserror::Error;

use crate::geom::iou;
use crate::tube::{ScoredBox, TubePath, VideoDetections};

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("frame {frame} has no boxes; cannot span the video")]
    EmptyFrame { frame: usize },
    #[error("streams disagree: {0}")]
    StreamMismatch(String),
}

/// Linking knobs: the unary/pairwise trade-off and a cap on greedy passes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkConfig {
    pub lambda0: f64,
    pub max_paths: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            lambda0: 1.0,
            max_paths: 100,
        }
    }
}

/// A linked path together with its score under the config that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredPath {
    pub path: TubePath,
    pub score: f64,
}

/// Sum of confidences plus `lambda0` times the summed IoU of consecutive
/// boxes. A single-frame path has no pairwise term.
pub fn path_score(path: &TubePath, lambda0: f64) -> f64 {
    let boxes = path.boxes();
    let unary: f64 = boxes.iter().map(|b| b.conf).sum();
    let pairwise: f64 = boxes
        .windows(2)
        .map(|pair| iou(pair[1].bbox, pair[0].bbox))
        .sum();
    unary + lambda0 * pairwise
}

/// DP over frames: per (frame, box) the best score of any path ending there,
/// with back-pointers. Ties break to the lowest predecessor index, and the
/// final path backtracks from the lowest-index maximal terminal.
fn viterbi_frames(frames: &[Vec<ScoredBox>], lambda0: f64) -> Result<(Vec<usize>, f64), LinkError> {
    for (frame, boxes) in frames.iter().enumerate() {
        if boxes.is_empty() {
            return Err(LinkError::EmptyFrame { frame });
        }
    }

    let mut best: Vec<f64> = frames[0].iter().map(|b| b.conf).collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(frames.len());

    for t in 1..frames.len() {
        let prev_boxes = &frames[t - 1];
        let mut next = vec![0.0; frames[t].len()];
        let mut from = vec![0usize; frames[t].len()];
        for (j, b) in frames[t].iter().enumerate() {
            let mut best_prev = f64::NEG_INFINITY;
            let mut best_k = 0;
            for (k, p) in prev_boxes.iter().enumerate() {
                let candidate = best[k] + lambda0 * iou(b.bbox, p.bbox);
                if candidate > best_prev {
                    best_prev = candidate;
                    best_k = k;
                }
            }
            next[j] = b.conf + best_prev;
            from[j] = best_k;
        }
        best = next;
        back.push(from);
    }

    let mut terminal = 0;
    for j in 1..best.len() {
        if best[j] > best[terminal] {
            terminal = j;
        }
    }
    let score = best[terminal];

    let mut picks = vec![0usize; frames.len()];
    picks[frames.len() - 1] = terminal;
    for t in (1..frames.len()).rev() {
        picks[t - 1] = back[t - 1][picks[t]];
    }
    Ok((picks, score))
}

/// The exact best full-length path through the video.
///
/// Every frame must contain at least one box; the returned score is the
/// maximum of [`path_score`] over all one-box-per-frame paths.
pub fn viterbi_link(video: &VideoDetections, config: &LinkConfig) -> Result<ScoredPath, LinkError> {
    let frames: Vec<Vec<ScoredBox>> = video.frames().iter().map(|f| f.boxes.clone()).collect();
    let (picks, score) = viterbi_frames(&frames, config.lambda0)?;
    let boxes = picks
        .iter()
        .enumerate()
        .map(|(t, &j)| frames[t][j])
        .collect();
    Ok(ScoredPath {
        path: TubePath::new(0, boxes).expect("video has at least one frame"),
        score,
    })
}

/// Greedy multi-path extraction: link, remove the chosen boxes, link again.
///
/// Stops when any frame runs out of boxes or `max_paths` is reached; starts
/// empty-handed (returns no paths) if some frame is empty from the outset.
/// Paths come back in extraction order, which is not necessarily by score.
pub fn extract_paths(video: &VideoDetections, config: &LinkConfig) -> Vec<ScoredPath> {
    let mut frames: Vec<Vec<ScoredBox>> = video.frames().iter().map(|f| f.boxes.clone()).collect();
    let mut paths = Vec::new();

    while paths.len() < config.max_paths {
        let (picks, score) = match viterbi_frames(&frames, config.lambda0) {
            Ok(result) => result,
            Err(LinkError::EmptyFrame { .. }) => break,
            Err(_) => unreachable!(),
        };
        let boxes: Vec<ScoredBox> = picks
            .iter()
            .enumerate()
            .map(|(t, &j)| frames[t][j])
            .collect();
        for (t, &j) in picks.iter().enumerate() {
            frames[t].remove(j);
        }
        paths.push(ScoredPath {
            path: TubePath::new(0, boxes).expect("nonempty by construction"),
            score,
        });
    }
    paths
}

/// Fuses two detection streams by per-frame concatenation, first stream's
/// boxes first. No deduplication or rescoring happens.
pub fn fuse_streams(
    a: &VideoDetections,
    b: &VideoDetections,
) -> Result<VideoDetections, LinkError> {
    if a.video_id() != b.video_id() {
        return Err(LinkError::StreamMismatch(format!(
            "video ids differ: {} vs {}",
            a.video_id(),
            b.video_id()
        )));
    }
    if a.len() != b.len() {
        return Err(LinkError::StreamMismatch(format!(
            "lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let merged = a
        .frames()
        .iter()
        .zip(b.frames())
        .map(|(fa, fb)| {
            let mut boxes = fa.boxes.clone();
            boxes.extend_from_slice(&fb.boxes);
            boxes
        })
        .collect();
    Ok(VideoDetections::from_frame_boxes(a.video_id(), merged).expect("same shape as inputs"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Box2D;

    fn sb(x: f64, conf: f64) -> ScoredBox {
        ScoredBox::new(Box2D::new(x, 0.5, 0.2, 0.2), conf, 0.0, 0.0)
    }

    fn video(frames: Vec<Vec<ScoredBox>>) -> VideoDetections {
        VideoDetections::from_frame_boxes("v", frames).unwrap()
    }

    #[test]
    fn single_frame_score_is_conf() {
        let p = TubePath::new(0, vec![sb(0.5, 0.7)]).unwrap();
        assert_eq!(path_score(&p, 2.0), 0.7);
    }

    #[test]
    fn identical_boxes_add_full_overlap() {
        let p = TubePath::new(0, vec![sb(0.5, 0.5), sb(0.5, 0.5)]).unwrap();
        assert!((path_score(&p, 2.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_reduces_to_conf_sum() {
        let p = TubePath::new(0, vec![sb(0.1, 0.3), sb(0.9, 0.4), sb(0.4, 0.2)]).unwrap();
        assert!((path_score(&p, 0.0) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn one_box_per_frame_is_forced() {
        let v = video(vec![vec![sb(0.1, 0.2)], vec![sb(0.2, 0.3)], vec![sb(0.3, 0.4)]]);
        let linked = viterbi_link(&v, &LinkConfig::default()).unwrap();
        assert_eq!(linked.path.len(), 3);
        assert_eq!(linked.path.boxes()[1].conf, 0.3);
    }

    #[test]
    fn per_frame_argmax_with_tie_break() {
        // lambda0 = 0 decouples frames; the last frame ties and must pick
        // the lower index.
        let v = video(vec![
            vec![sb(0.1, 0.9), sb(0.9, 0.1)],
            vec![sb(0.1, 0.2), sb(0.9, 0.8)],
            vec![sb(0.1, 0.5), sb(0.9, 0.5)],
        ]);
        let config = LinkConfig {
            lambda0: 0.0,
            max_paths: 1,
        };
        let linked = viterbi_link(&v, &config).unwrap();
        assert!((linked.score - 2.2).abs() < 1e-12);
        let picked: Vec<f64> = linked.path.boxes().iter().map(|b| b.bbox.x()).collect();
        assert_eq!(picked, vec![0.1, 0.9, 0.1]);
    }

    #[test]
    fn empty_frame_is_an_error() {
        let v = video(vec![vec![sb(0.1, 0.2)], vec![]]);
        assert_eq!(
            viterbi_link(&v, &LinkConfig::default()).unwrap_err(),
            LinkError::EmptyFrame { frame: 1 }
        );
        assert!(extract_paths(&v, &LinkConfig::default()).is_empty());
    }

    #[test]
    fn extraction_empties_single_box_frames() {
        let v = video(vec![vec![sb(0.1, 0.2)], vec![sb(0.2, 0.3)]]);
        let paths = extract_paths(&v, &LinkConfig::default());
        assert_eq!(paths.len(), 1);
    }

    #[test]
    fn max_paths_caps_extraction() {
        let v = video(vec![
            vec![sb(0.1, 0.2), sb(0.5, 0.3)],
            vec![sb(0.2, 0.3), sb(0.6, 0.1)],
        ]);
        let config = LinkConfig {
            lambda0: 1.0,
            max_paths: 1,
        };
        assert_eq!(extract_paths(&v, &config).len(), 1);
    }

    #[test]
    fn fuse_concatenates_in_order() {
        let a = video(vec![vec![sb(0.1, 0.2), sb(0.2, 0.3)], vec![sb(0.3, 0.4)]]);
        let b = video(vec![vec![sb(0.7, 0.5)], vec![sb(0.8, 0.6), sb(0.9, 0.7)]]);
        let fused = fuse_streams(&a, &b).unwrap();
        assert_eq!(fused.frames()[0].boxes.len(), 3);
        assert_eq!(fused.frames()[1].boxes.len(), 3);
        assert_eq!(fused.frames()[0].boxes[2].conf, 0.5);
    }

    #[test]
    fn fuse_rejects_mismatched_streams() {
        let a = video(vec![vec![sb(0.1, 0.2)]]);
        let b = video(vec![vec![sb(0.1, 0.2)], vec![sb(0.2, 0.3)]]);
        assert!(matches!(
            fuse_streams(&a, &b),
            Err(LinkError::StreamMismatch(_))
        ));
        let c = VideoDetections::from_frame_boxes("other", vec![vec![sb(0.1, 0.2)]]).unwrap();
        assert!(matches!(
            fuse_streams(&a, &c),
            Err(LinkError::StreamMismatch(_))
        ));
    }
}
