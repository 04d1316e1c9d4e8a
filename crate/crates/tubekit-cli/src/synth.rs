//! Synthetic untrimmed videos: a rectangle drifting over a noisy background,
//! visible only during the action segment, plus oracle detections that mimic
//! a well-trained detector.
//!
//! All randomness flows from the spec's seed through ChaCha8 (keyed with
//! `seed_from_u64`), with a fixed draw order per frame: pixel noise first,
//! then score jitter, then box jitter and noise boxes. Identical specs are
//! therefore bitwise reproducible on any platform.
//!
//! The oracle score series follow the transition-pattern idea the trimmer
//! relies on: background score tents peak right next to the action
//! boundaries (there is no transition to mark when the action spans the
//! whole clip, so those series stay tent-free), actionness rises to a hump
//! at the segment midpoint, and the interior background response is a
//! noise-free shallow bowl so that smoothing cannot hallucinate interior
//! background peaks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tubekit::{Box2D, GroundTruthTube, ScoredBox, VideoDetections};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("action segment [{start}, {end}] does not fit a {frames}-frame video")]
    SegmentOutOfRange {
        start: usize,
        end: usize,
        frames: usize,
    },
    #[error("video must have at least one frame and a positive feature side")]
    DegenerateSpec,
    #[error("rectangle size must be positive and at most 1")]
    BadRectangle,
}

/// Everything that defines one synthetic video.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub video_id: String,
    /// Video length T.
    pub frames: usize,
    /// Rendered frames are `feature_side x feature_side` grayscale pixels.
    pub feature_side: usize,
    /// Rectangle center at frame 0.
    pub start: (f64, f64),
    /// Rectangle extent (w, h), fractions of the image.
    pub size: (f64, f64),
    /// Per-frame center displacement.
    pub velocity: (f64, f64),
    /// Action segment `[a_s, a_e]`, inclusive.
    pub action: (usize, usize),
    /// Amplitude of pixel noise, score jitter and box jitter.
    pub noise: f64,
    pub class: String,
    pub seed: u64,
}

/// One generated video: per-frame features, the ground-truth tube and the
/// oracle detections.
#[derive(Clone, Debug)]
pub struct SyntheticVideo {
    pub spec: SyntheticSpec,
    pub features: Vec<Vec<f64>>,
    pub gt: GroundTruthTube,
    pub detections: VideoDetections,
}

impl SyntheticVideo {
    /// `Some(box)` for frames inside the action segment, `None` outside:
    /// the per-frame regression targets.
    pub fn frame_targets(&self) -> Vec<Option<Box2D>> {
        let (a_s, a_e) = self.spec.action;
        (0..self.spec.frames)
            .map(|t| {
                if t >= a_s && t <= a_e {
                    Some(*self.gt.box_at(t).expect("segment frame"))
                } else {
                    None
                }
            })
            .collect()
    }
}

/// The rectangle's clamped center at frame `t`: it never leaves the image.
fn center_at(spec: &SyntheticSpec, t: usize) -> (f64, f64) {
    let (w, h) = spec.size;
    let cx = (spec.start.0 + spec.velocity.0 * t as f64).clamp(w / 2.0, 1.0 - w / 2.0);
    let cy = (spec.start.1 + spec.velocity.1 * t as f64).clamp(h / 2.0, 1.0 - h / 2.0);
    (cx, cy)
}

/// Exact coverage of one pixel cell by the rectangle, in [0, 1].
fn pixel_coverage(lo: f64, hi: f64, rect_lo: f64, rect_hi: f64) -> f64 {
    let overlap = (hi.min(rect_hi) - lo.max(rect_lo)).max(0.0);
    overlap / (hi - lo)
}

/// Triangular bump of the given height and slope, centered at `apex`.
fn tent(t: f64, apex: f64, top: f64, slope: f64) -> f64 {
    (top - slope * (t - apex).abs()).max(0.0)
}

const AC_OUTSIDE: f64 = 0.1;
const AC_INSIDE_BASE: f64 = 0.8;
const AC_HUMP: f64 = 0.1;
const BG_OUTSIDE: f64 = 0.3;
const BG_INSIDE_BASE: f64 = 0.1;
const BG_BOWL_SLOPE: f64 = 0.002;
const BG_TENT_TOP: f64 = 0.95;
const BG_TENT_SLOPE: f64 = 0.2;
const CONF_ON_TARGET: f64 = 0.9;
const CONF_NOISE_BOX: f64 = 0.15;

/// Actionness series value at frame `t` (before jitter).
fn actionness(spec: &SyntheticSpec, t: usize) -> f64 {
    let (a_s, a_e) = spec.action;
    if t < a_s || t > a_e {
        return AC_OUTSIDE;
    }
    let mid = (a_s + a_e) as f64 / 2.0;
    let half = ((a_e - a_s) as f64 / 2.0).max(1.0);
    AC_INSIDE_BASE + AC_HUMP * (1.0 - (t as f64 - mid).abs() / half)
}

/// Background series value at frame `t` (before jitter on the outside
/// plateau). Tents mark the transitions just outside the segment; a clip
/// fully covered by the action has no transitions and keeps the bare bowl.
fn background(spec: &SyntheticSpec, t: usize) -> (f64, bool) {
    let (a_s, a_e) = spec.action;
    let inside = t >= a_s && t <= a_e;
    let mid = (a_s + a_e) as f64 / 2.0;

    let mut value = if inside {
        BG_INSIDE_BASE + BG_BOWL_SLOPE * (t as f64 - mid).abs()
    } else {
        BG_OUTSIDE
    };
    if a_s > 0 {
        value = value.max(tent(t as f64, a_s as f64 - 1.0, BG_TENT_TOP, BG_TENT_SLOPE));
    }
    if a_e + 1 < spec.frames {
        value = value.max(tent(t as f64, a_e as f64 + 1.0, BG_TENT_TOP, BG_TENT_SLOPE));
    }
    // Jitter only the flat outside plateau: structured regions must keep
    // their exact shape or smoothing could move the transition peaks.
    let jitter_allowed = !inside && value == BG_OUTSIDE;
    (value, jitter_allowed)
}

/// Generates one video deterministically from its spec.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticVideo, SynthError> {
    if spec.frames == 0 || spec.feature_side == 0 {
        return Err(SynthError::DegenerateSpec);
    }
    let (a_s, a_e) = spec.action;
    if a_s > a_e || a_e >= spec.frames {
        return Err(SynthError::SegmentOutOfRange {
            start: a_s,
            end: a_e,
            frames: spec.frames,
        });
    }
    let (w, h) = spec.size;
    if !(w > 0.0 && w <= 1.0 && h > 0.0 && h <= 1.0) {
        return Err(SynthError::BadRectangle);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let side = spec.feature_side;
    let mut features = Vec::with_capacity(spec.frames);
    let mut gt_boxes = Vec::with_capacity(a_e - a_s + 1);
    let mut frames = Vec::with_capacity(spec.frames);

    for t in 0..spec.frames {
        let (cx, cy) = center_at(spec, t);
        let inside = t >= a_s && t <= a_e;

        // Frame rendering: exact rectangle coverage per pixel plus noise.
        let mut pixels = Vec::with_capacity(side * side);
        for py in 0..side {
            let y_lo = py as f64 / side as f64;
            let y_hi = (py + 1) as f64 / side as f64;
            let cov_y = if inside {
                pixel_coverage(y_lo, y_hi, cy - h / 2.0, cy + h / 2.0)
            } else {
                0.0
            };
            for px in 0..side {
                let x_lo = px as f64 / side as f64;
                let x_hi = (px + 1) as f64 / side as f64;
                let cov = if inside {
                    cov_y * pixel_coverage(x_lo, x_hi, cx - w / 2.0, cx + w / 2.0)
                } else {
                    0.0
                };
                let noise = rng.random_range(-1.0..1.0) * spec.noise;
                pixels.push(cov + noise);
            }
        }
        features.push(pixels);

        // Score series shared by every box of the frame.
        let ac_jitter = rng.random_range(-1.0..1.0) * spec.noise * 0.5;
        let bg_jitter = rng.random_range(-1.0..1.0) * spec.noise * 0.5;
        let s_ac = actionness(spec, t) + ac_jitter;
        let (bg_value, jitter_allowed) = background(spec, t);
        let s_bg = if jitter_allowed { bg_value + bg_jitter } else { bg_value };

        // Boxes: the rectangle (jittered) inside the segment, plus noise
        // boxes everywhere so no frame is empty.
        let mut boxes = Vec::new();
        let dx = rng.random_range(-1.0..1.0) * spec.noise * 0.5;
        let dy = rng.random_range(-1.0..1.0) * spec.noise * 0.5;
        let conf_jitter = rng.random_range(-1.0..1.0) * spec.noise;
        if inside {
            let gt_box = Box2D::new(cx, cy, w, h);
            gt_boxes.push(gt_box);
            boxes.push(ScoredBox::new(
                Box2D::new(cx + dx, cy + dy, w, h),
                CONF_ON_TARGET + conf_jitter,
                s_ac,
                s_bg,
            ));
        }
        for _ in 0..2 {
            let nb = Box2D::new(
                rng.random_range(0.1..0.9),
                rng.random_range(0.1..0.9),
                rng.random_range(0.1..0.3),
                rng.random_range(0.1..0.3),
            );
            let conf = CONF_NOISE_BOX + rng.random_range(-1.0..1.0) * spec.noise;
            boxes.push(ScoredBox::new(nb, conf, s_ac, s_bg));
        }
        frames.push(boxes);
    }

    let gt = GroundTruthTube::new(a_s, gt_boxes, spec.class.clone()).expect("segment is nonempty");
    let detections =
        VideoDetections::from_frame_boxes(spec.video_id.clone(), frames).expect("frames 0..T-1");
    Ok(SyntheticVideo {
        spec: spec.clone(),
        features,
        gt,
        detections,
    })
}

/// Knobs of the dataset sampler used by `synth` and the tests.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetParams {
    pub videos: usize,
    pub frames: usize,
    pub feature_side: usize,
    /// Fraction of videos whose action occupies only part of the timeline.
    pub untrimmed_fraction: f64,
    pub noise: f64,
    pub min_action_len: usize,
    pub max_action_len: usize,
    pub class: String,
    pub seed: u64,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            videos: 100,
            frames: 50,
            feature_side: 16,
            // Roughly a quarter of the corpus is untrimmed by default.
            untrimmed_fraction: 0.25,
            noise: 0.02,
            min_action_len: 10,
            max_action_len: 30,
            class: "action".to_string(),
            seed: 0,
        }
    }
}

/// Samples per-video specs from a master seed. Untrimmed videos keep five
/// frames of margin on both sides of the segment so the transition tents
/// fit without clipping.
pub fn sample_specs(params: &DatasetParams) -> Vec<SyntheticSpec> {
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    (0..params.videos)
        .map(|index| {
            let untrimmed = master.random_range(0.0..1.0) < params.untrimmed_fraction;
            // Clips shorter than the margins plus a minimal segment cannot
            // host an interior action.
            let untrimmed = untrimmed && params.frames >= 12;
            let action = if untrimmed {
                let len = master.random_range(params.min_action_len..=params.max_action_len);
                let len = len.min(params.frames.saturating_sub(10)).max(1);
                let start = master.random_range(5..=params.frames - 5 - len);
                (start, start + len - 1)
            } else {
                (0, params.frames - 1)
            };
            SyntheticSpec {
                video_id: format!("synth-{index:04}"),
                frames: params.frames,
                feature_side: params.feature_side,
                start: (
                    master.random_range(0.25..0.75),
                    master.random_range(0.25..0.75),
                ),
                size: (0.3, 0.3),
                velocity: (
                    master.random_range(-0.004..0.004),
                    master.random_range(-0.004..0.004),
                ),
                action,
                noise: params.noise,
                class: params.class.clone(),
                seed: master.random(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> SyntheticSpec {
        SyntheticSpec {
            video_id: "v".to_string(),
            frames: 50,
            feature_side: 16,
            start: (0.4, 0.5),
            size: (0.3, 0.3),
            velocity: (0.002, -0.001),
            action: (15, 34),
            noise: 0.02,
            class: "action".to_string(),
            seed: 7,
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = base_spec();
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.detections, b.detections);
        assert_eq!(a.gt, b.gt);
    }

    #[test]
    fn static_scene_repeats_boxes() {
        let mut spec = base_spec();
        spec.velocity = (0.0, 0.0);
        spec.noise = 0.0;
        let video = generate_synthetic(&spec).unwrap();
        let first = video.gt.boxes()[0];
        for b in video.gt.boxes() {
            assert_eq!(*b, first);
        }
        // Zero noise also makes frame features repeat inside the segment.
        assert_eq!(video.features[15], video.features[20]);
    }

    #[test]
    fn segment_out_of_range_rejected() {
        let mut spec = base_spec();
        spec.action = (15, 50);
        assert_eq!(
            generate_synthetic(&spec).unwrap_err(),
            SynthError::SegmentOutOfRange {
                start: 15,
                end: 50,
                frames: 50
            }
        );
    }

    #[test]
    fn every_frame_has_boxes_and_segment_has_target_box() {
        let video = generate_synthetic(&base_spec()).unwrap();
        for (t, frame) in video.detections.frames().iter().enumerate() {
            assert!(!frame.boxes.is_empty());
            let expected = if (15..=34).contains(&t) { 3 } else { 2 };
            assert_eq!(frame.boxes.len(), expected);
        }
        assert_eq!(video.gt.start(), 15);
        assert_eq!(video.gt.end(), 34);
    }

    #[test]
    fn full_span_video_has_flat_background_series() {
        let mut spec = base_spec();
        spec.action = (0, 49);
        let video = generate_synthetic(&spec).unwrap();
        // No transitions: the background series is the bare bowl, strictly
        // V-shaped, so it offers no interior peaks to the trimmer.
        let series: Vec<f64> = video
            .detections
            .frames()
            .iter()
            .map(|f| f.boxes[0].s_bg)
            .collect();
        let mid = 49.0 / 2.0;
        for (t, v) in series.iter().enumerate() {
            let expected = BG_INSIDE_BASE + BG_BOWL_SLOPE * (t as f64 - mid).abs();
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn sampler_respects_untrimmed_fraction_extremes() {
        let mut params = DatasetParams {
            videos: 20,
            untrimmed_fraction: 0.0,
            ..DatasetParams::default()
        };
        for spec in sample_specs(&params) {
            assert_eq!(spec.action, (0, params.frames - 1));
        }
        params.untrimmed_fraction = 1.0;
        for spec in sample_specs(&params) {
            assert!(spec.action.0 >= 5);
            assert!(spec.action.1 + 5 < params.frames);
            assert!(spec.action.1 - spec.action.0 + 1 >= params.min_action_len);
        }
    }
}
