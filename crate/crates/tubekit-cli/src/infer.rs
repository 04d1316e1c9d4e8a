//! Turning trained heads and frame features into per-frame detections.

use tubekit::grid::decode;
use tubekit::net::{forward_sequence, NetError, RecurrentHead, StaticHead};
use tubekit::{ScoredBox, VideoDetections};

/// Decodes the static head frame by frame; frames are independent.
pub fn infer_static(
    head: &StaticHead,
    video_id: &str,
    features: &[Vec<f64>],
) -> Result<VideoDetections, NetError> {
    let mut frames: Vec<Vec<ScoredBox>> = Vec::with_capacity(features.len());
    for x in features {
        frames.push(decode(&head.forward(x)?));
    }
    Ok(VideoDetections::from_frame_boxes(video_id, frames).expect("one frame per feature row"))
}

/// Runs the recurrent head over the sequence in temporal order, carrying
/// hidden state, then decodes every frame tensor.
pub fn infer_recurrent(
    head: &RecurrentHead,
    video_id: &str,
    features: &[Vec<f64>],
) -> Result<VideoDetections, NetError> {
    let tensors = forward_sequence(head, features)?;
    let frames: Vec<Vec<ScoredBox>> = tensors.iter().map(decode).collect();
    Ok(VideoDetections::from_frame_boxes(video_id, frames).expect("one frame per feature row"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use tubekit::grid::GridShape;

    #[test]
    fn box_counts_match_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shape = GridShape::new(3, 2).unwrap();
        let head = StaticHead::init(8, shape, &mut rng);
        let features: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let video = infer_static(&head, "v", &features).unwrap();
        assert_eq!(video.len(), 4);
        for frame in video.frames() {
            assert_eq!(frame.boxes.len(), 3 * 3 * 2);
        }
    }
}
