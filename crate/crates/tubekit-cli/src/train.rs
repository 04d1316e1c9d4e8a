//! Desk-scale training loops for the regression heads.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;
use tubekit::geom::mirror_box;
use tubekit::grid::{encode_target, FrameTarget, GridError};
use tubekit::net::{
    bptt, forward_sequence, static_gradient, AdamState, GateModulation, NetError, RecurrentHead,
    StaticHead,
};
use tubekit::Box2D;

use crate::config::PipelineConfig;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptySet,
    #[error("feature dimension {found} differs from {expected}")]
    InconsistentFeatures { expected: usize, found: usize },
    #[error("mirroring needs square frames, but dimension {0} is not a perfect square")]
    NotSquare(usize),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// One training video: per-frame features and the per-frame regression
/// target (the ground-truth box while the action is on screen).
#[derive(Clone, Debug)]
pub struct TrainVideo {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<Option<Box2D>>,
}

/// Which head `train-toy` fits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadKind {
    Static,
    Lstm,
    Rnn,
}

pub struct TrainOutcome<H> {
    pub head: H,
    /// Mean per-sample loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

fn check_features(videos: &[TrainVideo]) -> Result<usize, TrainError> {
    let dim = videos
        .first()
        .and_then(|v| v.features.first())
        .map(|f| f.len())
        .ok_or(TrainError::EmptySet)?;
    for video in videos {
        for frame in &video.features {
            if frame.len() != dim {
                return Err(TrainError::InconsistentFeatures {
                    expected: dim,
                    found: frame.len(),
                });
            }
        }
    }
    Ok(dim)
}

fn frame_target(
    gt: &Option<Box2D>,
    pred: &tubekit::grid::GridTensor,
) -> Result<FrameTarget, GridError> {
    let boxes: Vec<Box2D> = gt.iter().copied().collect();
    Ok(encode_target(&boxes, pred)?.0)
}

/// Horizontal mirror of one training video: each pixel row flips
/// left-to-right and target boxes mirror in coordinate space.
pub fn mirror_video(video: &TrainVideo, feature_side: usize) -> TrainVideo {
    let features = video
        .features
        .iter()
        .map(|frame| {
            let mut flipped = frame.clone();
            for row in flipped.chunks_mut(feature_side) {
                row.reverse();
            }
            flipped
        })
        .collect();
    let targets = video.targets.iter().map(|t| t.map(mirror_box)).collect();
    TrainVideo { features, targets }
}

/// Appends a mirrored copy of every video. Frames must be square pixel
/// grids for the flip to make sense.
pub fn with_mirror_augmentation(videos: Vec<TrainVideo>) -> Result<Vec<TrainVideo>, TrainError> {
    let dim = videos
        .first()
        .and_then(|v| v.features.first())
        .map(|f| f.len())
        .ok_or(TrainError::EmptySet)?;
    let side = (dim as f64).sqrt().round() as usize;
    if side * side != dim {
        return Err(TrainError::NotSquare(dim));
    }
    let mirrored: Vec<TrainVideo> = videos.iter().map(|v| mirror_video(v, side)).collect();
    let mut out = videos;
    out.extend(mirrored);
    Ok(out)
}

/// Trains the static per-frame head with mini-batch Adam under the
/// two-stage learning-rate schedule.
pub fn train_static(
    config: &PipelineConfig,
    videos: &[TrainVideo],
) -> Result<TrainOutcome<StaticHead>, TrainError> {
    let input_dim = check_features(videos)?;
    let shape = config.grid_shape();
    let weights = config.loss_weights();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut head = StaticHead::init(input_dim, shape, &mut rng);

    let mut samples: Vec<(usize, usize)> = videos
        .iter()
        .enumerate()
        .flat_map(|(v, video)| (0..video.features.len()).map(move |f| (v, f)))
        .collect();
    if samples.is_empty() {
        return Err(TrainError::EmptySet);
    }

    let mut params = head.params_flat();
    let mut adam = AdamState::new(params.len(), config.lr_initial);
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        adam.set_lr(config.learning_rate(epoch));
        samples.shuffle(&mut rng);
        let mut epoch_loss = 0.0;

        for batch in samples.chunks(config.batch_size.max(1)) {
            let mut grad_sum = vec![0.0; params.len()];
            for &(v, f) in batch {
                let x = &videos[v].features[f];
                let pred = head.forward(x)?;
                let target = frame_target(&videos[v].targets[f], &pred)?;
                let (grads, loss) = static_gradient(&head, x, &target, &weights)?;
                for (acc, g) in grad_sum.iter_mut().zip(&grads) {
                    *acc += g;
                }
                epoch_loss += loss;
            }
            let scale = 1.0 / batch.len() as f64;
            for g in grad_sum.iter_mut() {
                *g *= scale;
            }
            adam.update(&mut params, &grad_sum)?;
            head.set_params_flat(&params)?;
        }
        epoch_losses.push(epoch_loss / samples.len() as f64);
    }

    Ok(TrainOutcome { head, epoch_losses })
}

/// Trains a recurrent head sequence-by-sequence with BPTT over full videos.
pub fn train_recurrent(
    config: &PipelineConfig,
    videos: &[TrainVideo],
    kind: HeadKind,
    hidden_dim: usize,
) -> Result<TrainOutcome<RecurrentHead>, TrainError> {
    let input_dim = check_features(videos)?;
    let shape = config.grid_shape();
    let weights = config.loss_weights();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut head = match kind {
        HeadKind::Lstm => {
            RecurrentHead::init_lstm(input_dim, hidden_dim, shape, GateModulation::default(), &mut rng)
        }
        HeadKind::Rnn => RecurrentHead::init_rnn(input_dim, hidden_dim, shape, &mut rng),
        HeadKind::Static => panic!("static head trains via train_static"),
    };

    let mut order: Vec<usize> = (0..videos.len()).collect();
    let mut params = head.params_flat();
    let mut adam = AdamState::new(params.len(), config.lr_initial);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let frame_count: usize = videos.iter().map(|v| v.features.len()).sum();

    for epoch in 0..config.epochs {
        adam.set_lr(config.learning_rate(epoch));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;

        for &v in &order {
            let video = &videos[v];
            // Targets use the current prediction to pick responsible slots.
            let preds = forward_sequence(&head, &video.features)?;
            let targets: Result<Vec<FrameTarget>, GridError> = video
                .targets
                .iter()
                .zip(&preds)
                .map(|(gt, pred)| frame_target(gt, pred))
                .collect();
            let (grads, loss) = bptt(&head, &video.features, &targets?, &weights)?;
            epoch_loss += loss;
            adam.update(&mut params, &grads)?;
            head.set_params_flat(&params)?;
        }
        epoch_losses.push(epoch_loss / frame_count.max(1) as f64);
    }

    Ok(TrainOutcome { head, epoch_losses })
}

/// Deterministic toy inputs for smoke tests.
pub fn jittered_videos(seed: u64, count: usize, frames: usize, dim: usize) -> Vec<TrainVideo> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let features = (0..frames)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let targets = (0..frames)
                .map(|_| {
                    Some(Box2D::new(
                        rng.random_range(0.2..0.8),
                        rng.random_range(0.2..0.8),
                        0.3,
                        0.3,
                    ))
                })
                .collect();
            TrainVideo { features, targets }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config() -> PipelineConfig {
        PipelineConfig {
            k: 2,
            boxes_per_cell: 1,
            epochs: 12,
            batch_size: 8,
            lr_initial: 1e-2,
            lr_decayed: 1e-3,
            decay_epoch: 10,
            seed: 3,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn static_loss_decreases() {
        let videos = jittered_videos(5, 4, 6, 12);
        let outcome = train_static(&toy_config(), &videos).unwrap();
        let first = outcome.epoch_losses[0];
        let last = *outcome.epoch_losses.last().unwrap();
        assert!(last < first, "loss did not decrease: {first} -> {last}");
    }

    #[test]
    fn recurrent_loss_decreases() {
        let videos = jittered_videos(6, 3, 5, 10);
        for kind in [HeadKind::Lstm, HeadKind::Rnn] {
            let outcome = train_recurrent(&toy_config(), &videos, kind, 8).unwrap();
            let first = outcome.epoch_losses[0];
            let last = *outcome.epoch_losses.last().unwrap();
            assert!(last < first, "{kind:?} loss did not decrease: {first} -> {last}");
        }
    }

    #[test]
    fn empty_set_rejected() {
        assert!(matches!(
            train_static(&toy_config(), &[]),
            Err(TrainError::EmptySet)
        ));
    }

    #[test]
    fn mirroring_is_an_involution() {
        let videos = jittered_videos(9, 1, 3, 16);
        let twice = mirror_video(&mirror_video(&videos[0], 4), 4);
        assert_eq!(twice.features, videos[0].features);
        for (a, b) in twice.targets.iter().zip(&videos[0].targets) {
            let (a, b) = (a.unwrap(), b.unwrap());
            assert!((a.x() - b.x()).abs() < 1e-15);
            assert_eq!((a.y(), a.w(), a.h()), (b.y(), b.w(), b.h()));
        }
    }

    #[test]
    fn augmentation_doubles_and_requires_square_frames() {
        let videos = jittered_videos(10, 2, 3, 16);
        assert_eq!(with_mirror_augmentation(videos).unwrap().len(), 4);
        let odd = jittered_videos(10, 1, 2, 12);
        assert!(matches!(
            with_mirror_augmentation(odd),
            Err(TrainError::NotSquare(12))
        ));
    }
}
