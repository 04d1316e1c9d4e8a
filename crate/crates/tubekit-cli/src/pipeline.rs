//! The end-to-end pipeline: link per-video detections into paths, trim them
//! into segments, score the result against ground truth.

use std::collections::BTreeMap;
use std::thread;

use thiserror::Error;
use tubekit::link::{extract_paths, path_score, ScoredPath};
use tubekit::metrics::{default_thresholds, report_from_bests, tube_overlap, MetricsReport};
use tubekit::trim::{trim, TrimError};
use tubekit::{GroundTruthTube, VideoDetections};

use crate::config::PipelineConfig;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("duplicate detections for video {0}")]
    DuplicateVideo(String),
    #[error("no ground-truth tubes to evaluate against")]
    NoGroundTruth,
    #[error(transparent)]
    Trim(#[from] TrimError),
}

/// Execution switches that are not part of the numeric configuration.
#[derive(Clone, Copy, Debug)]
pub struct PipelineOptions {
    pub trim_enabled: bool,
    pub threads: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            trim_enabled: true,
            threads: 1,
        }
    }
}

/// Everything the pipeline produces: per-video proposals in video-id order
/// plus the aggregate report and any warnings.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub proposals: Vec<(String, Vec<ScoredPath>)>,
    pub report: MetricsReport,
    pub warnings: Vec<String>,
}

type VideoOutcome = Result<(Vec<ScoredPath>, Option<String>), TrimError>;

/// Links and trims one video's detections.
fn process_video(
    config: &PipelineConfig,
    options: &PipelineOptions,
    video: &VideoDetections,
) -> VideoOutcome {
    let link_config = config.link_config();
    let paths = extract_paths(video, &link_config);
    let warning = if paths.is_empty() {
        Some(format!(
            "video {}: a frame has no boxes, no proposals emitted",
            video.video_id()
        ))
    } else {
        None
    };

    if !options.trim_enabled {
        return Ok((paths, warning));
    }

    let trim_config = config.trim_config();
    let mut proposals = Vec::new();
    for scored in paths {
        let outcome = trim(&scored.path, &trim_config)?;
        for segment in outcome.segments {
            let score = path_score(&segment, link_config.lambda0);
            proposals.push(ScoredPath {
                path: segment,
                score,
            });
        }
    }
    Ok((proposals, warning))
}

/// Runs linking, trimming and evaluation over a set of videos.
///
/// Videos are processed independently (optionally on several threads) and
/// merged in video-id order, so the output is identical for any thread
/// count. Each ground truth is only matched against proposals of its own
/// video.
pub fn run_pipeline(
    config: &PipelineConfig,
    options: &PipelineOptions,
    mut videos: Vec<VideoDetections>,
    gts: &[(String, GroundTruthTube)],
) -> Result<PipelineOutput, PipelineError> {
    if gts.is_empty() {
        return Err(PipelineError::NoGroundTruth);
    }
    videos.sort_by(|a, b| a.video_id().cmp(b.video_id()));
    for pair in videos.windows(2) {
        if pair[0].video_id() == pair[1].video_id() {
            return Err(PipelineError::DuplicateVideo(pair[0].video_id().to_string()));
        }
    }

    // Chunked fan-out; chunk results concatenate in input order, so the
    // merge is deterministic regardless of scheduling.
    let workers = options.threads.max(1).min(videos.len().max(1));
    let chunk_size = videos.len().div_ceil(workers.max(1)).max(1);
    let mut results: Vec<VideoOutcome> = Vec::new();
    if videos.len() <= 1 || workers == 1 {
        for video in &videos {
            results.push(process_video(config, options, video));
        }
    } else {
        let chunks: Vec<&[VideoDetections]> = videos.chunks(chunk_size).collect();
        let mut chunk_outputs: Vec<Vec<VideoOutcome>> = Vec::with_capacity(chunks.len());
        thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|chunk| {
                    scope.spawn(move || {
                        chunk
                            .iter()
                            .map(|video| process_video(config, options, video))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for handle in handles {
                chunk_outputs.push(handle.join().expect("worker does not panic"));
            }
        });
        results = chunk_outputs.into_iter().flatten().collect();
    }

    let mut proposals = Vec::with_capacity(videos.len());
    let mut warnings = Vec::new();
    for (video, result) in videos.iter().zip(results) {
        let (paths, warning) = result?;
        warnings.extend(warning);
        proposals.push((video.video_id().to_string(), paths));
    }

    let by_video: BTreeMap<&str, &Vec<ScoredPath>> = proposals
        .iter()
        .map(|(id, paths)| (id.as_str(), paths))
        .collect();

    // One (class, best overlap) entry per ground truth, scoped to its video.
    let mut known_videos = true;
    let bests: Vec<(String, Option<f64>)> = gts
        .iter()
        .map(|(video_id, gt)| {
            let best = by_video.get(video_id.as_str()).and_then(|paths| {
                paths
                    .iter()
                    .map(|sp| tube_overlap(&sp.path, gt))
                    .fold(None, |acc: Option<f64>, ov| {
                        Some(acc.map_or(ov, |b| b.max(ov)))
                    })
            });
            if !by_video.contains_key(video_id.as_str()) {
                known_videos = false;
            }
            (gt.class_label().to_string(), best)
        })
        .collect();
    if !known_videos {
        warnings.push("some ground-truth videos have no detections".to_string());
    }

    let report = report_from_bests(&bests, &default_thresholds())
        .expect("ground truth verified nonempty");
    Ok(PipelineOutput {
        proposals,
        report,
        warnings,
    })
}
