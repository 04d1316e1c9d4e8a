//! Trimming video-spanning paths into action segments.
//!
//! The actionness and background score series of a path are smoothed with a
//! running average, peaks are detected in both, and each actionness peak
//! spawns a segment bounded by the nearest background peaks on either side
//! (falling back to the path boundaries).

use thiserror::Error;

use crate::tube::TubePath;

#[derive(Debug, Error, PartialEq)]
pub enum TrimError {
    #[error("smoothing window must be odd and positive, got {0}")]
    InvalidWindow(usize),
    #[error("peak neighborhood must be at least 1")]
    InvalidNeighborhood,
}

/// Trimming knobs: running-average width (odd) and the peak half-width `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrimConfig {
    pub smooth_window: usize,
    pub neighborhood: usize,
}

impl Default for TrimConfig {
    fn default() -> Self {
        Self {
            smooth_window: 5,
            neighborhood: 5,
        }
    }
}

impl TrimConfig {
    fn validate(&self) -> Result<(), TrimError> {
        if self.smooth_window == 0 || self.smooth_window.is_multiple_of(2) {
            return Err(TrimError::InvalidWindow(self.smooth_window));
        }
        if self.neighborhood == 0 {
            return Err(TrimError::InvalidNeighborhood);
        }
        Ok(())
    }
}

/// Sorted peak offsets of the smoothed actionness and background series.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PeakSet {
    pub ac: Vec<usize>,
    pub bg: Vec<usize>,
}

/// Result of trimming one path: the emitted segments and a per-frame binary
/// labeling (true where some segment covers the frame).
#[derive(Clone, Debug, PartialEq)]
pub struct TrimOutcome {
    pub segments: Vec<TubePath>,
    pub labels: Vec<bool>,
}

/// Centered running average. At the boundaries the window is clipped to the
/// series, so edge values average only their existing neighbors within the
/// half-width.
pub fn smooth(series: &[f64], window: usize) -> Result<Vec<f64>, TrimError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(TrimError::InvalidWindow(window));
    }
    let half = window / 2;
    let out = (0..series.len())
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(series.len() - 1);
            let slice = &series[lo..=hi];
            // Shifted mean: a constant series must come back bit-identical,
            // or downstream peak detection would see phantom structure.
            let base = slice[0];
            base + slice.iter().map(|v| v - base).sum::<f64>() / slice.len() as f64
        })
        .collect();
    Ok(out)
}

/// Indices that are maxima of their clipped `[t-n, t+n]` neighborhood.
///
/// Plateaus of adjacent equal-valued candidates collapse to their leftmost
/// index, and an all-constant series has no peaks at all.
pub fn find_peaks(series: &[f64], n: usize) -> Vec<usize> {
    assert!(n >= 1, "peak neighborhood must be at least 1");
    if series.is_empty() {
        return Vec::new();
    }
    let constant = series.iter().all(|v| *v == series[0]);
    if constant {
        return Vec::new();
    }

    let mut peaks = Vec::new();
    let mut previous_was_candidate = false;
    for t in 0..series.len() {
        let lo = t.saturating_sub(n);
        let hi = (t + n).min(series.len() - 1);
        let max = series[lo..=hi].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let candidate = series[t] == max;
        if candidate && !previous_was_candidate {
            peaks.push(t);
        }
        previous_was_candidate = candidate;
    }
    peaks
}

/// Smooths both score series of a path and returns their peak sets.
pub fn score_peaks(path: &TubePath, config: &TrimConfig) -> Result<PeakSet, TrimError> {
    config.validate()?;
    let ac: Vec<f64> = path.boxes().iter().map(|b| b.s_ac).collect();
    let bg: Vec<f64> = path.boxes().iter().map(|b| b.s_bg).collect();
    Ok(PeakSet {
        ac: find_peaks(&smooth(&ac, config.smooth_window)?, config.neighborhood),
        bg: find_peaks(&smooth(&bg, config.smooth_window)?, config.neighborhood),
    })
}

/// Cuts a path into action segments around its actionness peaks.
///
/// For each actionness peak the segment runs from the greatest background
/// peak strictly before it (or the path start) to the smallest background
/// peak strictly after it (or the path end). Duplicate segments are emitted
/// once; overlapping distinct ones are all kept. A path with no actionness
/// peak comes back whole: dropping it would silently discard detections.
pub fn trim(path: &TubePath, config: &TrimConfig) -> Result<TrimOutcome, TrimError> {
    let peaks = score_peaks(path, config)?;
    let len = path.len();

    let mut spans: Vec<(usize, usize)> = Vec::new();
    if peaks.ac.is_empty() {
        spans.push((0, len - 1));
    } else {
        for &p in &peaks.ac {
            let start = peaks.bg.iter().copied().filter(|&b| b < p).max().unwrap_or(0);
            let end = peaks
                .bg
                .iter()
                .copied()
                .filter(|&b| b > p)
                .min()
                .unwrap_or(len - 1);
            spans.push((start, end));
        }
        // Actionness peaks are increasing, so equal spans are adjacent.
        spans.dedup();
    }

    let mut labels = vec![false; len];
    let mut segments = Vec::with_capacity(spans.len());
    for (start, end) in spans {
        for label in &mut labels[start..=end] {
            *label = true;
        }
        let boxes = path.boxes()[start..=end].to_vec();
        segments.push(TubePath::new(path.start() + start, boxes).expect("span is nonempty"));
    }
    Ok(TrimOutcome { segments, labels })
}
