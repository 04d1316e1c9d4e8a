//! Tube evaluation: overlap between proposal and ground-truth tubes,
//! average best overlap (overall and per class) and recall-vs-threshold
//! curves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::iou;
use crate::tube::{GroundTruthTube, TubePath};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("metrics need at least one ground-truth tube")]
    EmptyGroundTruth,
}

/// Overlap between a proposal tube and a ground-truth tube.
///
/// The per-frame IoU is summed over the temporal intersection and divided by
/// the length of the temporal union, counted inclusively so that identical
/// single-frame tubes score 1. Temporally disjoint tubes score 0.
pub fn tube_overlap(d: &TubePath, g: &GroundTruthTube) -> f64 {
    let inter_start = d.start().max(g.start());
    let inter_end = d.end().min(g.end());
    if inter_start > inter_end {
        return 0.0;
    }
    let union_len = (d.end().max(g.end()) - d.start().min(g.start()) + 1) as f64;
    let mut sum = 0.0;
    for t in inter_start..=inter_end {
        let db = d.box_at(t).expect("t lies in d");
        let gb = g.box_at(t).expect("t lies in g");
        sum += iou(db.bbox, *gb);
    }
    sum / union_len
}

/// Best overlap any proposal achieves against one ground truth; `None` when
/// there are no proposals at all.
pub fn best_overlap(proposals: &[TubePath], gt: &GroundTruthTube) -> Option<f64> {
    proposals
        .iter()
        .map(|d| tube_overlap(d, gt))
        .fold(None, |acc, ov| Some(acc.map_or(ov, |best: f64| best.max(ov))))
}

/// Average best overlap: the mean over ground truths of the best proposal
/// overlap. An empty proposal set contributes 0 per ground truth.
pub fn abo(proposals: &[TubePath], gts: &[GroundTruthTube]) -> Result<f64, MetricsError> {
    if gts.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let sum: f64 = gts
        .iter()
        .map(|g| best_overlap(proposals, g).unwrap_or(0.0))
        .sum();
    Ok(sum / gts.len() as f64)
}

/// Per-class ABO and their unweighted mean (the MABO). Classes come from the
/// ground-truth labels; every proposal competes for every class.
pub fn mabo(
    proposals: &[TubePath],
    gts: &[GroundTruthTube],
) -> Result<(BTreeMap<String, f64>, f64), MetricsError> {
    if gts.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let mut grouped: BTreeMap<String, Vec<&GroundTruthTube>> = BTreeMap::new();
    for g in gts {
        grouped.entry(g.class_label().to_string()).or_default().push(g);
    }
    let mut per_class = BTreeMap::new();
    for (class, members) in grouped {
        let sum: f64 = members
            .iter()
            .map(|g| best_overlap(proposals, g).unwrap_or(0.0))
            .sum();
        per_class.insert(class, sum / members.len() as f64);
    }
    let mean = per_class.values().sum::<f64>() / per_class.len() as f64;
    Ok((per_class, mean))
}

/// Recall at each threshold: the fraction of ground truths whose best
/// overlap reaches it. A ground truth facing zero proposals counts as
/// undetected at every threshold.
pub fn recall_curve(
    proposals: &[TubePath],
    gts: &[GroundTruthTube],
    thresholds: &[f64],
) -> Vec<(f64, f64)> {
    let bests: Vec<Option<f64>> = gts.iter().map(|g| best_overlap(proposals, g)).collect();
    recall_from_bests(&bests, thresholds)
}

fn recall_from_bests(bests: &[Option<f64>], thresholds: &[f64]) -> Vec<(f64, f64)> {
    thresholds
        .iter()
        .map(|&eta| {
            if bests.is_empty() {
                return (eta, 0.0);
            }
            let detected = bests
                .iter()
                .filter(|best| best.is_some_and(|ov| ov >= eta))
                .count();
            (eta, detected as f64 / bests.len() as f64)
        })
        .collect()
}

/// The plotting grid used by the recall curves: 0 to 1 in steps of 0.05.
pub fn default_thresholds() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallPoint {
    pub eta: f64,
    pub recall: f64,
}

/// Aggregate localization quality of a proposal set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub abo: f64,
    pub abo_per_class: BTreeMap<String, f64>,
    pub mabo: f64,
    pub recall_at_0_5: f64,
    pub curve: Vec<RecallPoint>,
}

impl MetricsReport {
    /// Recall at the exact threshold `eta` if the curve sampled it.
    pub fn recall_at(&self, eta: f64) -> Option<f64> {
        self.curve
            .iter()
            .find(|p| (p.eta - eta).abs() < 1e-12)
            .map(|p| p.recall)
    }
}

/// Builds the full report for one proposal/ground-truth scope.
pub fn report(
    proposals: &[TubePath],
    gts: &[GroundTruthTube],
    thresholds: &[f64],
) -> Result<MetricsReport, MetricsError> {
    let bests: Vec<(String, Option<f64>)> = gts
        .iter()
        .map(|g| (g.class_label().to_string(), best_overlap(proposals, g)))
        .collect();
    report_from_bests(&bests, thresholds)
}

/// Builds a report from already-computed `(class, best overlap)` pairs.
///
/// This is the aggregation entry point for multi-video evaluation, where
/// each ground truth is only matched against proposals of its own video.
pub fn report_from_bests(
    bests: &[(String, Option<f64>)],
    thresholds: &[f64],
) -> Result<MetricsReport, MetricsError> {
    if bests.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let abo = bests
        .iter()
        .map(|(_, best)| best.unwrap_or(0.0))
        .sum::<f64>()
        / bests.len() as f64;

    let mut grouped: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    for (class, best) in bests {
        grouped.entry(class.clone()).or_default().push(*best);
    }
    let mut abo_per_class = BTreeMap::new();
    for (class, members) in grouped {
        let sum: f64 = members.iter().map(|b| b.unwrap_or(0.0)).sum();
        abo_per_class.insert(class, sum / members.len() as f64);
    }
    let mabo = abo_per_class.values().sum::<f64>() / abo_per_class.len() as f64;

    let flat: Vec<Option<f64>> = bests.iter().map(|(_, b)| *b).collect();
    let curve: Vec<RecallPoint> = recall_from_bests(&flat, thresholds)
        .into_iter()
        .map(|(eta, recall)| RecallPoint { eta, recall })
        .collect();
    let recall_at_0_5 = recall_from_bests(&flat, &[0.5])[0].1;

    Ok(MetricsReport {
        abo,
        abo_per_class,
        mabo,
        recall_at_0_5,
        curve,
    })
}
