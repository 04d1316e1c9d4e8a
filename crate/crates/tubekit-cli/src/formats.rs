//! Line-delimited JSON interchange formats.
//!
//! One self-delimiting object per line, UTF-8, exact field names:
//!
//! - detections: `{"video_id", "frame", "boxes": [{"x","y","w","h","conf","ac","bg"}]}`
//!   (frames of a video may appear in any order but must cover 0..T-1);
//! - ground truth: `{"video_id", "class", "start", "end", "boxes": [{"x","y","w","h"}]}`;
//! - proposals: the ground-truth envelope plus a score and scored boxes:
//!   `{"video_id", "start", "end", "score", "boxes": [{"x","y","w","h","conf","ac","bg"}]}`;
//! - features: `{"video_id", "frame", "values": [f64; D]}`.
//!
//! Violations are reported with file, line and field.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tubekit::link::ScoredPath;
use tubekit::metrics::MetricsReport;
use tubekit::{Box2D, GroundTruthTube, ScoredBox, TubePath, VideoDetections};

/// A format violation, locating the offending file, line and field.
#[derive(Debug, Error)]
pub struct FormatError {
    pub file: String,
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        if let Some(field) = &self.field {
            write!(f, ": field {field}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl FormatError {
    pub fn io(file: String, err: io::Error) -> Self {
        Self {
            file,
            line: None,
            field: None,
            message: err.to_string(),
        }
    }

    fn at(file: &Path, line: usize, field: Option<String>, message: String) -> Self {
        Self {
            file: file.display().to_string(),
            line: Some(line),
            field,
            message,
        }
    }

    /// The machine-readable record printed to stderr on failure.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": "format",
            "file": self.file,
            "line": self.line,
            "field": self.field,
            "message": self.message,
        })
        .to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRecord {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub conf: f64,
    pub ac: f64,
    pub bg: f64,
}

impl BoxRecord {
    pub fn from_scored(b: &ScoredBox) -> Self {
        Self {
            x: b.bbox.x(),
            y: b.bbox.y(),
            w: b.bbox.w(),
            h: b.bbox.h(),
            conf: b.conf,
            ac: b.s_ac,
            bg: b.s_bg,
        }
    }

    pub fn to_scored(&self) -> ScoredBox {
        ScoredBox::new(
            Box2D::new(self.x, self.y, self.w, self.h),
            self.conf,
            self.ac,
            self.bg,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub video_id: String,
    pub frame: usize,
    pub boxes: Vec<BoxRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtBoxRecord {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtRecord {
    pub video_id: String,
    pub class: String,
    pub start: usize,
    pub end: usize,
    pub boxes: Vec<GtBoxRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalRecord {
    pub video_id: String,
    pub start: usize,
    pub end: usize,
    pub score: f64,
    pub boxes: Vec<BoxRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureRecord {
    pub video_id: String,
    pub frame: usize,
    pub values: Vec<f64>,
}

/// Parses a JSONL file, attaching line numbers and field paths to errors.
fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, FormatError> {
    let file = fs::File::open(path).map_err(|e| FormatError::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|e| FormatError::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut de = serde_json::Deserializer::from_str(&line);
        let record = serde_path_to_error::deserialize(&mut de).map_err(|err| {
            let path_str = err.path().to_string();
            FormatError::at(
                path,
                line_no,
                (path_str != ".").then_some(path_str),
                err.inner().to_string(),
            )
        })?;
        records.push((line_no, record));
    }
    Ok(records)
}

fn write_lines<T: Serialize>(path: &Path, records: impl Iterator<Item = T>) -> Result<(), FormatError> {
    let file = fs::File::create(path).map_err(|e| FormatError::io(path.display().to_string(), e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let json = serde_json::to_string(&record).expect("records serialize");
        writeln!(out, "{json}").map_err(|e| FormatError::io(path.display().to_string(), e))?;
    }
    out.flush()
        .map_err(|e| FormatError::io(path.display().to_string(), e))
}

/// Reads a detections file into per-video frame lists, validating that each
/// video covers frames 0..T-1 exactly once. Videos come back sorted by id.
pub fn read_detections(path: impl AsRef<Path>) -> Result<Vec<VideoDetections>, FormatError> {
    let path = path.as_ref();
    let records: Vec<(usize, FrameRecord)> = read_records(path)?;
    let mut grouped: BTreeMap<String, Vec<(usize, FrameRecord)>> = BTreeMap::new();
    for (line, record) in records {
        grouped.entry(record.video_id.clone()).or_default().push((line, record));
    }

    let mut videos = Vec::with_capacity(grouped.len());
    for (video_id, mut frames) in grouped {
        frames.sort_by_key(|(_, r)| r.frame);
        for (position, (line, record)) in frames.iter().enumerate() {
            if record.frame != position {
                let expected = position;
                return Err(FormatError::at(
                    path,
                    *line,
                    Some("frame".to_string()),
                    format!(
                        "video {video_id} must cover frames 0..T-1; expected frame {expected}, found {}",
                        record.frame
                    ),
                ));
            }
        }
        let boxes: Vec<Vec<ScoredBox>> = frames
            .into_iter()
            .map(|(_, r)| r.boxes.iter().map(BoxRecord::to_scored).collect())
            .collect();
        videos.push(VideoDetections::from_frame_boxes(video_id, boxes).expect("validated above"));
    }
    Ok(videos)
}

pub fn write_detections(
    path: impl AsRef<Path>,
    videos: &[VideoDetections],
) -> Result<(), FormatError> {
    let records = videos.iter().flat_map(|v| {
        v.frames().iter().map(move |f| FrameRecord {
            video_id: v.video_id().to_string(),
            frame: f.frame_index,
            boxes: f.boxes.iter().map(BoxRecord::from_scored).collect(),
        })
    });
    write_lines(path.as_ref(), records)
}

/// Reads ground-truth tubes as `(video_id, tube)` pairs, in file order.
pub fn read_gts(path: impl AsRef<Path>) -> Result<Vec<(String, GroundTruthTube)>, FormatError> {
    let path = path.as_ref();
    let records: Vec<(usize, GtRecord)> = read_records(path)?;
    let mut out = Vec::with_capacity(records.len());
    for (line, r) in records {
        if r.end < r.start {
            return Err(FormatError::at(
                path,
                line,
                Some("end".to_string()),
                format!("tube ends ({}) before it starts ({})", r.end, r.start),
            ));
        }
        let expected = r.end - r.start + 1;
        if r.boxes.len() != expected {
            return Err(FormatError::at(
                path,
                line,
                Some("boxes".to_string()),
                format!("tube spans {expected} frames but carries {} boxes", r.boxes.len()),
            ));
        }
        let boxes = r
            .boxes
            .iter()
            .map(|b| Box2D::new(b.x, b.y, b.w, b.h))
            .collect();
        let tube = GroundTruthTube::new(r.start, boxes, r.class).expect("validated above");
        out.push((r.video_id, tube));
    }
    Ok(out)
}

pub fn write_gts(
    path: impl AsRef<Path>,
    gts: &[(String, GroundTruthTube)],
) -> Result<(), FormatError> {
    let records = gts.iter().map(|(video_id, g)| GtRecord {
        video_id: video_id.clone(),
        class: g.class_label().to_string(),
        start: g.start(),
        end: g.end(),
        boxes: g
            .boxes()
            .iter()
            .map(|b| GtBoxRecord {
                x: b.x(),
                y: b.y(),
                w: b.w(),
                h: b.h(),
            })
            .collect(),
    });
    write_lines(path.as_ref(), records)
}

/// Reads proposal tubes as `(video_id, scored path)` pairs, in file order.
pub fn read_proposals(path: impl AsRef<Path>) -> Result<Vec<(String, ScoredPath)>, FormatError> {
    let path = path.as_ref();
    let records: Vec<(usize, ProposalRecord)> = read_records(path)?;
    let mut out = Vec::with_capacity(records.len());
    for (line, r) in records {
        if r.end < r.start {
            return Err(FormatError::at(
                path,
                line,
                Some("end".to_string()),
                format!("tube ends ({}) before it starts ({})", r.end, r.start),
            ));
        }
        let expected = r.end - r.start + 1;
        if r.boxes.len() != expected {
            return Err(FormatError::at(
                path,
                line,
                Some("boxes".to_string()),
                format!("tube spans {expected} frames but carries {} boxes", r.boxes.len()),
            ));
        }
        let boxes: Vec<ScoredBox> = r.boxes.iter().map(BoxRecord::to_scored).collect();
        let tube = TubePath::new(r.start, boxes).expect("validated above");
        out.push((
            r.video_id,
            ScoredPath {
                path: tube,
                score: r.score,
            },
        ));
    }
    Ok(out)
}

pub fn write_proposals(
    path: impl AsRef<Path>,
    proposals: &[(String, ScoredPath)],
) -> Result<(), FormatError> {
    let records = proposals.iter().map(|(video_id, sp)| ProposalRecord {
        video_id: video_id.clone(),
        start: sp.path.start(),
        end: sp.path.end(),
        score: sp.score,
        boxes: sp.path.boxes().iter().map(BoxRecord::from_scored).collect(),
    });
    write_lines(path.as_ref(), records)
}

/// Reads per-frame feature vectors per video, validating contiguous frames
/// and a consistent dimension.
pub fn read_features(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<Vec<f64>>>, FormatError> {
    let path = path.as_ref();
    let records: Vec<(usize, FeatureRecord)> = read_records(path)?;
    let mut grouped: BTreeMap<String, Vec<(usize, FeatureRecord)>> = BTreeMap::new();
    for (line, record) in records {
        grouped.entry(record.video_id.clone()).or_default().push((line, record));
    }
    let mut out = BTreeMap::new();
    for (video_id, mut frames) in grouped {
        frames.sort_by_key(|(_, r)| r.frame);
        let dim = frames[0].1.values.len();
        for (position, (line, record)) in frames.iter().enumerate() {
            if record.frame != position {
                return Err(FormatError::at(
                    path,
                    *line,
                    Some("frame".to_string()),
                    format!("video {video_id}: expected frame {position}, found {}", record.frame),
                ));
            }
            if record.values.len() != dim {
                return Err(FormatError::at(
                    path,
                    *line,
                    Some("values".to_string()),
                    format!("feature dimension changed from {dim} to {}", record.values.len()),
                ));
            }
        }
        out.insert(video_id, frames.into_iter().map(|(_, r)| r.values).collect());
    }
    Ok(out)
}

pub fn write_features(
    path: impl AsRef<Path>,
    features: &BTreeMap<String, Vec<Vec<f64>>>,
) -> Result<(), FormatError> {
    let records = features.iter().flat_map(|(video_id, frames)| {
        frames.iter().enumerate().map(move |(frame, values)| FeatureRecord {
            video_id: video_id.clone(),
            frame,
            values: values.clone(),
        })
    });
    write_lines(path.as_ref(), records)
}

pub fn write_report(path: impl AsRef<Path>, report: &MetricsReport) -> Result<(), FormatError> {
    let path = path.as_ref();
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    fs::write(path, json).map_err(|e| FormatError::io(path.display().to_string(), e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<MetricsReport, FormatError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| FormatError {
        file: path.display().to_string(),
        line: None,
        field: None,
        message: e.to_string(),
    })
}
