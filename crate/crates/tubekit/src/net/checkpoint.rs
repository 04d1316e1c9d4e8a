//! Model checkpoints: a self-describing JSON record of the head kind, its
//! dimensions, the parameter arrays in declared order and the seed that
//! initialized training.
//!
//! Layout (stable across versions; `format_version` guards future changes):
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "seed": 42,
//!   "head": {
//!     "kind": "static" | "rnn" | "lstm",
//!     "input_dim": 256,
//!     "hidden_dim": 64,            // recurrent kinds only
//!     "grid": { "k": 3, "boxes_per_cell": 1 },
//!     "cell": { ... },             // recurrent kinds only
//!     "readout": { "w": { "rows": ..., "cols": ..., "data": [...] }, "b": [...] }
//!   }
//! }
//! ```
//!
//! Matrices are row-major. The LSTM cell stores, in order, the input, forget,
//! output and modulation gates, each as `w_x*`, `w_h*`, `b_*`, plus the
//! modulation-gate activation choice.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridShape;

use super::{DenseParams, LstmParams, NetError, RecurrentCellParams, RecurrentHead, RnnParams, StaticHead};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed checkpoint: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("inconsistent checkpoint: {0}")]
    Inconsistent(#[from] NetError),
    #[error("checkpoint holds a {found} head, expected {expected}")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)] // parameter bulk lives in heap vectors
pub enum HeadSpec {
    Static {
        input_dim: usize,
        grid: GridShape,
        readout: DenseParams,
    },
    Rnn {
        input_dim: usize,
        hidden_dim: usize,
        grid: GridShape,
        cell: RnnParams,
        readout: DenseParams,
    },
    Lstm {
        input_dim: usize,
        hidden_dim: usize,
        grid: GridShape,
        cell: LstmParams,
        readout: DenseParams,
    },
}

impl HeadSpec {
    fn kind(&self) -> &'static str {
        match self {
            HeadSpec::Static { .. } => "static",
            HeadSpec::Rnn { .. } => "rnn",
            HeadSpec::Lstm { .. } => "lstm",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub seed: u64,
    pub head: HeadSpec,
}

impl Checkpoint {
    pub fn for_static(head: &StaticHead, seed: u64) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            seed,
            head: HeadSpec::Static {
                input_dim: head.input_dim(),
                grid: head.shape,
                readout: head.readout.clone(),
            },
        }
    }

    pub fn for_recurrent(head: &RecurrentHead, seed: u64) -> Self {
        let head_spec = match &head.cell {
            RecurrentCellParams::Rnn(cell) => HeadSpec::Rnn {
                input_dim: head.input_dim(),
                hidden_dim: cell.hidden_dim(),
                grid: head.shape,
                cell: cell.clone(),
                readout: head.readout.clone(),
            },
            RecurrentCellParams::Lstm(cell) => HeadSpec::Lstm {
                input_dim: head.input_dim(),
                hidden_dim: cell.hidden_dim(),
                grid: head.shape,
                cell: cell.clone(),
                readout: head.readout.clone(),
            },
        };
        Self {
            format_version: CHECKPOINT_VERSION,
            seed,
            head: head_spec,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let text = fs::read_to_string(path)?;
        let checkpoint: Checkpoint = serde_json::from_str(&text)?;
        if checkpoint.format_version != CHECKPOINT_VERSION {
            return Err(CheckpointError::UnsupportedVersion(checkpoint.format_version));
        }
        checkpoint.validate()?;
        Ok(checkpoint)
    }

    fn validate(&self) -> Result<(), NetError> {
        match &self.head {
            HeadSpec::Static { grid, readout, .. } => {
                StaticHead::new(readout.clone(), *grid).map(|_| ())
            }
            HeadSpec::Rnn { cell, readout, grid, .. } => {
                RecurrentHead::new(RecurrentCellParams::Rnn(cell.clone()), readout.clone(), *grid)
                    .map(|_| ())
            }
            HeadSpec::Lstm { cell, readout, grid, .. } => {
                RecurrentHead::new(RecurrentCellParams::Lstm(cell.clone()), readout.clone(), *grid)
                    .map(|_| ())
            }
        }
    }

    /// Extracts a static head, rejecting recurrent checkpoints.
    pub fn into_static_head(self) -> Result<StaticHead, CheckpointError> {
        match self.head {
            HeadSpec::Static { grid, readout, .. } => Ok(StaticHead::new(readout, grid)?),
            other => Err(CheckpointError::WrongKind {
                expected: "static",
                found: other.kind(),
            }),
        }
    }

    /// Extracts a recurrent head, rejecting static checkpoints.
    pub fn into_recurrent_head(self) -> Result<RecurrentHead, CheckpointError> {
        match self.head {
            HeadSpec::Rnn { cell, readout, grid, .. } => Ok(RecurrentHead::new(
                RecurrentCellParams::Rnn(cell),
                readout,
                grid,
            )?),
            HeadSpec::Lstm { cell, readout, grid, .. } => Ok(RecurrentHead::new(
                RecurrentCellParams::Lstm(cell),
                readout,
                grid,
            )?),
            other => Err(CheckpointError::WrongKind {
                expected: "rnn or lstm",
                found: other.kind(),
            }),
        }
    }
}
