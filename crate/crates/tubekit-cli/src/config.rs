//! Pipeline configuration: one JSON object, every field optional with the
//! documented default.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tubekit::grid::GridShape;
use tubekit::link::LinkConfig;
use tubekit::net::LossWeights;
use tubekit::trim::TrimConfig;

use crate::formats::FormatError;

/// Every knob of the pipeline. Defaults: K=7, B=2, lambda_coord=5,
/// lambda_noobj=0.5, lambda0=1.0, max_paths=100, smooth window 5, peak
/// neighborhood 5, 100 epochs of batch 32 at 1e-4 decaying to 1e-5 after
/// epoch 80, seed 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub k: usize,
    pub boxes_per_cell: usize,
    pub lambda_coord: f64,
    pub lambda_noobj: f64,
    pub lambda0: f64,
    pub max_paths: usize,
    pub smooth_window: usize,
    pub neighborhood: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_decayed: f64,
    pub decay_epoch: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 7,
            boxes_per_cell: 2,
            lambda_coord: 5.0,
            lambda_noobj: 0.5,
            lambda0: 1.0,
            max_paths: 100,
            smooth_window: 5,
            neighborhood: 5,
            epochs: 100,
            batch_size: 32,
            lr_initial: 1e-4,
            lr_decayed: 1e-5,
            decay_epoch: 80,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, FormatError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| FormatError::io(path.display().to_string(), e))?;
        let mut de = serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(&mut de).map_err(|err| FormatError {
            file: path.display().to_string(),
            line: None,
            field: Some(err.path().to_string()),
            message: err.inner().to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FormatError> {
        let path = path.as_ref();
        let mut json = serde_json::to_string_pretty(self).expect("config serializes");
        json.push('\n');
        fs::write(path, json).map_err(|e| FormatError::io(path.display().to_string(), e))
    }

    pub fn grid_shape(&self) -> GridShape {
        GridShape::new(self.k, self.boxes_per_cell).expect("validated fields")
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_coord: self.lambda_coord,
            lambda_noobj: self.lambda_noobj,
        }
    }

    pub fn link_config(&self) -> LinkConfig {
        LinkConfig {
            lambda0: self.lambda0,
            max_paths: self.max_paths,
        }
    }

    pub fn trim_config(&self) -> TrimConfig {
        TrimConfig {
            smooth_window: self.smooth_window,
            neighborhood: self.neighborhood,
        }
    }

    /// Learning rate for an epoch under the two-stage schedule.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if epoch >= self.decay_epoch {
            self.lr_decayed
        } else {
            self.lr_initial
        }
    }
}
