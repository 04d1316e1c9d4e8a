//! The five-term sum-squared grid regression loss and its analytic gradient.

use serde::{Deserialize, Serialize};

use crate::grid::{FrameTarget, GridError, GridTensor};

/// Term weights: coordinate terms scaled up, confidence of empty slots
/// scaled down so the many object-free cells cannot drown the signal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_coord: f64,
    pub lambda_noobj: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_coord: 5.0,
            lambda_noobj: 0.5,
        }
    }
}

/// The loss split into its five terms, in the order they are summed:
/// center coordinates, square-root sizes, confidence of responsible slots,
/// confidence of non-responsible slots, and cell classification scores.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub coord_xy: f64,
    pub coord_wh: f64,
    pub conf_obj: f64,
    pub conf_noobj: f64,
    pub class: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.coord_xy + self.coord_wh + self.conf_obj + self.conf_noobj + self.class
    }

    pub fn terms(&self) -> [f64; 5] {
        [
            self.coord_xy,
            self.coord_wh,
            self.conf_obj,
            self.conf_noobj,
            self.class,
        ]
    }
}

fn check_shapes(pred: &GridTensor, target: &FrameTarget) -> Result<(), GridError> {
    if pred.shape() != target.tensor.shape() || pred.shape() != target.mask.shape() {
        return Err(GridError::ShapeDisagreement);
    }
    Ok(())
}

/// Sum-squared error between a predicted tensor and a frame target.
///
/// Responsible slots are charged for center, size and confidence error, all
/// other slots only for confidence (against 0, scaled by `lambda_noobj`),
/// and object cells for their score tuple. Negative predicted sizes are
/// clamped to 0 before the square root.
pub fn grid_loss(
    pred: &GridTensor,
    target: &FrameTarget,
    weights: &LossWeights,
) -> Result<LossBreakdown, GridError> {
    check_shapes(pred, target)?;
    let shape = pred.shape();
    let mut xy = 0.0;
    let mut wh = 0.0;
    let mut conf_obj = 0.0;
    let mut conf_noobj = 0.0;
    let mut class = 0.0;

    for row in 0..shape.k {
        for col in 0..shape.k {
            for j in 0..shape.boxes_per_cell {
                let p = pred.predictor(row, col, j);
                let t = target.tensor.predictor(row, col, j);
                if target.mask.is_responsible(row, col, j) {
                    xy += (p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2);
                    let pw = p[2].max(0.0).sqrt();
                    let ph = p[3].max(0.0).sqrt();
                    wh += (ph - t[3].max(0.0).sqrt()).powi(2) + (pw - t[2].max(0.0).sqrt()).powi(2);
                    conf_obj += (p[4] - t[4]).powi(2);
                } else {
                    conf_noobj += (p[4] - t[4]).powi(2);
                }
            }
            if target.mask.cell_has_object(row, col) {
                let (p_ac, p_bg) = pred.scores(row, col);
                let (t_ac, t_bg) = target.tensor.scores(row, col);
                class += (p_ac - t_ac).powi(2) + (p_bg - t_bg).powi(2);
            }
        }
    }

    Ok(LossBreakdown {
        coord_xy: weights.lambda_coord * xy,
        coord_wh: weights.lambda_coord * wh,
        conf_obj,
        conf_noobj: weights.lambda_noobj * conf_noobj,
        class,
    })
}

/// Exact analytic gradient of [`grid_loss`] with respect to every predicted
/// entry, returned in tensor layout. Entries outside every mask term have
/// zero gradient; the size clamp contributes subgradient 0 at and below 0.
pub fn loss_gradient(
    pred: &GridTensor,
    target: &FrameTarget,
    weights: &LossWeights,
) -> Result<GridTensor, GridError> {
    check_shapes(pred, target)?;
    let shape = pred.shape();
    let mut grad = GridTensor::zeros(shape);

    for row in 0..shape.k {
        for col in 0..shape.k {
            for j in 0..shape.boxes_per_cell {
                let p = pred.predictor(row, col, j);
                let t = target.tensor.predictor(row, col, j);
                let base = grad.predictor_base(row, col, j);
                if target.mask.is_responsible(row, col, j) {
                    let g = grad.values_mut();
                    g[base] = 2.0 * weights.lambda_coord * (p[0] - t[0]);
                    g[base + 1] = 2.0 * weights.lambda_coord * (p[1] - t[1]);
                    // d/dw (sqrt(w) - sqrt(ŵ))^2 = (sqrt(w) - sqrt(ŵ)) / sqrt(w)
                    if p[2] > 0.0 {
                        g[base + 2] =
                            weights.lambda_coord * (p[2].sqrt() - t[2].max(0.0).sqrt()) / p[2].sqrt();
                    }
                    if p[3] > 0.0 {
                        g[base + 3] =
                            weights.lambda_coord * (p[3].sqrt() - t[3].max(0.0).sqrt()) / p[3].sqrt();
                    }
                    g[base + 4] = 2.0 * (p[4] - t[4]);
                } else {
                    grad.values_mut()[base + 4] = 2.0 * weights.lambda_noobj * (p[4] - t[4]);
                }
            }
            if target.mask.cell_has_object(row, col) {
                let (p_ac, p_bg) = pred.scores(row, col);
                let (t_ac, t_bg) = target.tensor.scores(row, col);
                let base = grad.scores_base(row, col);
                let g = grad.values_mut();
                g[base] = 2.0 * (p_ac - t_ac);
                g[base + 1] = 2.0 * (p_bg - t_bg);
            }
        }
    }

    Ok(grad)
}
