//! Desk-scale regression heads: a plain recurrent step, an LSTM step and a
//! static fully-connected step, each mapping frame features to the grid
//! tensor, plus the training loss, analytic gradients, backpropagation
//! through time and Adam updates.

mod adam;
mod bptt;
mod checkpoint;
mod linalg;
mod loss;

pub use adam::AdamState;
pub use bptt::{bptt, forward_sequence, static_gradient};
pub use checkpoint::{Checkpoint, CheckpointError, HeadSpec, CHECKPOINT_VERSION};
pub use linalg::Matrix;
pub use loss::{grid_loss, loss_gradient, LossBreakdown, LossWeights};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridError, GridShape, GridTensor};

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("sequence has {inputs} inputs but {targets} targets")]
    LengthMismatch { inputs: usize, targets: usize },
    #[error("sequence must contain at least one frame")]
    EmptySequence,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// The logistic function.
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn uniform_fan_in(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    // Uniform in [-s, s] with s = 1/sqrt(fan-in).
    let s = 1.0 / (cols as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-s..s))
}

/// Activation applied to the LSTM modulation gate `g_t`.
///
/// The default follows the update equations as printed, with a logistic
/// modulation gate; `Tanh` switches to the conventional LSTM form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateModulation {
    #[default]
    Sigmoid,
    Tanh,
}

impl GateModulation {
    fn apply(self, x: f64) -> f64 {
        match self {
            GateModulation::Sigmoid => sigmoid(x),
            GateModulation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed in terms of the activation value.
    fn derivative_from_value(self, g: f64) -> f64 {
        match self {
            GateModulation::Sigmoid => g * (1.0 - g),
            GateModulation::Tanh => 1.0 - g * g,
        }
    }
}

/// Parameters of the plain recurrent step
/// `h_t = sigma(W_xh x_t + W_hh h_{t-1} + b_h)`, `z_t = sigma(W_hz h_t + b_z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnnParams {
    pub w_xh: Matrix,
    pub w_hh: Matrix,
    pub b_h: Vec<f64>,
    pub w_hz: Matrix,
    pub b_z: Vec<f64>,
}

impl RnnParams {
    pub fn init(input_dim: usize, hidden_dim: usize, output_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            w_xh: uniform_fan_in(hidden_dim, input_dim, rng),
            w_hh: uniform_fan_in(hidden_dim, hidden_dim, rng),
            b_h: vec![0.0; hidden_dim],
            w_hz: uniform_fan_in(output_dim, hidden_dim, rng),
            b_z: vec![0.0; output_dim],
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        Self {
            w_xh: Matrix::zeros(hidden_dim, input_dim),
            w_hh: Matrix::zeros(hidden_dim, hidden_dim),
            b_h: vec![0.0; hidden_dim],
            w_hz: Matrix::zeros(output_dim, hidden_dim),
            b_z: vec![0.0; output_dim],
        }
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.hidden_dim(), self.output_dim())
    }

    pub fn input_dim(&self) -> usize {
        self.w_xh.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_xh.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w_hz.rows()
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let h = self.hidden_dim();
        check_dims("rnn w_hh rows", self.w_hh.rows(), h)?;
        check_dims("rnn w_hh cols", self.w_hh.cols(), h)?;
        check_dims("rnn b_h", self.b_h.len(), h)?;
        check_dims("rnn w_hz cols", self.w_hz.cols(), h)?;
        check_dims("rnn b_z", self.b_z.len(), self.output_dim())?;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.w_xh.data().len()
            + self.w_hh.data().len()
            + self.b_h.len()
            + self.w_hz.data().len()
            + self.b_z.len()
    }

    fn flatten_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.w_xh.data());
        out.extend_from_slice(self.w_hh.data());
        out.extend_from_slice(&self.b_h);
        out.extend_from_slice(self.w_hz.data());
        out.extend_from_slice(&self.b_z);
    }

    fn read_flat(&mut self, src: &[f64], cursor: &mut usize) {
        copy_matrix(&mut self.w_xh, src, cursor);
        copy_matrix(&mut self.w_hh, src, cursor);
        copy_slice(&mut self.b_h, src, cursor);
        copy_matrix(&mut self.w_hz, src, cursor);
        copy_slice(&mut self.b_z, src, cursor);
    }
}

/// Parameters of the LSTM step: per-gate input and hidden matrices and
/// biases for the input (`i`), forget (`f`), output (`o`) and modulation
/// (`g`) gates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub w_xi: Matrix,
    pub w_hi: Matrix,
    pub b_i: Vec<f64>,
    pub w_xf: Matrix,
    pub w_hf: Matrix,
    pub b_f: Vec<f64>,
    pub w_xo: Matrix,
    pub w_ho: Matrix,
    pub b_o: Vec<f64>,
    pub w_xc: Matrix,
    pub w_hc: Matrix,
    pub b_c: Vec<f64>,
    pub modulation: GateModulation,
}

impl LstmParams {
    pub fn init(
        input_dim: usize,
        hidden_dim: usize,
        modulation: GateModulation,
        rng: &mut impl Rng,
    ) -> Self {
        let mut gate_x = || uniform_fan_in(hidden_dim, input_dim, rng);
        let (w_xi, w_xf, w_xo, w_xc) = (gate_x(), gate_x(), gate_x(), gate_x());
        let mut gate_h = || uniform_fan_in(hidden_dim, hidden_dim, rng);
        let (w_hi, w_hf, w_ho, w_hc) = (gate_h(), gate_h(), gate_h(), gate_h());
        Self {
            w_xi,
            w_hi,
            b_i: vec![0.0; hidden_dim],
            w_xf,
            w_hf,
            b_f: vec![0.0; hidden_dim],
            w_xo,
            w_ho,
            b_o: vec![0.0; hidden_dim],
            w_xc,
            w_hc,
            b_c: vec![0.0; hidden_dim],
            modulation,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize, modulation: GateModulation) -> Self {
        Self {
            w_xi: Matrix::zeros(hidden_dim, input_dim),
            w_hi: Matrix::zeros(hidden_dim, hidden_dim),
            b_i: vec![0.0; hidden_dim],
            w_xf: Matrix::zeros(hidden_dim, input_dim),
            w_hf: Matrix::zeros(hidden_dim, hidden_dim),
            b_f: vec![0.0; hidden_dim],
            w_xo: Matrix::zeros(hidden_dim, input_dim),
            w_ho: Matrix::zeros(hidden_dim, hidden_dim),
            b_o: vec![0.0; hidden_dim],
            w_xc: Matrix::zeros(hidden_dim, input_dim),
            w_hc: Matrix::zeros(hidden_dim, hidden_dim),
            b_c: vec![0.0; hidden_dim],
            modulation,
        }
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.hidden_dim(), self.modulation)
    }

    pub fn input_dim(&self) -> usize {
        self.w_xi.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_xi.rows()
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let (d, h) = (self.input_dim(), self.hidden_dim());
        for (name, m) in [
            ("lstm w_xf", &self.w_xf),
            ("lstm w_xo", &self.w_xo),
            ("lstm w_xc", &self.w_xc),
        ] {
            check_dims(name, m.rows(), h)?;
            check_dims(name, m.cols(), d)?;
        }
        for (name, m) in [
            ("lstm w_hi", &self.w_hi),
            ("lstm w_hf", &self.w_hf),
            ("lstm w_ho", &self.w_ho),
            ("lstm w_hc", &self.w_hc),
        ] {
            check_dims(name, m.rows(), h)?;
            check_dims(name, m.cols(), h)?;
        }
        for (name, b) in [
            ("lstm b_i", &self.b_i),
            ("lstm b_f", &self.b_f),
            ("lstm b_o", &self.b_o),
            ("lstm b_c", &self.b_c),
        ] {
            check_dims(name, b.len(), h)?;
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        4 * (self.w_xi.data().len() + self.w_hi.data().len() + self.b_i.len())
    }

    fn flatten_into(&self, out: &mut Vec<f64>) {
        for (wx, wh, b) in self.gate_refs() {
            out.extend_from_slice(wx.data());
            out.extend_from_slice(wh.data());
            out.extend_from_slice(b);
        }
    }

    fn read_flat(&mut self, src: &[f64], cursor: &mut usize) {
        copy_matrix(&mut self.w_xi, src, cursor);
        copy_matrix(&mut self.w_hi, src, cursor);
        copy_slice(&mut self.b_i, src, cursor);
        copy_matrix(&mut self.w_xf, src, cursor);
        copy_matrix(&mut self.w_hf, src, cursor);
        copy_slice(&mut self.b_f, src, cursor);
        copy_matrix(&mut self.w_xo, src, cursor);
        copy_matrix(&mut self.w_ho, src, cursor);
        copy_slice(&mut self.b_o, src, cursor);
        copy_matrix(&mut self.w_xc, src, cursor);
        copy_matrix(&mut self.w_hc, src, cursor);
        copy_slice(&mut self.b_c, src, cursor);
    }

    fn gate_refs(&self) -> [(&Matrix, &Matrix, &Vec<f64>); 4] {
        [
            (&self.w_xi, &self.w_hi, &self.b_i),
            (&self.w_xf, &self.w_hf, &self.b_f),
            (&self.w_xo, &self.w_ho, &self.b_o),
            (&self.w_xc, &self.w_hc, &self.b_c),
        ]
    }
}

/// Hidden state and memory cell carried between LSTM steps.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            h: vec![0.0; hidden_dim],
            c: vec![0.0; hidden_dim],
        }
    }
}

/// A single linear map used both as the static per-frame head and as the
/// readout from a recurrent cell to the grid tensor. No output nonlinearity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl DenseParams {
    pub fn init(input_dim: usize, output_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            w: uniform_fan_in(output_dim, input_dim, rng),
            b: vec![0.0; output_dim],
        }
    }

    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Self {
            w: Matrix::zeros(output_dim, input_dim),
            b: vec![0.0; output_dim],
        }
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.output_dim())
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.w.matvec(x);
        for (o, b) in out.iter_mut().zip(&self.b) {
            *o += b;
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.w.data().len() + self.b.len()
    }

    fn flatten_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.w.data());
        out.extend_from_slice(&self.b);
    }

    fn read_flat(&mut self, src: &[f64], cursor: &mut usize) {
        copy_matrix(&mut self.w, src, cursor);
        copy_slice(&mut self.b, src, cursor);
    }
}

fn check_dims(what: &'static str, actual: usize, expected: usize) -> Result<(), NetError> {
    if actual != expected {
        return Err(NetError::DimensionMismatch {
            what,
            expected,
            actual,
        });
    }
    Ok(())
}

fn copy_matrix(m: &mut Matrix, src: &[f64], cursor: &mut usize) {
    let len = m.data().len();
    m.data_mut().copy_from_slice(&src[*cursor..*cursor + len]);
    *cursor += len;
}

fn copy_slice(dst: &mut [f64], src: &[f64], cursor: &mut usize) {
    dst.copy_from_slice(&src[*cursor..*cursor + dst.len()]);
    *cursor += dst.len();
}

/// One plain recurrent step. Returns the new hidden state and the output
/// vector, both squashed by the logistic function.
pub fn rnn_step(params: &RnnParams, x: &[f64], h_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NetError> {
    params.validate()?;
    check_dims("rnn input", x.len(), params.input_dim())?;
    check_dims("rnn hidden state", h_prev.len(), params.hidden_dim())?;

    let mut h = params.w_xh.matvec(x);
    let hh = params.w_hh.matvec(h_prev);
    for ((a, b), bias) in h.iter_mut().zip(&hh).zip(&params.b_h) {
        *a = sigmoid(*a + b + bias);
    }
    let mut z = params.w_hz.matvec(&h);
    for (v, bias) in z.iter_mut().zip(&params.b_z) {
        *v = sigmoid(*v + bias);
    }
    Ok((h, z))
}

/// One LSTM step. All four gates use the logistic function under the default
/// modulation setting; the memory cell is `c = f (*) c_prev + i (*) g` and the
/// output is `h = o (*) tanh(c)`.
pub fn lstm_step(
    params: &LstmParams,
    x: &[f64],
    state: &LstmState,
) -> Result<(LstmState, Vec<f64>), NetError> {
    params.validate()?;
    check_dims("lstm input", x.len(), params.input_dim())?;
    check_dims("lstm hidden state", state.h.len(), params.hidden_dim())?;
    check_dims("lstm memory cell", state.c.len(), params.hidden_dim())?;

    let gates = lstm_gates(params, x, &state.h);
    let hidden = params.hidden_dim();
    let mut c = vec![0.0; hidden];
    let mut h = vec![0.0; hidden];
    for idx in 0..hidden {
        c[idx] = gates.f[idx] * state.c[idx] + gates.i[idx] * gates.g[idx];
        h[idx] = gates.o[idx] * c[idx].tanh();
    }
    let new_state = LstmState { h: h.clone(), c };
    Ok((new_state, h))
}

pub(crate) struct LstmGates {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
}

pub(crate) fn lstm_gates(params: &LstmParams, x: &[f64], h_prev: &[f64]) -> LstmGates {
    let gate = |wx: &Matrix, wh: &Matrix, b: &[f64], squash: &dyn Fn(f64) -> f64| {
        let mut pre = wx.matvec(x);
        let hid = wh.matvec(h_prev);
        for ((p, h), bias) in pre.iter_mut().zip(&hid).zip(b) {
            *p = squash(*p + h + bias);
        }
        pre
    };
    let modulation = params.modulation;
    LstmGates {
        i: gate(&params.w_xi, &params.w_hi, &params.b_i, &sigmoid),
        f: gate(&params.w_xf, &params.w_hf, &params.b_f, &sigmoid),
        o: gate(&params.w_xo, &params.w_ho, &params.b_o, &sigmoid),
        g: gate(&params.w_xc, &params.w_hc, &params.b_c, &|v| {
            modulation.apply(v)
        }),
    }
}

/// The static per-frame head: a linear map from frame features to the grid
/// tensor.
pub fn static_step(params: &DenseParams, x: &[f64], shape: GridShape) -> Result<GridTensor, NetError> {
    check_dims("dense input", x.len(), params.input_dim())?;
    check_dims("dense output", params.output_dim(), shape.len())?;
    Ok(GridTensor::from_values(shape, params.apply(x))?)
}

/// The recurrent cell alternatives a sequence head can be built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)] // parameter bulk lives in heap vectors
pub enum RecurrentCellParams {
    Rnn(RnnParams),
    Lstm(LstmParams),
}

impl RecurrentCellParams {
    pub fn input_dim(&self) -> usize {
        match self {
            RecurrentCellParams::Rnn(p) => p.input_dim(),
            RecurrentCellParams::Lstm(p) => p.input_dim(),
        }
    }

    /// Dimension of the per-step vector handed to the readout.
    pub fn cell_output_dim(&self) -> usize {
        match self {
            RecurrentCellParams::Rnn(p) => p.output_dim(),
            RecurrentCellParams::Lstm(p) => p.hidden_dim(),
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        match self {
            RecurrentCellParams::Rnn(p) => p.validate(),
            RecurrentCellParams::Lstm(p) => p.validate(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            RecurrentCellParams::Rnn(p) => p.param_count(),
            RecurrentCellParams::Lstm(p) => p.param_count(),
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            RecurrentCellParams::Rnn(p) => RecurrentCellParams::Rnn(p.zeros_like()),
            RecurrentCellParams::Lstm(p) => RecurrentCellParams::Lstm(p.zeros_like()),
        }
    }

    fn flatten_into(&self, out: &mut Vec<f64>) {
        match self {
            RecurrentCellParams::Rnn(p) => p.flatten_into(out),
            RecurrentCellParams::Lstm(p) => p.flatten_into(out),
        }
    }

    fn read_flat(&mut self, src: &[f64], cursor: &mut usize) {
        match self {
            RecurrentCellParams::Rnn(p) => p.read_flat(src, cursor),
            RecurrentCellParams::Lstm(p) => p.read_flat(src, cursor),
        }
    }
}

/// Per-frame head: one linear readout from frame features to the tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticHead {
    pub readout: DenseParams,
    pub shape: GridShape,
}

impl StaticHead {
    pub fn new(readout: DenseParams, shape: GridShape) -> Result<Self, NetError> {
        check_dims("static readout output", readout.output_dim(), shape.len())?;
        Ok(Self { readout, shape })
    }

    pub fn init(input_dim: usize, shape: GridShape, rng: &mut impl Rng) -> Self {
        Self {
            readout: DenseParams::init(input_dim, shape.len(), rng),
            shape,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.readout.input_dim()
    }

    pub fn forward(&self, x: &[f64]) -> Result<GridTensor, NetError> {
        static_step(&self.readout, x, self.shape)
    }

    pub fn param_count(&self) -> usize {
        self.readout.param_count()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.readout.flatten_into(&mut out);
        out
    }

    pub fn set_params_flat(&mut self, src: &[f64]) -> Result<(), NetError> {
        check_dims("flat parameter vector", src.len(), self.param_count())?;
        let mut cursor = 0;
        self.readout.read_flat(src, &mut cursor);
        Ok(())
    }
}

/// Sequence head: a recurrent cell followed by a linear readout to the
/// tensor, applied frame by frame in temporal order.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentHead {
    pub cell: RecurrentCellParams,
    pub readout: DenseParams,
    pub shape: GridShape,
}

impl RecurrentHead {
    pub fn new(
        cell: RecurrentCellParams,
        readout: DenseParams,
        shape: GridShape,
    ) -> Result<Self, NetError> {
        cell.validate()?;
        check_dims("readout input", readout.input_dim(), cell.cell_output_dim())?;
        check_dims("readout output", readout.output_dim(), shape.len())?;
        Ok(Self {
            cell,
            readout,
            shape,
        })
    }

    pub fn init_lstm(
        input_dim: usize,
        hidden_dim: usize,
        shape: GridShape,
        modulation: GateModulation,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            cell: RecurrentCellParams::Lstm(LstmParams::init(input_dim, hidden_dim, modulation, rng)),
            readout: DenseParams::init(hidden_dim, shape.len(), rng),
            shape,
        }
    }

    pub fn init_rnn(input_dim: usize, hidden_dim: usize, shape: GridShape, rng: &mut impl Rng) -> Self {
        // The plain cell's own output map feeds the readout, so its output
        // dimension doubles as the readout input dimension.
        Self {
            cell: RecurrentCellParams::Rnn(RnnParams::init(input_dim, hidden_dim, hidden_dim, rng)),
            readout: DenseParams::init(hidden_dim, shape.len(), rng),
            shape,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.cell.input_dim()
    }

    pub fn param_count(&self) -> usize {
        self.cell.param_count() + self.readout.param_count()
    }

    /// Canonical flat layout: cell parameters in declared order, then the
    /// readout. Matrices are row-major.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.cell.flatten_into(&mut out);
        self.readout.flatten_into(&mut out);
        out
    }

    pub fn set_params_flat(&mut self, src: &[f64]) -> Result<(), NetError> {
        check_dims("flat parameter vector", src.len(), self.param_count())?;
        let mut cursor = 0;
        self.cell.read_flat(src, &mut cursor);
        self.readout.read_flat(src, &mut cursor);
        Ok(())
    }

    pub(crate) fn gradient_buffer(&self) -> RecurrentHead {
        RecurrentHead {
            cell: self.cell.zeros_like(),
            readout: self.readout.zeros_like(),
            shape: self.shape,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rnn_zero_case() {
        let params = RnnParams::zeros(3, 2, 2);
        let (h, z) = rnn_step(&params, &[0.0; 3], &[0.0; 2]).unwrap();
        for v in h.iter().chain(&z) {
            assert_eq!(*v, 0.5);
        }
    }

    #[test]
    fn rnn_bias_drives_hidden() {
        // Frozen closed form: sigma(2) = 1/(1 + e^-2).
        let mut params = RnnParams::zeros(1, 1, 1);
        params.b_h[0] = 2.0;
        let (h, _) = rnn_step(&params, &[0.0], &[0.0]).unwrap();
        assert!((h[0] - 0.8807970779778823).abs() < 1e-15);
    }

    #[test]
    fn rnn_outputs_stay_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = RnnParams::init(4, 3, 5, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-100.0..100.0)).collect();
        let h_prev: Vec<f64> = (0..3).map(|_| rng.random_range(-100.0..100.0)).collect();
        let (h, z) = rnn_step(&params, &x, &h_prev).unwrap();
        for v in h.iter().chain(&z) {
            assert!(*v > 0.0 && *v < 1.0);
        }
    }

    #[test]
    fn rnn_dimension_mismatch() {
        let params = RnnParams::zeros(3, 2, 2);
        assert!(matches!(
            rnn_step(&params, &[0.0; 4], &[0.0; 2]),
            Err(NetError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lstm_zero_case() {
        // Frozen closed form: gates all 0.5, c = 0.25, h = 0.5 * tanh(0.25).
        let params = LstmParams::zeros(3, 2, GateModulation::Sigmoid);
        let state = LstmState::zeros(2);
        let (new_state, out) = lstm_step(&params, &[0.0; 3], &state).unwrap();
        let expected = 0.5 * 0.25f64.tanh();
        for (c, h) in new_state.c.iter().zip(&out) {
            assert!((c - 0.25).abs() < 1e-15);
            assert!((h - expected).abs() < 1e-15);
            assert!((h - 0.122459331201854).abs() < 1e-12);
        }
    }

    #[test]
    fn lstm_saturated_gates_retain_memory() {
        let mut params = LstmParams::zeros(2, 2, GateModulation::Sigmoid);
        for v in params.b_f.iter_mut() {
            *v = 40.0; // forget gate pinned to 1
        }
        for v in params.b_i.iter_mut() {
            *v = -40.0; // input gate pinned to 0
        }
        let state = LstmState {
            h: vec![0.3, -0.1],
            c: vec![0.7, -0.2],
        };
        let (new_state, _) = lstm_step(&params, &[1.0, -1.0], &state).unwrap();
        for (new, old) in new_state.c.iter().zip(&state.c) {
            assert!((new - old).abs() < 1e-6);
        }
    }

    #[test]
    fn lstm_hidden_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for modulation in [GateModulation::Sigmoid, GateModulation::Tanh] {
            let params = LstmParams::init(4, 6, modulation, &mut rng);
            let mut state = LstmState::zeros(6);
            for _ in 0..50 {
                let x: Vec<f64> = (0..4).map(|_| rng.random_range(-10.0..10.0)).collect();
                let (next, out) = lstm_step(&params, &x, &state).unwrap();
                assert_eq!(next.h, out);
                for v in &out {
                    assert!(v.abs() < 1.0);
                }
                state = next;
            }
        }
    }

    #[test]
    fn static_step_shapes() {
        let shape = GridShape::new(1, 1).unwrap();
        let params = DenseParams::zeros(4, shape.len());
        let t = static_step(&params, &[1.0; 4], shape).unwrap();
        assert!(t.values().iter().all(|v| *v == 0.0));

        let mut identity = DenseParams::zeros(7, shape.len());
        for i in 0..7 {
            identity.w.set(i, i, 1.0);
        }
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
        let t = static_step(&identity, &x, shape).unwrap();
        assert_eq!(t.values(), &x);
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = GridShape::new(2, 1).unwrap();
        let mut head = RecurrentHead::init_lstm(3, 4, shape, GateModulation::Sigmoid, &mut rng);
        let flat = head.params_flat();
        assert_eq!(flat.len(), head.param_count());
        let mut perturbed = flat.clone();
        perturbed[5] += 1.0;
        head.set_params_flat(&perturbed).unwrap();
        assert_eq!(head.params_flat(), perturbed);
    }
}
