//! Backpropagation through time for the sequence heads, plus the single-step
//! parameter gradient of the static head.
//!
//! Gradients come back as one flat vector in the same canonical layout as
//! `params_flat`, ready for the optimizer.

use crate::grid::{FrameTarget, GridTensor};

use super::loss::{grid_loss, loss_gradient, LossWeights};
use super::{
    lstm_gates, sigmoid, LstmParams, NetError, RecurrentCellParams, RecurrentHead, RnnParams,
    StaticHead,
};

fn check_sequence(
    head: &RecurrentHead,
    inputs: &[Vec<f64>],
    targets: &[FrameTarget],
) -> Result<(), NetError> {
    if inputs.is_empty() {
        return Err(NetError::EmptySequence);
    }
    if inputs.len() != targets.len() {
        return Err(NetError::LengthMismatch {
            inputs: inputs.len(),
            targets: targets.len(),
        });
    }
    head.cell.validate()?;
    for x in inputs {
        if x.len() != head.input_dim() {
            return Err(NetError::DimensionMismatch {
                what: "sequence input",
                expected: head.input_dim(),
                actual: x.len(),
            });
        }
    }
    Ok(())
}

/// Runs the head over a sequence in temporal order, returning one grid
/// tensor per frame. State starts at zero.
pub fn forward_sequence(head: &RecurrentHead, inputs: &[Vec<f64>]) -> Result<Vec<GridTensor>, NetError> {
    if inputs.is_empty() {
        return Err(NetError::EmptySequence);
    }
    head.cell.validate()?;
    for x in inputs {
        if x.len() != head.input_dim() {
            return Err(NetError::DimensionMismatch {
                what: "sequence input",
                expected: head.input_dim(),
                actual: x.len(),
            });
        }
    }
    let outputs = match &head.cell {
        RecurrentCellParams::Lstm(cell) => LstmTrace::run(cell, inputs).cell_outputs,
        RecurrentCellParams::Rnn(cell) => RnnTrace::run(cell, inputs).z,
    };
    outputs
        .iter()
        .map(|v| Ok(crate::grid::GridTensor::from_values(head.shape, head.readout.apply(v))?))
        .collect()
}

/// Total loss over a sequence and its gradient with respect to every head
/// parameter, accumulated through the recurrence.
pub fn bptt(
    head: &RecurrentHead,
    inputs: &[Vec<f64>],
    targets: &[FrameTarget],
    weights: &LossWeights,
) -> Result<(Vec<f64>, f64), NetError> {
    check_sequence(head, inputs, targets)?;
    let mut grad = head.gradient_buffer();

    let total_loss = match (&head.cell, &mut grad.cell) {
        (RecurrentCellParams::Lstm(cell), RecurrentCellParams::Lstm(cell_grad)) => {
            let trace = LstmTrace::run(cell, inputs);
            backward_readout_then(
                head,
                inputs,
                targets,
                weights,
                &trace.cell_outputs,
                &mut grad.readout,
                |t, d_out, carry| trace.backward_step(cell, cell_grad, inputs, t, d_out, carry),
                LstmCarry::zeros(cell.hidden_dim()),
            )?
        }
        (RecurrentCellParams::Rnn(cell), RecurrentCellParams::Rnn(cell_grad)) => {
            let trace = RnnTrace::run(cell, inputs);
            backward_readout_then(
                head,
                inputs,
                targets,
                weights,
                &trace.z,
                &mut grad.readout,
                |t, d_out, carry| trace.backward_step(cell, cell_grad, inputs, t, d_out, carry),
                vec![0.0; cell.hidden_dim()],
            )?
        }
        _ => unreachable!("gradient buffer mirrors the head"),
    };

    Ok((grad.params_flat(), total_loss))
}

/// Shared outer loop: fold the loss gradient through the readout at each
/// frame (back to front), then let the cell-specific closure push it through
/// the recurrence.
#[allow(clippy::too_many_arguments)]
fn backward_readout_then<Carry>(
    head: &RecurrentHead,
    inputs: &[Vec<f64>],
    targets: &[FrameTarget],
    weights: &LossWeights,
    cell_outputs: &[Vec<f64>],
    readout_grad: &mut super::DenseParams,
    mut backward_cell: impl FnMut(usize, &[f64], Carry) -> Carry,
    zero_carry: Carry,
) -> Result<f64, NetError> {
    let mut total_loss = 0.0;
    let mut frame_grads: Vec<Vec<f64>> = Vec::with_capacity(inputs.len());
    for (out, target) in cell_outputs.iter().zip(targets) {
        let pred = GridTensor::from_values(head.shape, head.readout.apply(out))?;
        total_loss += grid_loss(&pred, target, weights)?.total();
        frame_grads.push(loss_gradient(&pred, target, weights)?.values().to_vec());
    }

    let mut carry = zero_carry;
    for t in (0..inputs.len()).rev() {
        let d_pred = &frame_grads[t];
        readout_grad.w.add_outer(d_pred, &cell_outputs[t]);
        for (b, g) in readout_grad.b.iter_mut().zip(d_pred) {
            *b += g;
        }
        let d_out = head.readout.w.matvec_transpose(d_pred);
        carry = backward_cell(t, &d_out, carry);
    }
    Ok(total_loss)
}

struct LstmCarry {
    dh: Vec<f64>,
    dc: Vec<f64>,
}

impl LstmCarry {
    fn zeros(hidden: usize) -> Self {
        Self {
            dh: vec![0.0; hidden],
            dc: vec![0.0; hidden],
        }
    }
}

/// Forward activations of an LSTM pass; `h[t]`/`c[t]` are the state *before*
/// step `t`, so they run one longer than the sequence.
struct LstmTrace {
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    gate_i: Vec<Vec<f64>>,
    gate_f: Vec<Vec<f64>>,
    gate_o: Vec<Vec<f64>>,
    gate_g: Vec<Vec<f64>>,
    tanh_c: Vec<Vec<f64>>,
    cell_outputs: Vec<Vec<f64>>,
}

impl LstmTrace {
    fn run(cell: &LstmParams, inputs: &[Vec<f64>]) -> Self {
        let hidden = cell.hidden_dim();
        let mut trace = LstmTrace {
            h: vec![vec![0.0; hidden]],
            c: vec![vec![0.0; hidden]],
            gate_i: Vec::new(),
            gate_f: Vec::new(),
            gate_o: Vec::new(),
            gate_g: Vec::new(),
            tanh_c: Vec::new(),
            cell_outputs: Vec::new(),
        };
        for x in inputs {
            let gates = lstm_gates(cell, x, trace.h.last().unwrap());
            let c_prev = trace.c.last().unwrap();
            let mut c_new = vec![0.0; hidden];
            let mut tanh_c = vec![0.0; hidden];
            let mut h_new = vec![0.0; hidden];
            for k in 0..hidden {
                c_new[k] = gates.f[k] * c_prev[k] + gates.i[k] * gates.g[k];
                tanh_c[k] = c_new[k].tanh();
                h_new[k] = gates.o[k] * tanh_c[k];
            }
            trace.gate_i.push(gates.i);
            trace.gate_f.push(gates.f);
            trace.gate_o.push(gates.o);
            trace.gate_g.push(gates.g);
            trace.tanh_c.push(tanh_c);
            trace.cell_outputs.push(h_new.clone());
            trace.h.push(h_new);
            trace.c.push(c_new);
        }
        trace
    }

    fn backward_step(
        &self,
        cell: &LstmParams,
        grad: &mut LstmParams,
        inputs: &[Vec<f64>],
        t: usize,
        d_out: &[f64],
        carry: LstmCarry,
    ) -> LstmCarry {
        let hidden = cell.hidden_dim();
        let (i, f, o, g) = (&self.gate_i[t], &self.gate_f[t], &self.gate_o[t], &self.gate_g[t]);
        let tanh_c = &self.tanh_c[t];
        let c_prev = &self.c[t];
        let h_prev = &self.h[t];
        let x = &inputs[t];

        let mut da_i = vec![0.0; hidden];
        let mut da_f = vec![0.0; hidden];
        let mut da_o = vec![0.0; hidden];
        let mut da_g = vec![0.0; hidden];
        let mut dc_prev = vec![0.0; hidden];
        for k in 0..hidden {
            let dh = d_out[k] + carry.dh[k];
            let d_o = dh * tanh_c[k];
            let dc = carry.dc[k] + dh * o[k] * (1.0 - tanh_c[k] * tanh_c[k]);
            let d_f = dc * c_prev[k];
            let d_i = dc * g[k];
            let d_g = dc * i[k];
            dc_prev[k] = dc * f[k];
            da_i[k] = d_i * i[k] * (1.0 - i[k]);
            da_f[k] = d_f * f[k] * (1.0 - f[k]);
            da_o[k] = d_o * o[k] * (1.0 - o[k]);
            da_g[k] = d_g * cell.modulation.derivative_from_value(g[k]);
        }

        grad.w_xi.add_outer(&da_i, x);
        grad.w_hi.add_outer(&da_i, h_prev);
        add_assign(&mut grad.b_i, &da_i);
        grad.w_xf.add_outer(&da_f, x);
        grad.w_hf.add_outer(&da_f, h_prev);
        add_assign(&mut grad.b_f, &da_f);
        grad.w_xo.add_outer(&da_o, x);
        grad.w_ho.add_outer(&da_o, h_prev);
        add_assign(&mut grad.b_o, &da_o);
        grad.w_xc.add_outer(&da_g, x);
        grad.w_hc.add_outer(&da_g, h_prev);
        add_assign(&mut grad.b_c, &da_g);

        let mut dh_prev = cell.w_hi.matvec_transpose(&da_i);
        add_assign(&mut dh_prev, &cell.w_hf.matvec_transpose(&da_f));
        add_assign(&mut dh_prev, &cell.w_ho.matvec_transpose(&da_o));
        add_assign(&mut dh_prev, &cell.w_hc.matvec_transpose(&da_g));

        LstmCarry {
            dh: dh_prev,
            dc: dc_prev,
        }
    }
}

/// Forward activations of a plain recurrent pass; `h[t]` is again the state
/// before step `t`, and `z[t]` the squashed per-frame output.
struct RnnTrace {
    h: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
}

impl RnnTrace {
    fn run(cell: &RnnParams, inputs: &[Vec<f64>]) -> Self {
        let hidden = cell.hidden_dim();
        let mut trace = RnnTrace {
            h: vec![vec![0.0; hidden]],
            z: Vec::new(),
        };
        for x in inputs {
            let mut h = cell.w_xh.matvec(x);
            let hh = cell.w_hh.matvec(trace.h.last().unwrap());
            for ((a, b), bias) in h.iter_mut().zip(&hh).zip(&cell.b_h) {
                *a = sigmoid(*a + b + bias);
            }
            let mut z = cell.w_hz.matvec(&h);
            for (v, bias) in z.iter_mut().zip(&cell.b_z) {
                *v = sigmoid(*v + bias);
            }
            trace.h.push(h);
            trace.z.push(z);
        }
        trace
    }

    fn backward_step(
        &self,
        cell: &RnnParams,
        grad: &mut RnnParams,
        inputs: &[Vec<f64>],
        t: usize,
        d_out: &[f64],
        dh_next: Vec<f64>,
    ) -> Vec<f64> {
        let z = &self.z[t];
        let h = &self.h[t + 1];
        let h_prev = &self.h[t];
        let x = &inputs[t];

        let da_z: Vec<f64> = d_out
            .iter()
            .zip(z)
            .map(|(d, zv)| d * zv * (1.0 - zv))
            .collect();
        grad.w_hz.add_outer(&da_z, h);
        add_assign(&mut grad.b_z, &da_z);

        let mut dh = cell.w_hz.matvec_transpose(&da_z);
        add_assign(&mut dh, &dh_next);
        let da_h: Vec<f64> = dh
            .iter()
            .zip(h)
            .map(|(d, hv)| d * hv * (1.0 - hv))
            .collect();
        grad.w_xh.add_outer(&da_h, x);
        grad.w_hh.add_outer(&da_h, h_prev);
        add_assign(&mut grad.b_h, &da_h);

        cell.w_hh.matvec_transpose(&da_h)
    }
}

fn add_assign(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Loss and flat parameter gradient of the static head on one frame.
pub fn static_gradient(
    head: &StaticHead,
    x: &[f64],
    target: &FrameTarget,
    weights: &LossWeights,
) -> Result<(Vec<f64>, f64), NetError> {
    let pred = head.forward(x)?;
    let loss = grid_loss(&pred, target, weights)?.total();
    let d_pred = loss_gradient(&pred, target, weights)?;

    let mut w_grad = super::Matrix::zeros(head.readout.output_dim(), head.readout.input_dim());
    w_grad.add_outer(d_pred.values(), x);
    let mut flat = Vec::with_capacity(head.param_count());
    flat.extend_from_slice(w_grad.data());
    flat.extend_from_slice(d_pred.values());
    Ok((flat, loss))
}
