//! From-scratch LSTM cell: parameters, the single-step update, and the
//! cached step used by backpropagation through time.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GATE_NAMES: [&str; 4] = ["input", "forget", "cell", "output"];

/// One gate's parameters: input weights (hidden x input), recurrent weights
/// (hidden x hidden), and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub w_x: Vec<f64>,
    pub w_h: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameters of the four gates in (input, forget, cell, output) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub gates: [GateParams; 4],
}

impl LstmParams {
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let lim_x = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        let lim_h = (6.0 / (2 * hidden_dim) as f64).sqrt();
        let gates = std::array::from_fn(|gate| GateParams {
            w_x: (0..hidden_dim * input_dim)
                .map(|_| rng.gen_range(-lim_x..=lim_x))
                .collect(),
            w_h: (0..hidden_dim * hidden_dim)
                .map(|_| rng.gen_range(-lim_h..=lim_h))
                .collect(),
            // a positive forget bias keeps early memory alive
            bias: vec![if gate == 1 { 1.0 } else { 0.0 }; hidden_dim],
        });
        LstmParams {
            input_dim,
            hidden_dim,
            gates,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let gates = std::array::from_fn(|_| GateParams {
            w_x: vec![0.0; hidden_dim * input_dim],
            w_h: vec![0.0; hidden_dim * hidden_dim],
            bias: vec![0.0; hidden_dim],
        });
        LstmParams {
            input_dim,
            hidden_dim,
            gates,
        }
    }

    pub fn param_count(&self) -> usize {
        4 * (self.hidden_dim * self.input_dim + self.hidden_dim * self.hidden_dim + self.hidden_dim)
    }
}

/// Hidden and cell state of one LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        LstmState {
            hidden: vec![0.0; hidden_dim],
            cell: vec![0.0; hidden_dim],
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-step activations kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub gate_i: Vec<f64>,
    pub gate_f: Vec<f64>,
    pub gate_g: Vec<f64>,
    pub gate_o: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

/// One LSTM update with cached gate activations.
pub(crate) fn lstm_step_cached(
    params: &LstmParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> (Vec<f64>, Vec<f64>, StepCache) {
    let hd = params.hidden_dim;
    let id = params.input_dim;
    let mut acts: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hd]);
    for (gate, act) in acts.iter_mut().enumerate() {
        let p = &params.gates[gate];
        for (h, a) in act.iter_mut().enumerate() {
            let mut v = p.bias[h];
            let wx = &p.w_x[h * id..(h + 1) * id];
            for (w, xi) in wx.iter().zip(x) {
                v += w * xi;
            }
            let wh = &p.w_h[h * hd..(h + 1) * hd];
            for (w, hj) in wh.iter().zip(h_prev) {
                v += w * hj;
            }
            *a = v;
        }
    }
    let [ai, af, ag, ao] = acts;
    let gate_i: Vec<f64> = ai.iter().map(|a| sigmoid(*a)).collect();
    let gate_f: Vec<f64> = af.iter().map(|a| sigmoid(*a)).collect();
    let gate_g: Vec<f64> = ag.iter().map(|a| a.tanh()).collect();
    let gate_o: Vec<f64> = ao.iter().map(|a| sigmoid(*a)).collect();
    let mut cell = vec![0.0; hd];
    let mut tanh_c = vec![0.0; hd];
    let mut hidden = vec![0.0; hd];
    for h in 0..hd {
        cell[h] = gate_f[h] * c_prev[h] + gate_i[h] * gate_g[h];
        tanh_c[h] = cell[h].tanh();
        hidden[h] = gate_o[h] * tanh_c[h];
    }
    (
        hidden,
        cell,
        StepCache {
            gate_i,
            gate_f,
            gate_g,
            gate_o,
            tanh_c,
        },
    )
}

/// Standard LSTM update: sigmoid input/forget/output gates, tanh candidate
/// and cell activation.
pub fn lstm_step(x: &[f64], state: &LstmState, params: &LstmParams) -> Result<LstmState> {
    if x.len() != params.input_dim {
        return Err(Error::InvalidArgument(format!(
            "input has dimension {}, LSTM expects {}",
            x.len(),
            params.input_dim
        )));
    }
    if state.hidden.len() != params.hidden_dim || state.cell.len() != params.hidden_dim {
        return Err(Error::InvalidArgument(format!(
            "state has dimensions ({}, {}), LSTM expects {}",
            state.hidden.len(),
            state.cell.len(),
            params.hidden_dim
        )));
    }
    let (hidden, cell, _) = lstm_step_cached(params, x, &state.hidden, &state.cell);
    for v in hidden.iter().chain(&cell) {
        if !v.is_finite() {
            return Err(Error::Numeric(format!("non-finite LSTM state value {v}")));
        }
    }
    Ok(LstmState { hidden, cell })
}
