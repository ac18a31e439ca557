use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Param};

use super::LstmParams;

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl EncoderState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything one LSTM step produced, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct LstmStepTrace {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    /// Candidate cell `c~`.
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

fn preact(wx: &Param, wh: &Param, b: &Param, x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut a = b.value.as_slice().to_vec();
    wx.value.matvec_acc(x, &mut a);
    wh.value.matvec_acc(h, &mut a);
    a
}

/// One encoder step:
/// `i, f = sigmoid(.)`, `c~ = tanh(.)`, `o = tanh(.)` (or sigmoid with the
/// standard gate), `c = f*c_prev + i*c~`, `h = o*tanh(c)`.
pub fn lstm_step(
    x: &[f64],
    state: &EncoderState,
    p: &LstmParams,
    standard_output_gate: bool,
) -> Result<(EncoderState, LstmStepTrace)> {
    if x.len() != p.input_dim() {
        return Err(Error::shape("lstm input", p.input_dim(), x.len()));
    }
    let hd = p.hidden_dim();
    if state.h.len() != hd || state.c.len() != hd {
        return Err(Error::shape("lstm state", hd, format!("h {} / c {}", state.h.len(), state.c.len())));
    }
    let i: Vec<f64> = preact(&p.w_ix, &p.w_ih, &p.b_i, x, &state.h).into_iter().map(sigmoid).collect();
    let f: Vec<f64> = preact(&p.w_fx, &p.w_fh, &p.b_f, x, &state.h).into_iter().map(sigmoid).collect();
    let g: Vec<f64> = preact(&p.w_gx, &p.w_gh, &p.b_g, x, &state.h).into_iter().map(f64::tanh).collect();
    let o_pre = preact(&p.w_ox, &p.w_oh, &p.b_o, x, &state.h);
    let o: Vec<f64> = if standard_output_gate {
        o_pre.into_iter().map(sigmoid).collect()
    } else {
        o_pre.into_iter().map(f64::tanh).collect()
    };
    let c: Vec<f64> = (0..hd).map(|k| f[k] * state.c[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..hd).map(|k| o[k] * tanh_c[k]).collect();
    let next = EncoderState {
        h: h.clone(),
        c: c.clone(),
    };
    let trace = LstmStepTrace {
        x: x.to_vec(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        i,
        f,
        g,
        o,
        c,
        tanh_c,
        h,
    };
    Ok((next, trace))
}

fn accumulate(wx: &mut Param, wh: &mut Param, b: &mut Param, da: &[f64], t: &LstmStepTrace, dx: &mut [f64], dh: &mut [f64]) {
    wx.grad.outer_acc(da, &t.x, 1.0);
    wh.grad.outer_acc(da, &t.h_prev, 1.0);
    b.grad.add_scaled(da, 1.0);
    wx.value.matvec_t_acc(da, dx);
    wh.value.matvec_t_acc(da, dh);
}

/// Backward through one step given `dL/dh` and `dL/dc` flowing in from
/// later steps. Accumulates parameter gradients and returns
/// `(dL/dx, dL/dh_prev, dL/dc_prev)`.
pub fn lstm_step_backward(
    t: &LstmStepTrace,
    dh: &[f64],
    dc: &[f64],
    p: &mut LstmParams,
    standard_output_gate: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hd = t.h.len();
    let mut da_i = vec![0.0; hd];
    let mut da_f = vec![0.0; hd];
    let mut da_g = vec![0.0; hd];
    let mut da_o = vec![0.0; hd];
    let mut dc_prev = vec![0.0; hd];
    for k in 0..hd {
        let d_o = dh[k] * t.tanh_c[k];
        let dct = dc[k] + dh[k] * t.o[k] * (1.0 - t.tanh_c[k] * t.tanh_c[k]);
        let d_i = dct * t.g[k];
        let d_g = dct * t.i[k];
        let d_f = dct * t.c_prev[k];
        dc_prev[k] = dct * t.f[k];
        da_i[k] = d_i * t.i[k] * (1.0 - t.i[k]);
        da_f[k] = d_f * t.f[k] * (1.0 - t.f[k]);
        da_g[k] = d_g * (1.0 - t.g[k] * t.g[k]);
        da_o[k] = if standard_output_gate {
            d_o * t.o[k] * (1.0 - t.o[k])
        } else {
            d_o * (1.0 - t.o[k] * t.o[k])
        };
    }
    let mut dx = vec![0.0; t.x.len()];
    let mut dh_prev = vec![0.0; hd];
    accumulate(&mut p.w_ix, &mut p.w_ih, &mut p.b_i, &da_i, t, &mut dx, &mut dh_prev);
    accumulate(&mut p.w_fx, &mut p.w_fh, &mut p.b_f, &da_f, t, &mut dx, &mut dh_prev);
    accumulate(&mut p.w_gx, &mut p.w_gh, &mut p.b_g, &da_g, t, &mut dx, &mut dh_prev);
    accumulate(&mut p.w_ox, &mut p.w_oh, &mut p.b_o, &da_o, t, &mut dx, &mut dh_prev);
    (dx, dh_prev, dc_prev)
}
