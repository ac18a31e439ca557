use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Param};
use crate::text::TokenId;

use super::GruParams;

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderState {
    pub p: Vec<f64>,
}

impl DecoderState {
    pub fn zeros(hidden: usize) -> Self {
        Self { p: vec![0.0; hidden] }
    }
}

/// Intermediate values of one decoder step.
#[derive(Clone, Debug)]
pub struct GruStepTrace {
    /// Word embedding actually fed (after any dropout mask).
    pub e: Vec<f64>,
    pub v: Vec<f64>,
    pub p_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub rp: Vec<f64>,
    /// Candidate state `p~`.
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

fn preact3(ww: &Param, wv: &Param, wp: &Param, b: &Param, e: &[f64], v: &[f64], p: &[f64]) -> Vec<f64> {
    let mut a = b.value.as_slice().to_vec();
    ww.value.matvec_acc(e, &mut a);
    wv.value.matvec_acc(v, &mut a);
    wp.value.matvec_acc(p, &mut a);
    a
}

/// One decoder step from the previous word id.
pub fn gru_step(
    prev_word: TokenId,
    v: &[f64],
    state: &DecoderState,
    params: &GruParams,
) -> Result<(DecoderState, GruStepTrace)> {
    if prev_word as usize >= params.vocab_size() {
        return Err(Error::Usage(format!(
            "word id {prev_word} out of range for vocabulary of {}",
            params.vocab_size()
        )));
    }
    let e = params.embed.value.row(prev_word as usize).to_vec();
    gru_step_embedded(e, v, state, params)
}

pub(crate) fn gru_step_embedded(
    e: Vec<f64>,
    v: &[f64],
    state: &DecoderState,
    params: &GruParams,
) -> Result<(DecoderState, GruStepTrace)> {
    let hd = params.hidden_dim();
    if v.len() != params.w_zv.value.cols() {
        return Err(Error::shape("gru video code", params.w_zv.value.cols(), v.len()));
    }
    if state.p.len() != hd {
        return Err(Error::shape("gru state", hd, state.p.len()));
    }
    let p_prev = &state.p;
    let z: Vec<f64> = preact3(&params.w_zw, &params.w_zv, &params.w_zp, &params.b_z, &e, v, p_prev)
        .into_iter()
        .map(sigmoid)
        .collect();
    let r: Vec<f64> = preact3(&params.w_rw, &params.w_rv, &params.w_rp, &params.b_r, &e, v, p_prev)
        .into_iter()
        .map(sigmoid)
        .collect();
    let rp: Vec<f64> = r.iter().zip(p_prev).map(|(a, b)| a * b).collect();
    let q: Vec<f64> = preact3(&params.w_pw, &params.w_pv, &params.w_pp, &params.b_p, &e, v, &rp)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let p: Vec<f64> = (0..hd).map(|k| (1.0 - z[k]) * p_prev[k] + z[k] * q[k]).collect();
    let trace = GruStepTrace {
        e,
        v: v.to_vec(),
        p_prev: p_prev.clone(),
        z,
        r,
        rp,
        q,
        p: p.clone(),
    };
    Ok((DecoderState { p }, trace))
}

/// Returns `(dL/de, dL/dv, dL/dp_prev)` and accumulates the gate weight
/// gradients. The caller routes `dL/de` into the embedding row.
pub fn gru_step_backward(t: &GruStepTrace, dp: &[f64], params: &mut GruParams) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hd = t.p.len();
    let mut de = vec![0.0; t.e.len()];
    let mut dv = vec![0.0; t.v.len()];
    let mut dp_prev = vec![0.0; hd];
    let mut da_q = vec![0.0; hd];
    let mut da_z = vec![0.0; hd];
    for k in 0..hd {
        let dz = dp[k] * (t.q[k] - t.p_prev[k]);
        let dq = dp[k] * t.z[k];
        dp_prev[k] = dp[k] * (1.0 - t.z[k]);
        da_q[k] = dq * (1.0 - t.q[k] * t.q[k]);
        da_z[k] = dz * t.z[k] * (1.0 - t.z[k]);
    }

    params.w_pw.grad.outer_acc(&da_q, &t.e, 1.0);
    params.w_pv.grad.outer_acc(&da_q, &t.v, 1.0);
    params.w_pp.grad.outer_acc(&da_q, &t.rp, 1.0);
    params.b_p.grad.add_scaled(&da_q, 1.0);
    params.w_pw.value.matvec_t_acc(&da_q, &mut de);
    params.w_pv.value.matvec_t_acc(&da_q, &mut dv);
    let mut drp = vec![0.0; hd];
    params.w_pp.value.matvec_t_acc(&da_q, &mut drp);

    let mut da_r = vec![0.0; hd];
    for k in 0..hd {
        dp_prev[k] += drp[k] * t.r[k];
        da_r[k] = drp[k] * t.p_prev[k] * t.r[k] * (1.0 - t.r[k]);
    }

    for (ww, wv, wp, b, da) in [
        (&mut params.w_zw, &mut params.w_zv, &mut params.w_zp, &mut params.b_z, &da_z),
        (&mut params.w_rw, &mut params.w_rv, &mut params.w_rp, &mut params.b_r, &da_r),
    ] {
        ww.grad.outer_acc(da, &t.e, 1.0);
        wv.grad.outer_acc(da, &t.v, 1.0);
        wp.grad.outer_acc(da, &t.p_prev, 1.0);
        b.grad.add_scaled(da, 1.0);
        ww.value.matvec_t_acc(da, &mut de);
        wv.value.matvec_t_acc(da, &mut dv);
        wp.value.matvec_t_acc(da, &mut dp_prev);
    }
    (de, dv, dp_prev)
}
