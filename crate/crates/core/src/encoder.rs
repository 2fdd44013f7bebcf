//! Bidirectional LSTM encoders and distance-based position weights.

use alloc::format;
use alloc::vec::Vec;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::params::{init_uniform, ParamId, ParamStore};
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Weights of one LSTM direction. Every gate matrix is
/// `d_hid × (d_in + d_hid)` and acts on `[x_t; h_{t-1}]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmDirection {
    pub w_input: ParamId,
    pub w_forget: ParamId,
    pub w_output: ParamId,
    pub w_cell: ParamId,
    pub b_input: ParamId,
    pub b_forget: ParamId,
    pub b_output: ParamId,
    pub b_cell: ParamId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmParams {
    pub forward: LstmDirection,
    pub backward: LstmDirection,
    pub d_in: usize,
    pub d_hid: usize,
}

impl LstmParams {
    /// Registers `<prefix>.{fwd,bwd}.{w,b}_{i,f,o,c}`. Weights are drawn from
    /// `U(-scale, scale)`; the forget bias starts at 1 and the other biases
    /// at 0.
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        d_hid: usize,
        scale: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let mut dir = |name: &str| -> Result<LstmDirection> {
            let mut w = |gate: &str| {
                let t = init_uniform(d_hid, d_in + d_hid, -scale, scale, rng)?;
                store.insert(&format!("{prefix}.{name}.w_{gate}"), t, true)
            };
            let (w_input, w_forget, w_output, w_cell) = (w("i")?, w("f")?, w("o")?, w("c")?);
            let mut b = |gate: &str, v: f64| {
                store.insert(&format!("{prefix}.{name}.b_{gate}"), Tensor::filled(d_hid, 1, v), true)
            };
            Ok(LstmDirection {
                w_input,
                w_forget,
                w_output,
                w_cell,
                b_input: b("i", 0.0)?,
                b_forget: b("f", 1.0)?,
                b_output: b("o", 0.0)?,
                b_cell: b("c", 0.0)?,
            })
        };
        let forward = dir("fwd")?;
        let backward = dir("bwd")?;
        Ok(Self {
            forward,
            backward,
            d_in,
            d_hid,
        })
    }

    /// The same parameters with the two directions exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            forward: self.backward,
            backward: self.forward,
            ..*self
        }
    }
}

struct DirVars {
    w: [Var; 4],
    b: [Var; 4],
}

fn bind(g: &mut Graph<'_>, d: &LstmDirection) -> DirVars {
    DirVars {
        w: [
            g.param(d.w_input),
            g.param(d.w_forget),
            g.param(d.w_output),
            g.param(d.w_cell),
        ],
        b: [
            g.param(d.b_input),
            g.param(d.b_forget),
            g.param(d.b_output),
            g.param(d.b_cell),
        ],
    }
}

/// Runs one direction over the columns of `x`; returns the hidden state for
/// every position, indexed by original position.
fn run_direction(g: &mut Graph<'_>, x: Var, dir: &LstmDirection, d_hid: usize, reverse: bool) -> Result<Vec<Var>> {
    let t_len = g.shape(x).1;
    let p = bind(g, dir);
    let mut h = g.constant(Tensor::zeros(d_hid, 1));
    let mut c = g.constant(Tensor::zeros(d_hid, 1));
    let mut out = alloc::vec![h; t_len];
    for step in 0..t_len {
        let t = if reverse { t_len - 1 - step } else { step };
        let xt = g.slice_cols(x, t, 1)?;
        let z = g.concat_rows(xt, h)?;
        let mut pre = [h; 4];
        for k in 0..4 {
            let m = g.matmul(p.w[k], z)?;
            pre[k] = g.add(m, p.b[k])?;
        }
        let i = g.sigmoid(pre[0]);
        let f = g.sigmoid(pre[1]);
        let o = g.sigmoid(pre[2]);
        let cand = g.tanh(pre[3]);
        let keep = g.mul(f, c)?;
        let write = g.mul(i, cand)?;
        c = g.add(keep, write)?;
        let tc = g.tanh(c);
        h = g.mul(o, tc)?;
        out[t] = h;
    }
    Ok(out)
}

/// Encodes a `d_in × T` sequence into `2·d_hid × T`. Column `t` is the
/// forward state for token `t` stacked on top of the backward state.
pub fn bilstm_encode(g: &mut Graph<'_>, x: Var, params: &LstmParams) -> Result<Var> {
    let (d_in, t_len) = g.shape(x);
    if d_in != params.d_in {
        return Err(Error::Shape {
            op: "bilstm_encode",
            lhs: (d_in, t_len),
            rhs: (params.d_in, params.d_hid),
        });
    }
    if t_len == 0 {
        return Err(Error::Degenerate {
            op: "bilstm_encode",
            reason: "empty sequence".into(),
        });
    }
    let fwd = run_direction(g, x, &params.forward, params.d_hid, false)?;
    let bwd = run_direction(g, x, &params.backward, params.d_hid, true)?;
    let mut cols = Vec::with_capacity(t_len);
    for t in 0..t_len {
        cols.push(g.concat_rows(fwd[t], bwd[t])?);
    }
    g.concat_cols(&cols)
}

/// Token distance from position `t` to the span `start..end`; zero inside.
pub fn span_distance(t: usize, start: usize, end: usize) -> usize {
    if t < start {
        start - t
    } else if t >= end {
        t + 1 - end
    } else {
        0
    }
}

/// Position weight of every token of an `n`-token sentence relative to the
/// aspect at `start..end`: 1 on the aspect, `1 - dis/n` up to distance `s`,
/// 0 beyond.
pub fn position_weights(n: usize, start: usize, end: usize, s: usize) -> Vec<f64> {
    (0..n)
        .map(|t| match span_distance(t, start, end) {
            0 => 1.0,
            dis if dis <= s => 1.0 - dis as f64 / n as f64,
            _ => 0.0,
        })
        .collect()
}

/// Scales column `t` of the context states by `weights[t]`.
pub fn apply_position(g: &mut Graph<'_>, context: Var, weights: &[f64]) -> Result<Var> {
    g.scale_cols(context, weights)
}
