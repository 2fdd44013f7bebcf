//! Bilinear context→aspect and aspect→context attention.

use alloc::string::String;
use alloc::vec::Vec;

use crate::autodiff::{Graph, Var};
use crate::error::Result;

/// Mean of the columns of the context states: the query for
/// context→aspect attention.
pub fn avg_pool_context(g: &mut Graph<'_>, context: Var) -> Result<Var> {
    g.mean_cols(context)
}

/// Result of attending over one aspect's hidden states.
#[derive(Clone, Copy, Debug)]
pub struct AspectSummary {
    /// `2·d_hid × 1` aspect representation.
    pub m: Var,
    /// `1 × M` attention weights over the aspect tokens.
    pub beta: Var,
}

/// Scores every aspect token with `q̄ᵀ · W_ca · h_t`, normalizes with a
/// softmax over the aspect tokens and returns the weighted sum of the aspect
/// states.
pub fn context_to_aspect(g: &mut Graph<'_>, query: Var, aspect: Var, w_ca: Var) -> Result<AspectSummary> {
    let qt = g.transpose(query);
    let qw = g.matmul(qt, w_ca)?;
    let scores = g.matmul(qw, aspect)?;
    let beta = g.softmax(scores)?;
    let bt = g.transpose(beta);
    let m = g.matmul(aspect, bt)?;
    Ok(AspectSummary { m, beta })
}

/// Aspect-specific context vector for one aspect.
#[derive(Clone, Copy, Debug)]
pub struct AspectContext {
    /// `2·d_hid × 1`.
    pub x: Var,
    /// `1 × N` attention weights over the context tokens.
    pub gamma: Var,
}

/// Scores every context position with `mᵀ · W_ac · p_t` over the
/// position-weighted states, normalizes over the sentence and sums the
/// context states under those weights.
///
/// The sum runs over the raw context states `context`; with
/// `sum_weighted` it runs over the position-weighted `positioned` instead.
pub fn aspect_to_context(
    g: &mut Graph<'_>,
    m: Var,
    positioned: Var,
    context: Var,
    w_ac: Var,
    sum_weighted: bool,
) -> Result<AspectContext> {
    let mt = g.transpose(m);
    let mw = g.matmul(mt, w_ac)?;
    let scores = g.matmul(mw, positioned)?;
    let gamma = g.softmax(scores)?;
    let gt = g.transpose(gamma);
    let values = if sum_weighted { positioned } else { context };
    let x = g.matmul(values, gt)?;
    Ok(AspectContext { x, gamma })
}

/// Attention weights of one aspect, ready for export.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionRecord {
    pub sentence_id: String,
    pub aspect_index: usize,
    /// Aspect→context weights, one per sentence token.
    pub tokens: Vec<String>,
    pub weights: Vec<f64>,
    /// Context→aspect weights, one per aspect token.
    pub aspect_tokens: Vec<String>,
    pub aspect_weights: Vec<f64>,
}
