use rand::Rng;

use super::{Graph, ParamId, ParamStore, Var};
use crate::error::{Error, Result};

/// Weights of one GRU layer (row-vector convention: `x W + h U + b`).
#[derive(Debug, Clone, Copy)]
pub struct GruParams {
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_h: ParamId,
    pub u_h: ParamId,
    pub b_h: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl GruParams {
    pub fn init(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut gate = |g: &str| {
            let w = store.add_glorot(&format!("{prefix}.w_{g}"), &[input, hidden], input, hidden, rng);
            let u = store.add_glorot(&format!("{prefix}.u_{g}"), &[hidden, hidden], hidden, hidden, rng);
            let b = store.add_zeros(&format!("{prefix}.b_{g}"), &[hidden]);
            (w, u, b)
        };
        let (w_z, u_z, b_z) = gate("z");
        let (w_r, u_r, b_r) = gate("r");
        let (w_h, u_h, b_h) = gate("h");
        Self { w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h, input, hidden }
    }
}

fn affine(g: &mut Graph, store: &ParamStore, x: Var, w: ParamId, h: Var, u: ParamId, b: ParamId) -> Result<Var> {
    let (w, u, b) = (g.param(store, w), g.param(store, u), g.param(store, b));
    let xw = g.matmul(x, w)?;
    let hu = g.matmul(h, u)?;
    let s = g.add(xw, hu)?;
    g.add_bias(s, b)
}

/// One step: `z = s(xW_z + hU_z)`, `r = s(xW_r + hU_r)`,
/// `h~ = tanh(xW_h + (r*h)U_h)`, `h' = (1 - z)*h + z*h~`.
pub fn gru_cell(g: &mut Graph, store: &ParamStore, p: &GruParams, x: Var, h: Var) -> Result<Var> {
    if g.shape(x) != [1, p.input] || g.shape(h) != [1, p.hidden] {
        return Err(Error::shape(
            "gru_cell",
            format!("x {:?}, h {:?} for input {} hidden {}", g.shape(x), g.shape(h), p.input, p.hidden),
        ));
    }
    let z = affine(g, store, x, p.w_z, h, p.u_z, p.b_z)?;
    let z = g.sigmoid(z)?;
    let r = affine(g, store, x, p.w_r, h, p.u_r, p.b_r)?;
    let r = g.sigmoid(r)?;
    let rh = g.hadamard(r, h)?;
    let cand = affine(g, store, x, p.w_h, rh, p.u_h, p.b_h)?;
    let cand = g.tanh(cand)?;
    // h + z * (h~ - h)
    let diff = g.sub(cand, h)?;
    let step = g.hadamard(z, diff)?;
    g.add(h, step)
}

/// Runs the cell over the rows of `xs` (`[T, input]`) from a zero state and
/// returns the final hidden state.
pub fn gru_sequence(g: &mut Graph, store: &ParamStore, p: &GruParams, xs: Var) -> Result<Var> {
    let (t, d) = g.value(xs).dims2("gru_sequence")?;
    if t == 0 || d != p.input {
        return Err(Error::shape("gru_sequence", format!("sequence {:?} for input {}", g.shape(xs), p.input)));
    }
    let mut h = g.constant(super::Tensor::zeros(&[1, p.hidden]));
    for step in 0..t {
        let x = if t == 1 { xs } else { select_row(g, xs, step)? };
        h = gru_cell(g, store, p, x, h)?;
    }
    Ok(h)
}

/// Row `i` of a `[T, d]` matrix as `[1, d]`, differentiable through a one-hot matmul.
fn select_row(g: &mut Graph, xs: Var, i: usize) -> Result<Var> {
    let t = g.shape(xs)[0];
    let mut onehot = vec![0.0; t];
    onehot[i] = 1.0;
    let sel = g.constant(super::Tensor::row(onehot));
    g.matmul(sel, xs)
}
