#![allow(dead_code)]

pub mod geom_oracle;
pub mod qa_oracle;

use panoqa_core::tensor::{Graph, Tensor, Var};
use panoqa_core::Result;

/// Step used by every central-difference check.
pub const FD_EPS: f64 = 1e-4;
/// Fallback step for components whose `FD_EPS` stencil straddles a ReLU kink.
pub const FD_KINK_EPS: f64 = 1e-6;
/// Relative tolerance for gradient agreement.
pub const FD_REL_TOL: f64 = 1e-4;
/// Below this absolute disagreement a component passes regardless of its
/// relative error (central differences carry ~1e-12/eps rounding noise).
pub const FD_ABS_FLOOR: f64 = 1e-8;

pub fn central_difference(f: &mut dyn FnMut(&[Tensor]) -> f64, inputs: &[Tensor], which: usize, index: usize) -> f64 {
    let mut plus = inputs.to_vec();
    plus[which].data_mut()[index] += FD_EPS;
    let mut minus = inputs.to_vec();
    minus[which].data_mut()[index] -= FD_EPS;
    (f(&plus) - f(&minus)) / (2.0 * FD_EPS)
}

pub fn grads_agree(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff < FD_ABS_FLOOR || diff <= FD_REL_TOL * analytic.abs().max(numeric.abs())
}

/// Checks every input component of a scalar-valued graph function against
/// central differences; returns the worst relative error seen.
pub fn check_gradients(build: impl Fn(&mut Graph, &[Var]) -> Result<Var>, inputs: Vec<Tensor>) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.variable(t.clone())).collect();
    let loss = build(&mut g, &vars).unwrap();
    g.backward(loss).unwrap();
    let analytic: Vec<Vec<f64>> =
        vars.iter().map(|&v| g.grad(v).map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; g.value(v).len()])).collect();
    let mut eval = |ts: &[Tensor]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = ts.iter().map(|t| g.constant(t.clone())).collect();
        let out = build(&mut g, &vars).unwrap();
        g.value(out).data()[0]
    };
    let mut worst: f64 = 0.0;
    for (w, t) in inputs.iter().enumerate() {
        for i in 0..t.len() {
            let num = central_difference(&mut eval, &inputs, w, i);
            let ana = analytic[w][i];
            assert!(grads_agree(ana, num), "input {w}[{i}]: analytic {ana}, numeric {num}");
            let denom = ana.abs().max(num.abs());
            if denom > 0.0 {
                worst = worst.max((ana - num).abs() / denom);
            }
        }
    }
    worst
}

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    // Small deterministic LCG; keeps test fixtures independent of the rand crate.
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Reduces any tensor to a scalar with fixed random weights so every output
/// component contributes a distinct gradient.
pub fn weighted_sum(g: &mut Graph, x: Var, seed: u64) -> Result<Var> {
    let w = g.constant(random_tensor(g.shape(x), seed));
    let p = g.hadamard(x, w)?;
    g.sum_all(p)
}

/// Result of checking one named parameter tensor against central differences.
#[derive(Debug)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub worst_rel: f64,
    /// Components re-checked with `FD_KINK_EPS` because the one-sided
    /// differences at `FD_EPS` disagreed (a ReLU kink inside the stencil).
    pub kinks: usize,
    pub failures: Vec<String>,
}

/// Compares the backpropagated gradient of every parameter in `model` with
/// central differences of `loss`. Tensors with more than `max_entries`
/// values are checked on an evenly spaced subset.
pub fn check_model_gradients(
    model: &mut panoqa_core::model::Model,
    loss: &dyn Fn(&panoqa_core::model::Model, &mut Graph) -> Result<Var>,
    max_entries: usize,
) -> Vec<ParamCheck> {
    let mut g = Graph::new();
    let l = loss(model, &mut g).unwrap();
    g.backward(l).unwrap();
    let analytic: std::collections::HashMap<_, Vec<f64>> = g
        .param_vars()
        .map(|(id, v)| (id, g.grad(v).map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; g.value(v).len()])))
        .collect();
    let ids: Vec<_> = model.store().ids().collect();
    let mut report = Vec::new();
    for id in ids {
        let name = model.store().name(id).to_string();
        let len = model.store().value(id).len();
        let step = len.div_ceil(max_entries).max(1);
        let mut check = ParamCheck { name: name.clone(), checked: 0, worst_rel: 0.0, kinks: 0, failures: Vec::new() };
        for i in (0..len).step_by(step) {
            let base = model.store().value(id).data()[i];
            let mut eval = |delta: f64| {
                model.store_mut().value_mut(id).data_mut()[i] = base + delta;
                let mut g = Graph::unchecked();
                let out = loss(model, &mut g).unwrap();
                g.value(out).data()[0]
            };
            let (fp, f0, fm) = (eval(FD_EPS), eval(0.0), eval(-FD_EPS));
            let mut num = (fp - fm) / (2.0 * FD_EPS);
            let ana = analytic.get(&id).map_or(0.0, |g| g[i]);
            let (right, left) = ((fp - f0) / FD_EPS, (f0 - fm) / FD_EPS);
            if !grads_agree(ana, num) && !grads_agree(right, left) {
                num = (eval(FD_KINK_EPS) - eval(-FD_KINK_EPS)) / (2.0 * FD_KINK_EPS);
                check.kinks += 1;
            }
            model.store_mut().value_mut(id).data_mut()[i] = base;
            let denom = ana.abs().max(num.abs());
            if denom > 0.0 && (ana - num).abs() >= FD_ABS_FLOOR {
                check.worst_rel = check.worst_rel.max((ana - num).abs() / denom);
            }
            if !grads_agree(ana, num) {
                check.failures.push(format!("{name}[{i}]: analytic {ana}, numeric {num}"));
            }
            check.checked += 1;
        }
        report.push(check);
    }
    report
}

/// Random images in `[0, 1]` shaped for `model`'s input variant.
pub fn random_input(model: &panoqa_core::model::Model, seed: u64) -> panoqa_core::model::ModelInput {
    use panoqa_core::model::InputVariant;
    let cfg = model.config();
    let n = cfg.dims.input_size();
    let shape = if cfg.input_variant == InputVariant::EqAvgpool { [3, n, 2 * n] } else { [3, n, n] };
    panoqa_core::model::ModelInput {
        variant: cfg.input_variant,
        images: (0..cfg.input_variant.num_images())
            .map(|j| {
                let t = random_tensor(&shape, seed * 31 + j as u64);
                Tensor::new(shape.to_vec(), t.data().iter().map(|v| 0.5 + 0.5 * v).collect()).unwrap()
            })
            .collect(),
    }
}
