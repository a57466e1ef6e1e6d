use rand::Rng;

use super::{Graph, Tensor};
use crate::error::{Error, Result};

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct Slot {
    name: String,
    value: Tensor,
    grad: Vec<f64>,
    has_grad: bool,
    m: Vec<f64>,
    v: Vec<f64>,
}

/// One named parameter as written to a checkpoint.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StoredParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Named trainable tensors with their gradients and Adam moments.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    slots: Vec<Slot>,
    step: u64,
}

/// Adam hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let n = value.len();
        self.slots.push(Slot {
            name: name.into(),
            value,
            grad: vec![0.0; n],
            has_grad: false,
            m: vec![0.0; n],
            v: vec![0.0; n],
        });
        ParamId(self.slots.len() - 1)
    }

    /// Glorot-uniform weights in `+-sqrt(6 / (fan_in + fan_out))`.
    pub fn add_glorot(&mut self, name: &str, shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> ParamId {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        self.add_uniform(name, shape, limit, rng)
    }

    pub fn add_uniform(&mut self, name: &str, shape: &[usize], limit: f64, rng: &mut impl Rng) -> ParamId {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-limit..=limit)).collect();
        self.add(name, Tensor { shape: shape.to_vec(), data })
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.slots.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.slots[id.0].name
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.slots.iter().position(|s| s.name == name).map(ParamId)
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.slots[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.slots[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.slots[id.0].grad
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn num_values(&self) -> usize {
        self.slots.iter().map(|s| s.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for s in &mut self.slots {
            s.grad.fill(0.0);
            s.has_grad = false;
        }
    }

    /// Adds the gradients of every parameter used in `graph`. Parameters that
    /// did not influence the loss receive an explicit zero gradient.
    pub fn accumulate(&mut self, graph: &Graph) {
        for (id, var) in graph.param_vars() {
            let slot = &mut self.slots[id.0];
            if let Some(g) = graph.grad(var) {
                slot.grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            slot.has_grad = true;
        }
    }

    /// Sets gradients directly, e.g. when averaging over independently built graphs.
    pub fn set_grad(&mut self, id: ParamId, grad: &[f64]) -> Result<()> {
        let slot = &mut self.slots[id.0];
        if grad.len() != slot.grad.len() {
            return Err(Error::shape("set_grad", format!("{} values for `{}`", grad.len(), slot.name)));
        }
        slot.grad.copy_from_slice(grad);
        slot.has_grad = true;
        Ok(())
    }

    pub fn scale_grads(&mut self, c: f64) {
        for s in &mut self.slots {
            s.grad.iter_mut().for_each(|g| *g *= c);
        }
    }

    /// One bias-corrected Adam update; clears gradients afterwards.
    pub fn adam_step(&mut self, opt: &Adam) -> Result<()> {
        if let Some(s) = self.slots.iter().find(|s| !s.has_grad) {
            return Err(Error::MissingGradient(s.name.clone()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - opt.beta1.powi(t);
        let c2 = 1.0 - opt.beta2.powi(t);
        for s in &mut self.slots {
            for (((p, g), m), v) in s.value.data_mut().iter_mut().zip(&s.grad).zip(&mut s.m).zip(&mut s.v) {
                *m = opt.beta1 * *m + (1.0 - opt.beta1) * g;
                *v = opt.beta2 * *v + (1.0 - opt.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= opt.lr * m_hat / (v_hat.sqrt() + opt.eps);
            }
        }
        self.zero_grad();
        Ok(())
    }

    pub fn to_stored(&self) -> Vec<StoredParam> {
        self.slots
            .iter()
            .map(|s| StoredParam { name: s.name.clone(), shape: s.value.shape().to_vec(), values: s.value.data().to_vec() })
            .collect()
    }

    /// Overwrites values from a checkpoint; names and shapes must match exactly.
    pub fn load_stored(&mut self, stored: &[StoredParam]) -> Result<()> {
        if stored.len() != self.slots.len() {
            return Err(Error::Config(format!("checkpoint has {} parameters, model expects {}", stored.len(), self.slots.len())));
        }
        for (slot, p) in self.slots.iter_mut().zip(stored) {
            if slot.name != p.name || slot.value.shape() != p.shape.as_slice() {
                return Err(Error::Config(format!(
                    "parameter mismatch: checkpoint `{}` {:?}, model `{}` {:?}",
                    p.name,
                    p.shape,
                    slot.name,
                    slot.value.shape()
                )));
            }
            slot.value = Tensor::new(p.shape.clone(), p.values.clone())?;
        }
        Ok(())
    }
}
