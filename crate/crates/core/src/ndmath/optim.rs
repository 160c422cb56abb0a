use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Param {
    name: String,
    value: Tensor,
    m: Tensor,
    v: Tensor,
}

/// Named parameter tensors together with their Adam moments.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamSet {
    params: Vec<Param>,
    step: u64,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet {
            params: Vec::new(),
            step: 0,
        }
    }

    pub fn push(&mut self, name: impl Into<String>, value: Tensor) -> usize {
        let zeros = Tensor::new(value.shape().to_vec(), vec![0.0; value.len()]).expect("same shape");
        self.params.push(Param {
            name: name.into(),
            m: zeros.clone(),
            v: zeros,
            value,
        });
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn name(&self, i: usize) -> &str {
        &self.params[i].name
    }

    pub fn value(&self, i: usize) -> &Tensor {
        &self.params[i].value
    }

    pub fn value_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.params[i].value
    }

    pub fn values(&self) -> impl Iterator<Item = &Tensor> {
        self.params.iter().map(|p| &p.value)
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Registers every parameter as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.param(p.value.clone())).collect()
    }

    /// Registers every parameter as a constant (no gradient flows to it).
    pub fn bind_frozen(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.constant(p.value.clone())).collect()
    }

    /// One bias-corrected Adam update.
    pub fn adam_step(&mut self, grads: &[Tensor], lr: f64) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(Error::dim(format!(
                "{} gradients for {} parameters",
                grads.len(),
                self.params.len()
            )));
        }
        for (p, g) in self.params.iter().zip(grads) {
            if !p.value.same_shape(g) {
                return Err(Error::dim(format!(
                    "gradient {:?} for parameter '{}' {:?}",
                    g.shape(),
                    p.name,
                    p.value.shape()
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);
        for (p, g) in self.params.iter_mut().zip(grads) {
            let gv = g.values();
            let m = p.m.values_mut();
            for (m, g) in m.iter_mut().zip(gv) {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            }
            let v = p.v.values_mut();
            for (v, g) in v.iter_mut().zip(gv) {
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            }
            let (m, v) = (p.m.values(), p.v.values());
            for (i, x) in p.value.values_mut().iter_mut().enumerate() {
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *x -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
        Ok(())
    }

    /// `self <- (1 - rate) * self + rate * source`, parameter by parameter.
    pub fn soft_update_from(&mut self, source: &ParamSet, rate: f64) -> Result<()> {
        if source.len() != self.len() {
            return Err(Error::dim("soft update between different parameter sets"));
        }
        for (dst, src) in self.params.iter_mut().zip(&source.params) {
            if !dst.value.same_shape(&src.value) {
                return Err(Error::dim(format!("soft update of '{}'", dst.name)));
            }
            for (d, s) in dst.value.values_mut().iter_mut().zip(src.value.values()) {
                *d = (1.0 - rate) * *d + rate * s;
            }
        }
        Ok(())
    }

    /// Copies values only; optimizer state is left alone.
    pub fn copy_values_from(&mut self, source: &ParamSet) -> Result<()> {
        self.soft_update_from(source, 1.0)
    }

    #[cfg(test)]
    pub(crate) fn moments_consistent(&self) -> bool {
        self.params
            .iter()
            .all(|p| p.m.same_shape(&p.value) && p.v.same_shape(&p.value))
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}
