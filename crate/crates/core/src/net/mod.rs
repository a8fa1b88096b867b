//! Small fully-convolutional per-pixel classifier with hand-derived
//! gradients, plus the loss, optimizer step and learning-rate schedule used
//! to train it.

mod arch;
mod checkpoint;
mod conv;
mod layers;
mod loss;
mod optim;

pub use arch::{Architecture, LayerSpec};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use layers::{backward, backward_frozen, forward, forward_logits, predict_hard, ForwardCache, Logits};
pub use loss::{softmax, softmax_ce, softmax_ce_soft};
pub use optim::{poly_lr, sgd_step};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Teacher,
    Student,
}

/// Flat parameter vector with the architecture it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub arch: Architecture,
    pub values: Vec<f64>,
    pub role: Role,
}

impl NetParams {
    pub fn zeros(arch: Architecture, role: Role) -> Self {
        let n = arch.param_count();
        Self {
            arch,
            values: vec![0.0; n],
            role,
        }
    }

    /// He (fan-in) normal weights, zero biases.
    pub fn init(arch: Architecture, role: Role, rng: &mut RngState) -> Self {
        let mut p = Self::zeros(arch, role);
        for (spec, range) in p.arch.layers.iter().zip(p.arch.weight_ranges()) {
            let std = (2.0 / spec.fan_in() as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            for v in &mut p.values[range] {
                *v = normal.sample(rng);
            }
        }
        p
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.arch.param_count() {
            return Err(Error::invalid(format!(
                "parameter vector has {} entries, architecture needs {}",
                self.values.len(),
                self.arch.param_count()
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("parameter {i} is not finite")));
        }
        Ok(())
    }
}

/// Gradient vector aligned with a [`NetParams`] vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub values: Vec<f64>,
}

impl Gradients {
    pub fn zeros(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        assert_eq!(self.len(), other.len(), "gradient length mismatch");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    pub fn dot(&self, other: &Gradients) -> f64 {
        assert_eq!(self.len(), other.len(), "gradient length mismatch");
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn cosine(&self, other: &Gradients) -> f64 {
        let d = self.norm() * other.norm();
        if d == 0.0 {
            0.0
        } else {
            self.dot(other) / d
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
