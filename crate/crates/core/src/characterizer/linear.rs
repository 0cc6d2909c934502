//! Logistic regression over hashed unigram and bigram counts.

use std::hash::Hasher;

use fnv::{FnvHashMap, FnvHasher};
use serde::{Deserialize, Serialize};

use super::{sigmoid, CredibilityModel};
use crate::error::{Error, Result};

pub const DEFAULT_HASH_BITS: u32 = 18;

/// Sorted `(slot, count)` pairs.
pub type HashedFeatures = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidArgument("linear model needs at least one slot".into()));
        }
        Ok(LinearModel {
            weights: vec![0.0; dims],
            bias: 0.0,
        })
    }

    pub fn with_hash_bits(bits: u32) -> Result<Self> {
        Self::zeros(1usize << bits)
    }

    pub fn dims(&self) -> usize {
        self.weights.len()
    }

    fn slot(&self, gram: &[&str]) -> usize {
        let mut h = FnvHasher::default();
        for (i, token) in gram.iter().enumerate() {
            if i > 0 {
                h.write_u8(0x1f);
            }
            h.write(token.as_bytes());
        }
        (h.finish() % self.dims() as u64) as usize
    }

    pub fn featurize(&self, tokens: &[String]) -> HashedFeatures {
        let mut counts: FnvHashMap<usize, f64> = FnvHashMap::default();
        for token in tokens {
            *counts.entry(self.slot(&[token])).or_insert(0.0) += 1.0;
        }
        for pair in tokens.windows(2) {
            *counts.entry(self.slot(&[&pair[0], &pair[1]])).or_insert(0.0) += 1.0;
        }
        let mut features: HashedFeatures = counts.into_iter().collect();
        features.sort_unstable_by_key(|(slot, _)| *slot);
        features
    }

    pub fn logit(&self, features: &HashedFeatures) -> f64 {
        self.bias
            + features
                .iter()
                .map(|&(slot, v)| self.weights[slot] * v)
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearGradient {
    pub weights: FnvHashMap<usize, f64>,
    pub bias: f64,
}

impl CredibilityModel for LinearModel {
    type Input = HashedFeatures;
    type Gradient = LinearGradient;

    fn encode(&self, tokens: &[String]) -> Option<HashedFeatures> {
        if tokens.is_empty() {
            None
        } else {
            Some(self.featurize(tokens))
        }
    }

    fn raw_credibility(&self, input: &HashedFeatures) -> f64 {
        sigmoid(self.logit(input))
    }

    fn zero_gradient(&self) -> LinearGradient {
        LinearGradient::default()
    }

    fn accumulate_gradient(&self, input: &HashedFeatures, target: f64, scale: f64, grad: &mut LinearGradient) -> f64 {
        let p = self.raw_credibility(input);
        let g = (p - target) * scale;
        grad.bias += g;
        for &(slot, v) in input {
            *grad.weights.entry(slot).or_insert(0.0) += g * v;
        }
        super::bce_loss(p, target)
    }

    fn merge_gradient(into: &mut LinearGradient, from: LinearGradient) {
        into.bias += from.bias;
        for (slot, g) in from.weights {
            *into.weights.entry(slot).or_insert(0.0) += g;
        }
    }

    fn apply_gradient(&mut self, grad: &LinearGradient, step: f64) {
        self.bias -= step * grad.bias;
        for (&slot, g) in &grad.weights {
            self.weights[slot] -= step * g;
        }
    }

    fn parameters(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p
    }

    fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.dims() + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.dims() + 1,
                params.len()
            )));
        }
        let dims = self.dims();
        self.weights.copy_from_slice(&params[..dims]);
        self.bias = params[dims];
        Ok(())
    }

    fn flatten_gradient(&self, grad: &LinearGradient) -> Vec<f64> {
        let mut flat = vec![0.0; self.dims() + 1];
        for (&slot, g) in &grad.weights {
            flat[slot] = *g;
        }
        flat[self.dims()] = grad.bias;
        flat
    }
}
