use std::collections::BTreeMap;

use super::mlp::{softmax, Forward, Mlp, ParamVector};
use crate::env::one_hot;
use crate::error::{Error, Result};

/// Forward passes over the distinct states of a batch of tabular samples.
///
/// On a one-hot featurisation every sample of the same state shares one
/// forward pass; upstream gradients are summed per state and backpropagated
/// once, which is exact because the backward pass is linear in dL/dlogits.
/// States are kept ordered so accumulation order is reproducible.
#[derive(Debug, Clone)]
pub struct StatePass {
    entries: BTreeMap<usize, Entry>,
}

#[derive(Debug, Clone)]
struct Entry {
    forward: Forward,
    probs: Vec<f64>,
    dlogits: Vec<f64>,
}

impl StatePass {
    pub fn run(net: &Mlp, params: &ParamVector, states: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let dim = net.spec().input_dim;
        for s in states {
            if entries.contains_key(&s) {
                continue;
            }
            if s >= dim {
                return Err(Error::invalid(format!("state {s} outside one-hot width {dim}")));
            }
            let forward = net.forward(params, &one_hot(s, dim))?;
            let probs = softmax(&forward.logits);
            let dlogits = vec![0.0; forward.logits.len()];
            entries.insert(
                s,
                Entry {
                    forward,
                    probs,
                    dlogits,
                },
            );
        }
        Ok(Self { entries })
    }

    fn entry(&self, state: usize) -> &Entry {
        self.entries.get(&state).expect("state was part of the pass")
    }

    pub fn probs(&self, state: usize) -> &[f64] {
        &self.entry(state).probs
    }

    pub fn logits(&self, state: usize) -> &[f64] {
        &self.entry(state).forward.logits
    }

    /// Adds `scale * dlogits` to the upstream gradient of `state`.
    pub fn accumulate(&mut self, state: usize, dlogits: &[f64], scale: f64) {
        let e = self.entries.get_mut(&state).expect("state was part of the pass");
        for (acc, d) in e.dlogits.iter_mut().zip(dlogits) {
            *acc += scale * d;
        }
    }

    pub fn backward(&self, net: &Mlp, params: &ParamVector) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; params.len()];
        for e in self.entries.values() {
            if e.dlogits.iter().all(|d| *d == 0.0) {
                continue;
            }
            net.backward_into(params, &e.forward.cache, &e.dlogits, &mut grad)?;
        }
        Ok(grad)
    }
}
