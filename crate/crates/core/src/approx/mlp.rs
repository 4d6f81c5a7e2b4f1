use rand::Rng;
use serde::{Deserialize, Serialize};

use super::twohot::{Bins, ValueDistribution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub num_hidden_layers: usize,
    pub activation: Activation,
}

impl MlpSpec {
    /// `(fan_in, fan_out)` of every affine layer, output layer last.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.num_hidden_layers + 1);
        let mut prev = self.input_dim;
        for _ in 0..self.num_hidden_layers {
            dims.push((prev, self.hidden_dim));
            prev = self.hidden_dim;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSlice {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Named index ranges into a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub slices: Vec<ParamSlice>,
}

impl ParamLayout {
    pub fn total(&self) -> usize {
        self.slices.last().map_or(0, |s| s.offset + s.len)
    }

    pub fn get(&self, name: &str) -> Option<&ParamSlice> {
        self.slices.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: ParamLayout,
}

impl ParamVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn slice(&self, name: &str) -> Option<&[f64]> {
        self.layout.get(name).map(|s| &self.values[s.offset..s.offset + s.len])
    }
}

/// Activations retained by a forward pass: the network input followed by the
/// output of every hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
    param_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub logits: Vec<f64>,
    pub cache: ForwardCache,
}

/// Fully connected network with a linear output layer.
///
/// Weights of a layer are stored input-major (`w[i * fan_out + j]`) so a
/// sparse (one-hot) input skips whole rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    layout: ParamLayout,
    dims: Vec<(usize, usize)>,
}

impl Mlp {
    pub fn new(spec: MlpSpec) -> Result<Self> {
        if spec.input_dim == 0 || spec.output_dim == 0 || spec.num_hidden_layers == 0 || spec.hidden_dim == 0 {
            return Err(Error::invalid(format!("degenerate network dims {spec:?}")));
        }
        let dims = spec.layer_dims();
        let mut slices = Vec::new();
        let mut offset = 0;
        for (k, &(fan_in, fan_out)) in dims.iter().enumerate() {
            slices.push(ParamSlice {
                name: format!("layer{k}.weight"),
                offset,
                len: fan_in * fan_out,
            });
            offset += fan_in * fan_out;
            slices.push(ParamSlice {
                name: format!("layer{k}.bias"),
                offset,
                len: fan_out,
            });
            offset += fan_out;
        }
        let layout = ParamLayout { slices };
        debug_assert_eq!(layout.total(), spec.param_count());
        Ok(Self { spec, layout, dims })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn zeros(&self) -> ParamVector {
        ParamVector {
            values: vec![0.0; self.layout.total()],
            layout: self.layout.clone(),
        }
    }

    /// Uniform(±1/√fan_in) for hidden layers; the output layer starts at zero
    /// so the initial policy and value distribution are uniform.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let mut params = self.zeros();
        let last = self.dims.len() - 1;
        for (k, &(fan_in, _)) in self.dims.iter().enumerate().take(last) {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for name in [format!("layer{k}.weight"), format!("layer{k}.bias")] {
                let s = self.layout.get(&name).expect("layout has every layer").clone();
                for v in &mut params.values[s.offset..s.offset + s.len] {
                    *v = rng.random_range(-bound..bound);
                }
            }
        }
        params
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.values.len() != self.layout.total() {
            return Err(Error::Shape {
                context: "parameter vector",
                expected: self.layout.total(),
                actual: params.values.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, params: &ParamVector, input: &[f64]) -> Result<Forward> {
        self.check_params(params)?;
        if input.len() != self.spec.input_dim {
            return Err(Error::Shape {
                context: "network input",
                expected: self.spec.input_dim,
                actual: input.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.dims.len());
        activations.push(input.to_vec());
        let mut offset = 0;
        let last = self.dims.len() - 1;
        let mut logits = Vec::new();
        for (k, &(fan_in, fan_out)) in self.dims.iter().enumerate() {
            let w = &params.values[offset..offset + fan_in * fan_out];
            let b = &params.values[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let x = activations.last().expect("input pushed");
            let mut z = b.to_vec();
            for (i, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                for (zj, wij) in z.iter_mut().zip(&w[i * fan_out..(i + 1) * fan_out]) {
                    *zj += xi * wij;
                }
            }
            if k == last {
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("output layer (layer{k}) logits")));
                }
                logits = z;
            } else {
                let a: Vec<f64> = z.into_iter().map(|v| self.spec.activation.apply(v)).collect();
                if a.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("hidden layer{k} activations")));
                }
                activations.push(a);
            }
        }
        Ok(Forward {
            logits,
            cache: ForwardCache {
                activations,
                param_count: self.layout.total(),
            },
        })
    }

    /// Reverse-mode gradient of the parameters given dL/dlogits.
    pub fn backward(&self, params: &ParamVector, cache: &ForwardCache, dlogits: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.layout.total()];
        self.backward_into(params, cache, dlogits, &mut grad)?;
        Ok(grad)
    }

    /// Like [`Mlp::backward`] but accumulates into `grad`.
    pub fn backward_into(
        &self,
        params: &ParamVector,
        cache: &ForwardCache,
        dlogits: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        self.check_params(params)?;
        if cache.param_count != self.layout.total() || cache.activations.len() != self.dims.len() {
            return Err(Error::Shape {
                context: "forward cache",
                expected: self.dims.len(),
                actual: cache.activations.len(),
            });
        }
        if dlogits.len() != self.spec.output_dim {
            return Err(Error::Shape {
                context: "upstream gradient",
                expected: self.spec.output_dim,
                actual: dlogits.len(),
            });
        }
        if grad.len() != self.layout.total() {
            return Err(Error::Shape {
                context: "gradient buffer",
                expected: self.layout.total(),
                actual: grad.len(),
            });
        }
        let offsets: Vec<usize> = self
            .dims
            .iter()
            .scan(0, |acc, &(i, o)| {
                let start = *acc;
                *acc += i * o + o;
                Some(start)
            })
            .collect();
        let mut delta = dlogits.to_vec();
        for k in (0..self.dims.len()).rev() {
            let (fan_in, fan_out) = self.dims[k];
            let off = offsets[k];
            let x = &cache.activations[k];
            {
                let (gw, gb) = grad[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                for (g, d) in gb.iter_mut().zip(&delta) {
                    *g += d;
                }
                for (i, &xi) in x.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    for (g, d) in gw[i * fan_out..(i + 1) * fan_out].iter_mut().zip(&delta) {
                        *g += xi * d;
                    }
                }
            }
            if k == 0 {
                break;
            }
            let w = &params.values[off..off + fan_in * fan_out];
            let mut prev = vec![0.0; fan_in];
            for (i, p) in prev.iter_mut().enumerate() {
                let row = &w[i * fan_out..(i + 1) * fan_out];
                let s: f64 = row.iter().zip(&delta).map(|(wij, d)| wij * d).sum();
                *p = s * self.spec.activation.derivative_from_output(x[i]);
            }
            delta = prev;
        }
        Ok(())
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

#[derive(Debug, Clone)]
pub struct PolicyOutput {
    pub probs: Vec<f64>,
    pub logits: Vec<f64>,
    pub cache: ForwardCache,
}

pub fn policy_forward(net: &Mlp, params: &ParamVector, obs: &[f64]) -> Result<PolicyOutput> {
    let Forward { logits, cache } = net.forward(params, obs)?;
    Ok(PolicyOutput {
        probs: softmax(&logits),
        logits,
        cache,
    })
}

#[derive(Debug, Clone)]
pub struct CriticOutput {
    pub dist: ValueDistribution,
    pub logits: Vec<f64>,
    pub cache: ForwardCache,
}

pub fn critic_forward(net: &Mlp, params: &ParamVector, obs: &[f64], bins: &Bins) -> Result<CriticOutput> {
    if net.spec().output_dim != bins.len() {
        return Err(Error::Shape {
            context: "critic output vs bins",
            expected: bins.len(),
            actual: net.spec().output_dim,
        });
    }
    let Forward { logits, cache } = net.forward(params, obs)?;
    let weights = softmax(&logits);
    Ok(CriticOutput {
        dist: ValueDistribution {
            bins: bins.clone(),
            weights,
        },
        logits,
        cache,
    })
}
