use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HiddenActivation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Identity,
    Softmax,
}

/// Architecture of a feed-forward network: layer widths plus activations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        hidden_activation: HiddenActivation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        let spec = Self {
            layer_sizes,
            hidden_activation,
            output_activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::config(format!(
                "MlpSpec needs at least 2 layer sizes, got {:?}",
                self.layer_sizes
            )));
        }
        if let Some(&bad) = self.layer_sizes.iter().find(|&&s| s == 0) {
            return Err(Error::config(format!(
                "MlpSpec layer sizes must be >= 1, got {bad}"
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated spec")
    }

    /// Number of affine layers.
    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn weight_name(layer: usize) -> String {
        format!("w{layer}")
    }

    pub fn bias_name(layer: usize) -> String {
        format!("b{layer}")
    }
}

/// Named parameter tensors of one network.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamSet {
    params: BTreeMap<String, Tensor>,
}

impl ParamSet {
    /// Xavier-uniform weights, zero biases; deterministic given the rng state.
    pub fn init<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut params = BTreeMap::new();
        for layer in 0..spec.n_layers() {
            let fan_in = spec.layer_sizes[layer];
            let fan_out = spec.layer_sizes[layer + 1];
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            params.insert(
                MlpSpec::weight_name(layer),
                Tensor::new(vec![fan_out, fan_in], weights)?,
            );
            params.insert(MlpSpec::bias_name(layer), Tensor::zeros(vec![fan_out]));
        }
        Ok(Self { params })
    }

    pub fn zeros(spec: &MlpSpec) -> Result<Self> {
        spec.validate()?;
        let mut params = BTreeMap::new();
        for layer in 0..spec.n_layers() {
            let fan_in = spec.layer_sizes[layer];
            let fan_out = spec.layer_sizes[layer + 1];
            params.insert(
                MlpSpec::weight_name(layer),
                Tensor::zeros(vec![fan_out, fan_in]),
            );
            params.insert(MlpSpec::bias_name(layer), Tensor::zeros(vec![fan_out]));
        }
        Ok(Self { params })
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .ok_or_else(|| Error::config(format!("missing parameter `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.params
            .get_mut(name)
            .ok_or_else(|| Error::config(format!("missing parameter `{name}`")))
    }

    pub fn insert(&mut self, name: String, tensor: Tensor) {
        self.params.insert(name, tensor);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.params.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    /// Checks the parameter names and shapes expected by `spec`.
    pub fn validate_for(&self, spec: &MlpSpec) -> Result<()> {
        spec.validate()?;
        let mut expected = 0usize;
        for layer in 0..spec.n_layers() {
            let fan_in = spec.layer_sizes[layer];
            let fan_out = spec.layer_sizes[layer + 1];
            let w = self.get(&MlpSpec::weight_name(layer))?;
            if w.shape() != [fan_out, fan_in] {
                return Err(Error::config(format!(
                    "parameter `w{layer}` has shape {:?}, expected [{fan_out}, {fan_in}]",
                    w.shape()
                )));
            }
            let b = self.get(&MlpSpec::bias_name(layer))?;
            if b.shape() != [fan_out] {
                return Err(Error::config(format!(
                    "parameter `b{layer}` has shape {:?}, expected [{fan_out}]",
                    b.shape()
                )));
            }
            expected += 2;
        }
        if self.params.len() != expected {
            return Err(Error::config(format!(
                "parameter set has {} entries, spec expects {expected}",
                self.params.len()
            )));
        }
        Ok(())
    }
}

/// Gradients of a scalar loss with respect to every parameter and the input.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBundle {
    pub param_grads: BTreeMap<String, Tensor>,
    pub input_grad: Tensor,
}

impl GradBundle {
    pub fn zeros_like(spec: &MlpSpec) -> Result<Self> {
        let params = ParamSet::zeros(spec)?;
        Ok(Self {
            param_grads: params.params,
            input_grad: Tensor::zeros(vec![spec.input_dim()]),
        })
    }

    /// Componentwise `self += other`.
    pub fn accumulate(&mut self, other: &GradBundle) {
        for (name, grad) in &other.param_grads {
            let mine = self
                .param_grads
                .get_mut(name)
                .expect("accumulating grad bundles from the same spec");
            for (a, b) in mine.values_mut().iter_mut().zip(grad.values()) {
                *a += b;
            }
        }
        for (a, b) in self
            .input_grad
            .values_mut()
            .iter_mut()
            .zip(other.input_grad.values())
        {
            *a += b;
        }
    }

    /// Componentwise scale, used to turn summed batch gradients into means.
    pub fn scale(&mut self, factor: f64) {
        for grad in self.param_grads.values_mut() {
            for v in grad.values_mut() {
                *v *= factor;
            }
        }
        for v in self.input_grad.values_mut() {
            *v *= factor;
        }
    }
}

fn apply_hidden(activation: HiddenActivation, z: &mut [f64]) {
    match activation {
        HiddenActivation::Relu => {
            for v in z {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        HiddenActivation::Tanh => {
            for v in z {
                *v = v.tanh();
            }
        }
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z {
        *v /= sum;
    }
}

/// Runs the affine chain, returning the post-activation values of every
/// layer: index 0 is the input, index `n_layers` the network output.
fn forward_trace(spec: &MlpSpec, params: &ParamSet, input: &Tensor) -> Result<Vec<Vec<f64>>> {
    params.validate_for(spec)?;
    if input.shape() != [spec.input_dim()] {
        return Err(Error::config(format!(
            "input shape {:?} does not match spec input dim {}",
            input.shape(),
            spec.input_dim()
        )));
    }
    let mut trace = Vec::with_capacity(spec.n_layers() + 1);
    trace.push(input.values().to_vec());
    for layer in 0..spec.n_layers() {
        let w = params.get(&MlpSpec::weight_name(layer))?;
        let b = params.get(&MlpSpec::bias_name(layer))?;
        let x = trace.last().expect("trace has the input");
        let out_dim = spec.layer_sizes[layer + 1];
        let in_dim = spec.layer_sizes[layer];
        let wv = w.values();
        let mut z = vec![0.0; out_dim];
        for (o, zo) in z.iter_mut().enumerate() {
            let row = &wv[o * in_dim..(o + 1) * in_dim];
            let mut acc = b.values()[o];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            *zo = acc;
        }
        if layer + 1 < spec.n_layers() {
            apply_hidden(spec.hidden_activation, &mut z);
        } else {
            match spec.output_activation {
                OutputActivation::Identity => {}
                OutputActivation::Softmax => softmax_in_place(&mut z),
            }
        }
        trace.push(z);
    }
    Ok(trace)
}

/// Evaluates the network on a single input vector.
pub fn forward(spec: &MlpSpec, params: &ParamSet, input: &Tensor) -> Result<Tensor> {
    let trace = forward_trace(spec, params, input)?;
    let out = Tensor::vector(trace.into_iter().next_back().expect("non-empty trace"));
    out.ensure_finite("forward output")?;
    Ok(out)
}

/// Reverse-mode pass: given dLoss/dOutput, returns dLoss/dParam for every
/// parameter and dLoss/dInput.
///
/// For a softmax output the upstream gradient is taken with respect to the
/// probabilities and pulled back through the softmax Jacobian.
pub fn backward(
    spec: &MlpSpec,
    params: &ParamSet,
    input: &Tensor,
    upstream: &Tensor,
) -> Result<GradBundle> {
    if upstream.shape() != [spec.output_dim()] {
        return Err(Error::config(format!(
            "upstream gradient shape {:?} does not match output dim {}",
            upstream.shape(),
            spec.output_dim()
        )));
    }
    let trace = forward_trace(spec, params, input)?;
    let mut bundle = GradBundle::zeros_like(spec)?;

    // dLoss/d(post-activation) of the layer currently being processed.
    let mut grad = upstream.values().to_vec();

    for layer in (0..spec.n_layers()).rev() {
        let y = &trace[layer + 1];
        let x = &trace[layer];
        let in_dim = spec.layer_sizes[layer];

        // Pull back through the activation: dLoss/dz.
        let dz: Vec<f64> = if layer + 1 == spec.n_layers() {
            match spec.output_activation {
                OutputActivation::Identity => grad,
                OutputActivation::Softmax => {
                    let dot: f64 = grad.iter().zip(y).map(|(g, p)| g * p).sum();
                    grad.iter().zip(y).map(|(g, p)| p * (g - dot)).collect()
                }
            }
        } else {
            match spec.hidden_activation {
                HiddenActivation::Relu => grad
                    .iter()
                    .zip(y)
                    .map(|(g, v)| if *v > 0.0 { *g } else { 0.0 })
                    .collect(),
                HiddenActivation::Tanh => {
                    grad.iter().zip(y).map(|(g, v)| g * (1.0 - v * v)).collect()
                }
            }
        };

        let w = params.get(&MlpSpec::weight_name(layer))?;
        let wv = w.values();

        let dw = bundle
            .param_grads
            .get_mut(&MlpSpec::weight_name(layer))
            .expect("zeros_like covers every layer");
        {
            let dwv = dw.values_mut();
            for (o, dzo) in dz.iter().enumerate() {
                let row = &mut dwv[o * in_dim..(o + 1) * in_dim];
                for (slot, xi) in row.iter_mut().zip(x) {
                    *slot = dzo * xi;
                }
            }
        }
        let db = bundle
            .param_grads
            .get_mut(&MlpSpec::bias_name(layer))
            .expect("zeros_like covers every layer");
        db.values_mut().copy_from_slice(&dz);

        let mut dx = vec![0.0; in_dim];
        for (o, dzo) in dz.iter().enumerate() {
            let row = &wv[o * in_dim..(o + 1) * in_dim];
            for (slot, wi) in dx.iter_mut().zip(row) {
                *slot += wi * dzo;
            }
        }
        grad = dx;
    }

    bundle.input_grad = Tensor::vector(grad);
    Ok(bundle)
}

/// In-place SGD update: every parameter becomes `p - lr * g`.
pub fn sgd_step(params: &mut ParamSet, grads: &GradBundle, lr: f64) -> Result<()> {
    if !lr.is_finite() || lr < 0.0 {
        return Err(Error::config(format!("learning rate must be >= 0, got {lr}")));
    }
    for (name, grad) in &grads.param_grads {
        let p = params.get_mut(name)?;
        if p.shape() != grad.shape() {
            return Err(Error::config(format!(
                "gradient for `{name}` has shape {:?}, parameter has {:?}",
                grad.shape(),
                p.shape()
            )));
        }
        for (pv, gv) in p.values_mut().iter_mut().zip(grad.values()) {
            *pv -= lr * gv;
        }
    }
    Ok(())
}

/// A spec plus its parameters; the bundle every model in the crate is made of.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: MlpSpec,
    pub params: ParamSet,
}

impl Network {
    pub fn init<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self> {
        let params = ParamSet::init(&spec, rng)?;
        Ok(Self { spec, params })
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        forward(&self.spec, &self.params, input)
    }

    pub fn backward(&self, input: &Tensor, upstream: &Tensor) -> Result<GradBundle> {
        backward(&self.spec, &self.params, input, upstream)
    }

    pub fn sgd_step(&mut self, grads: &GradBundle, lr: f64) -> Result<()> {
        sgd_step(&mut self.params, grads, lr)
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }
}
