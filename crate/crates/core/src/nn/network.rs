use crate::error::{Error, Result};
use crate::nn::layer::{canonical_layers, LayerSpec};
use crate::nn::ops;
use crate::tensor::{Scalar, Tensor};

/// Weights and biases of a conv or fully connected layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub weights: Tensor<T>,
    pub biases: Vec<T>,
}

/// A feed-forward network: ordered layers and their parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    layers: Vec<LayerSpec>,
    params: Vec<Option<LayerParams<T>>>,
}

/// Intermediate state recorded by [`Network::forward_cached`].
#[derive(Debug, Clone)]
enum LayerCache<T> {
    Conv {
        cols: Vec<T>,
        in_dims: (usize, usize, usize),
    },
    Pool {
        argmax: Vec<usize>,
        in_len: usize,
    },
    Fc {
        input: Vec<T>,
    },
    Relu {
        output: Vec<T>,
    },
    Softmax,
}

/// Everything backpropagation needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    layers: Vec<LayerCache<T>>,
    output: Vec<T>,
    logits: Vec<T>,
}

impl<T> Default for ForwardCache<T> {
    fn default() -> Self {
        ForwardCache {
            layers: Vec::new(),
            output: Vec::new(),
            logits: Vec::new(),
        }
    }
}

impl<T> ForwardCache<T> {
    /// Network output (probabilities when the last layer is softmax).
    pub fn output(&self) -> &[T] {
        &self.output
    }

    /// Input to the final softmax, or the output if there is none.
    pub fn logits(&self) -> &[T] {
        &self.logits
    }
}

/// Per-layer parameter gradients, shaped like [`Network`] parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Option<LayerGradients<T>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients<T> {
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        Gradients {
            layers: net
                .params
                .iter()
                .map(|p| {
                    p.as_ref().map(|p| LayerGradients {
                        weights: vec![T::zero(); p.weights.len()],
                        biases: vec![T::zero(); p.biases.len()],
                    })
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::shape("gradient layer counts differ"));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            match (a, b) {
                (Some(a), Some(b))
                    if a.weights.len() == b.weights.len() && a.biases.len() == b.biases.len() =>
                {
                    add_into(&mut a.weights, &b.weights);
                    add_into(&mut a.biases, &b.biases);
                }
                (None, None) => {}
                _ => return Err(Error::shape("gradient layer shapes differ")),
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        for g in self.layers.iter_mut().flatten() {
            g.weights.iter_mut().chain(g.biases.iter_mut()).for_each(|v| *v = *v * factor);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .flatten()
            .all(|g| g.weights.iter().chain(&g.biases).all(|v| v.is_finite()))
    }
}

fn add_into<T: Scalar>(acc: &mut [T], other: &[T]) {
    for (a, &b) in acc.iter_mut().zip(other) {
        *a = *a + b;
    }
}

impl<T: Scalar> Network<T> {
    /// A network with all parameters zero. Softmax may only appear last.
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a network needs at least one layer"));
        }
        if let Some(pos) = layers.iter().position(|l| *l == LayerSpec::Softmax) {
            if pos + 1 != layers.len() {
                return Err(Error::invalid("softmax must be the final layer"));
            }
        }
        for layer in &layers {
            let bad = match *layer {
                LayerSpec::Conv {
                    kernels,
                    kernel_h,
                    kernel_w,
                    in_channels,
                } => kernels == 0 || kernel_h == 0 || kernel_w == 0 || in_channels == 0,
                LayerSpec::MaxPool { window, stride } => window == 0 || stride == 0,
                LayerSpec::FullyConnected { inputs, outputs } => inputs == 0 || outputs == 0,
                _ => false,
            };
            if bad {
                return Err(Error::invalid(format!("layer {layer:?} has a zero dimension")));
            }
        }
        let params = layers
            .iter()
            .map(|l| {
                l.weight_shape().map(|shape| LayerParams {
                    weights: Tensor::zeros(&shape),
                    biases: vec![T::zero(); l.kernel_count()],
                })
            })
            .collect();
        Ok(Network { layers, params })
    }

    /// The gesture network with zero parameters.
    pub fn canonical() -> Self {
        Self::new(canonical_layers()).expect("canonical layer list is valid")
    }

    /// Builds a network from explicit parameters, checking their shapes.
    pub fn with_params(layers: Vec<LayerSpec>, params: Vec<Option<LayerParams<T>>>) -> Result<Self> {
        let mut net = Self::new(layers)?;
        if params.len() != net.layers.len() {
            return Err(Error::shape(format!(
                "{} parameter slots for {} layers",
                params.len(),
                net.layers.len()
            )));
        }
        for (i, (slot, given)) in net.params.iter_mut().zip(params).enumerate() {
            match (slot.as_ref(), given) {
                (Some(expected), Some(given)) => {
                    if expected.weights.shape() != given.weights.shape()
                        || expected.biases.len() != given.biases.len()
                    {
                        return Err(Error::shape(format!("layer {i} parameter shape mismatch")));
                    }
                    *slot = Some(given);
                }
                (None, None) => {}
                _ => return Err(Error::shape(format!("layer {i} parameter presence mismatch"))),
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[Option<LayerParams<T>>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Option<LayerParams<T>>] {
        &mut self.params
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::weight_count).sum()
    }

    pub fn bias_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::kernel_count).sum()
    }

    /// Shapes from the input through every layer's output.
    pub fn shape_trace(&self, input: &[usize]) -> Result<Vec<Vec<usize>>> {
        let mut trace = vec![input.to_vec()];
        for layer in &self.layers {
            let next = layer.output_shape(trace.last().expect("trace starts non-empty"))?;
            trace.push(next);
        }
        Ok(trace)
    }

    /// Same network at another precision.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            layers: self.layers.clone(),
            params: self
                .params
                .iter()
                .map(|p| {
                    p.as_ref().map(|p| LayerParams {
                        weights: p.weights.cast(),
                        biases: p
                            .biases
                            .iter()
                            .map(|b| U::from_f64_lossy(b.to_f64().unwrap_or(f64::NAN)))
                            .collect(),
                    })
                })
                .collect(),
        }
    }

    /// Inference: the network output, i.e. class probabilities for a
    /// softmax-terminated network.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Vec<T>> {
        self.run(input, false).map(|cache| cache.output)
    }

    /// Forward pass that keeps the state needed by [`Network::backward`].
    pub fn forward_cached(&self, input: &Tensor<T>) -> Result<ForwardCache<T>> {
        self.run(input, true)
    }

    fn run(&self, input: &Tensor<T>, keep: bool) -> Result<ForwardCache<T>> {
        self.shape_trace(input.shape())?;
        let mut shape = input.shape().to_vec();
        let mut data = input.data().to_vec();
        let mut caches = Vec::with_capacity(if keep { self.layers.len() } else { 0 });
        let mut logits = None;
        for (layer, params) in self.layers.iter().zip(&self.params) {
            let out_shape = layer.output_shape(&shape)?;
            let (next, cache) = match *layer {
                LayerSpec::Conv { .. } => {
                    let p = params.as_ref().expect("conv layers carry parameters");
                    let dims = dims3(&shape);
                    let (out, cols) = ops::conv_forward_unchecked(
                        &data,
                        dims,
                        layer,
                        p.weights.data(),
                        &p.biases,
                    );
                    (out, LayerCache::Conv { cols, in_dims: dims })
                }
                LayerSpec::MaxPool { window, stride } => {
                    let (out, argmax) = ops::maxpool_unchecked(&data, dims3(&shape), window, stride);
                    let in_len = data.len();
                    (out, LayerCache::Pool { argmax, in_len })
                }
                LayerSpec::FullyConnected { .. } => {
                    let p = params.as_ref().expect("fc layers carry parameters");
                    let out = ops::fc_unchecked(&data, p.weights.data(), &p.biases);
                    (out, LayerCache::Fc { input: data })
                }
                LayerSpec::Relu => {
                    let mut out = data;
                    ops::relu_in_place(&mut out);
                    let cache = if keep {
                        LayerCache::Relu {
                            output: out.clone(),
                        }
                    } else {
                        LayerCache::Softmax
                    };
                    (out, cache)
                }
                LayerSpec::Softmax => {
                    let probs = ops::softmax(&data);
                    logits = Some(data);
                    (probs, LayerCache::Softmax)
                }
            };
            if keep {
                caches.push(cache);
            }
            data = next;
            shape = out_shape;
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence("non-finite network output".into()));
        }
        Ok(ForwardCache {
            layers: caches,
            logits: logits.unwrap_or_else(|| data.clone()),
            output: data,
        })
    }

    /// Softmax cross-entropy loss for `label` and exact gradients of every
    /// parameter. Requires a softmax-terminated network.
    pub fn backward(&self, cache: &ForwardCache<T>, label: usize) -> Result<(T, Gradients<T>)> {
        self.check_cache(cache)?;
        if self.layers.last() != Some(&LayerSpec::Softmax) {
            return Err(Error::invalid("loss gradients need a softmax output layer"));
        }
        let (loss, probs) = ops::softmax_cross_entropy(&cache.logits, label)?;
        let mut upstream = probs;
        upstream[label] = upstream[label] - T::one();
        let grads = self.backward_from(cache, &upstream)?;
        Ok((loss, grads))
    }

    /// Backpropagates an arbitrary gradient with respect to the logits
    /// (the input of the final softmax, or the output when there is none).
    pub fn backward_from(&self, cache: &ForwardCache<T>, upstream: &[T]) -> Result<Gradients<T>> {
        self.check_cache(cache)?;
        if upstream.len() != cache.logits.len() {
            return Err(Error::shape(format!(
                "upstream gradient has {} entries, logits have {}",
                upstream.len(),
                cache.logits.len()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut grad = upstream.to_vec();
        for (idx, ((layer, params), layer_cache)) in self
            .layers
            .iter()
            .zip(&self.params)
            .zip(&cache.layers)
            .enumerate()
            .rev()
        {
            let need_input = idx > 0;
            match (layer, layer_cache) {
                (LayerSpec::Softmax, _) => {}
                (LayerSpec::Relu, LayerCache::Relu { output }) => {
                    for (g, &o) in grad.iter_mut().zip(output) {
                        if o <= T::zero() {
                            *g = T::zero();
                        }
                    }
                }
                (LayerSpec::MaxPool { .. }, LayerCache::Pool { argmax, in_len }) => {
                    let mut down = vec![T::zero(); *in_len];
                    for (&src, &g) in argmax.iter().zip(&grad) {
                        down[src] = down[src] + g;
                    }
                    grad = down;
                }
                (LayerSpec::FullyConnected { inputs, .. }, LayerCache::Fc { input }) => {
                    let p = params.as_ref().expect("fc layers carry parameters");
                    let slot = grads.layers[idx].as_mut().expect("fc layers carry gradients");
                    for (j, &g) in grad.iter().enumerate() {
                        slot.biases[j] = g;
                        for (w, &x) in slot.weights[j * inputs..(j + 1) * inputs].iter_mut().zip(input) {
                            *w = g * x;
                        }
                    }
                    if need_input {
                        let mut down = vec![T::zero(); *inputs];
                        for (row, &g) in p.weights.data().chunks_exact(*inputs).zip(&grad) {
                            for (d, &w) in down.iter_mut().zip(row) {
                                *d = *d + g * w;
                            }
                        }
                        grad = down;
                    }
                }
                (LayerSpec::Conv { .. }, LayerCache::Conv { cols, in_dims }) => {
                    let p = params.as_ref().expect("conv layers carry parameters");
                    let (gw, gb, gin) =
                        ops::conv_backward(&grad, cols, *in_dims, layer, p.weights.data(), need_input);
                    let slot = grads.layers[idx].as_mut().expect("conv layers carry gradients");
                    slot.weights = gw;
                    slot.biases = gb;
                    if let Some(gin) = gin {
                        grad = gin;
                    }
                }
                _ => return Err(Error::MissingForwardState),
            }
        }
        Ok(grads)
    }

    fn check_cache(&self, cache: &ForwardCache<T>) -> Result<()> {
        if cache.layers.len() != self.layers.len() || cache.logits.is_empty() {
            return Err(Error::MissingForwardState);
        }
        Ok(())
    }
}

fn dims3(shape: &[usize]) -> (usize, usize, usize) {
    match *shape {
        [h, w, c] => (h, w, c),
        [h, w] => (h, w, 1),
        _ => unreachable!("shape validated by output_shape"),
    }
}
