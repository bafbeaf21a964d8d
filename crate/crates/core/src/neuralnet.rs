//! Dense feed-forward networks with hand-written reverse-mode gradients
//! and an RMSProp optimizer.
//!
//! Everything is `f64` and single-threaded with a fixed loop order, so the
//! same seed and inputs always give bit-identical parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("non-finite value in {0}")]
    NonFiniteValue(&'static str),
    #[error("a network needs at least two widths, got {0}")]
    TooFewWidths(usize),
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NnError> {
        if data.len() != rows * cols {
            return Err(NnError::ShapeMismatch {
                context: "Matrix::from_vec",
                expected: (rows, cols),
                found: (data.len(), 1),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(NnError::NonFiniteValue("Matrix::from_vec"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NnError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(NnError::ShapeMismatch {
                    context: "Matrix::from_rows",
                    expected: (rows.len(), cols),
                    found: (1, r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// d activation / dz, given pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected layer computing `act(x W^T + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `outputs x inputs`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn shape(&self) -> LayerShape {
        LayerShape {
            inputs: self.inputs(),
            outputs: self.outputs(),
            activation: self.activation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

/// Per-layer intermediates recorded by [`DenseNet::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Matrix>,
    pre_activations: Vec<Matrix>,
    outputs: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Parameter gradients, laid out like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    /// Gradient tensors in parameter declaration order (W0, b0, W1, b1, ...).
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    /// Elementwise sum, for combining gradients of separate loss terms.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.as_mut_slice().iter_mut().zip(b.weights.as_slice()) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Dense>,
}

impl DenseNet {
    /// Glorot-uniform weights (`a = sqrt(6 / (fan_in + fan_out))`), zero
    /// biases. `hidden` applies to every layer but the last.
    pub fn new<R: Rng + ?Sized>(
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        if widths.len() < 2 {
            return Err(NnError::TooFewWidths(widths.len()));
        }
        let n = widths.len() - 1;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut weights = Matrix::zeros(fan_out, fan_in);
                for x in weights.as_mut_slice() {
                    *x = rng.random_range(-a..a);
                }
                Dense {
                    weights,
                    bias: vec![0.0; fan_out],
                    activation: if i + 1 == n { output } else { hidden },
                }
            })
            .collect();
        Ok(Self { layers })
    }

    /// Zero-initialized network with the given architecture.
    pub fn zeros(shapes: &[LayerShape]) -> Result<Self, NnError> {
        let layers = shapes
            .iter()
            .map(|s| Dense {
                weights: Matrix::zeros(s.outputs, s.inputs),
                bias: vec![0.0; s.outputs],
                activation: s.activation,
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::TooFewWidths(0));
        }
        for l in &layers {
            if l.bias.len() != l.outputs() {
                return Err(NnError::ShapeMismatch {
                    context: "DenseNet::from_layers bias",
                    expected: (l.outputs(), 1),
                    found: (l.bias.len(), 1),
                });
            }
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(NnError::ShapeMismatch {
                    context: "DenseNet::from_layers chain",
                    expected: (pair[0].outputs(), 0),
                    found: (pair[1].inputs(), 0),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn architecture(&self) -> Vec<LayerShape> {
        self.layers.iter().map(Dense::shape).collect()
    }

    /// Parameter tensors in declaration order (W0, b0, W1, b1, ...).
    pub fn params(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| {
            let Dense { weights, bias, .. } = l;
            [weights.as_mut_slice(), bias.as_mut_slice()]
        })
    }

    pub fn param_count(&self) -> usize {
        self.params().map(<[f64]>::len).sum()
    }

    pub fn max_abs_param(&self) -> f64 {
        self.params().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Clamp every weight and bias into `[-c, c]`.
    pub fn clip_params(&mut self, c: f64) {
        for t in self.params_mut() {
            for w in t {
                *w = w.clamp(-c, c);
            }
        }
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, ForwardCache), NnError> {
        if batch.cols() != self.input_dim() {
            return Err(NnError::ShapeMismatch {
                context: "DenseNet::forward",
                expected: (batch.rows(), self.input_dim()),
                found: batch.shape(),
            });
        }
        let n = batch.rows();
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre_activations: Vec::with_capacity(self.layers.len()),
            outputs: Vec::with_capacity(self.layers.len()),
        };
        let mut x = batch.clone();
        for layer in &self.layers {
            let mut z = Matrix::zeros(n, layer.outputs());
            for i in 0..n {
                let xi = x.row(i);
                let zi = z.row_mut(i);
                for (o, zo) in zi.iter_mut().enumerate() {
                    let w = layer.weights.row(o);
                    let mut acc = layer.bias[o];
                    for (a, b) in xi.iter().zip(w) {
                        acc += a * b;
                    }
                    *zo = acc;
                }
            }
            let mut a = z.clone();
            for v in a.as_mut_slice() {
                *v = layer.activation.apply(*v);
            }
            cache.inputs.push(x);
            cache.pre_activations.push(z);
            x = a.clone();
            cache.outputs.push(a);
        }
        Ok((x, cache))
    }

    /// Reverse-mode pass. `upstream` is dLoss/dOutput for each batch row;
    /// returns parameter gradients and dLoss/dInput.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<(Gradients, Matrix), NnError> {
        if cache.inputs.len() != self.layers.len() {
            return Err(NnError::ShapeMismatch {
                context: "DenseNet::backward cache depth",
                expected: (self.layers.len(), 0),
                found: (cache.inputs.len(), 0),
            });
        }
        let out_shape = cache.outputs[self.layers.len() - 1].shape();
        if upstream.shape() != out_shape {
            return Err(NnError::ShapeMismatch {
                context: "DenseNet::backward upstream",
                expected: out_shape,
                found: upstream.shape(),
            });
        }

        let n = upstream.rows();
        let mut grads: Vec<LayerGradient> = Vec::with_capacity(self.layers.len());
        let mut d_out = upstream.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre_activations[idx];
            let a = &cache.outputs[idx];
            let x = &cache.inputs[idx];
            if z.shape() != (n, layer.outputs()) || x.shape() != (n, layer.inputs()) {
                return Err(NnError::ShapeMismatch {
                    context: "DenseNet::backward cache",
                    expected: (n, layer.outputs()),
                    found: z.shape(),
                });
            }

            let mut dz = d_out;
            for ((d, &zv), &av) in dz.as_mut_slice().iter_mut().zip(z.as_slice()).zip(a.as_slice()) {
                *d *= layer.activation.derivative(zv, av);
            }

            let mut dw = Matrix::zeros(layer.outputs(), layer.inputs());
            let mut db = vec![0.0; layer.outputs()];
            let mut dx = Matrix::zeros(n, layer.inputs());
            for i in 0..n {
                let dzi = dz.row(i);
                let xi = x.row(i);
                for (o, &g) in dzi.iter().enumerate() {
                    db[o] += g;
                    if g == 0.0 {
                        continue;
                    }
                    for (w, &xv) in dw.row_mut(o).iter_mut().zip(xi) {
                        *w += g * xv;
                    }
                    let wrow = layer.weights.row(o);
                    for (d, &wv) in dx.row_mut(i).iter_mut().zip(wrow) {
                        *d += g * wv;
                    }
                }
            }
            grads.push(LayerGradient { weights: dw, bias: db });
            d_out = dx;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, d_out))
    }
}

/// Elementwise RMSProp:
/// `s <- rho s + (1 - rho) g^2`, `theta <- theta - lr g / (sqrt(s) + eps)`.
pub fn rmsprop_update(params: &mut [f64], grads: &[f64], accum: &mut [f64], lr: f64, rho: f64, eps: f64) {
    for ((p, &g), s) in params.iter_mut().zip(grads).zip(accum.iter_mut()) {
        *s = rho * *s + (1.0 - rho) * g * g;
        *p -= lr * g / (s.sqrt() + eps);
    }
}

/// RMSProp state for one network: a squared-gradient accumulator per
/// parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub rho: f64,
    pub eps: f64,
    accum: Vec<Vec<f64>>,
}

impl RmsProp {
    pub fn new(net: &DenseNet, learning_rate: f64, rho: f64, eps: f64) -> Self {
        Self {
            learning_rate,
            rho,
            eps,
            accum: net.params().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    pub fn accumulators(&self) -> &[Vec<f64>] {
        &self.accum
    }

    pub fn accumulators_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.accum
    }

    /// Apply one update. Gradients are checked for finiteness before any
    /// parameter changes, so an error leaves `net` and `self` untouched.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<(), NnError> {
        let shapes_match = self.accum.len() == grads.layers.len() * 2
            && net.params().zip(grads.tensors()).all(|(p, g)| p.len() == g.len())
            && self.accum.iter().zip(grads.tensors()).all(|(s, g)| s.len() == g.len());
        if !shapes_match {
            return Err(NnError::ShapeMismatch {
                context: "RmsProp::step",
                expected: (net.param_count(), 0),
                found: (grads.tensors().map(<[f64]>::len).sum(), 0),
            });
        }
        if grads.tensors().flatten().any(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteGradient);
        }
        for ((p, g), s) in net.params_mut().zip(grads.tensors()).zip(self.accum.iter_mut()) {
            rmsprop_update(p, g, s, self.learning_rate, self.rho, self.eps);
        }
        if net.params().flatten().any(|p| !p.is_finite()) {
            return Err(NnError::NonFiniteGradient);
        }
        Ok(())
    }
}
