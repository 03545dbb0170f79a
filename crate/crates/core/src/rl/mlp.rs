//! Dense MLP with hand-written backprop, plus Adam.
//!
//! Layers compute `z = x W^T + b` with tanh between layers and a linear
//! head. Gradients are exact; the test suite checks them against central
//! finite differences.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One dense layer, `w` stored `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Gradients matching a [`Dense`] layer.
#[derive(Clone, Debug)]
pub struct DenseGrad {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Feed-forward network: tanh on every layer except the last.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Per-layer inputs cached by the forward pass, consumed by backward.
pub struct ForwardCache {
    /// `inputs[l]` is the batch fed into layer `l`; `inputs.len() == L + 1`
    /// and the last entry is the network output.
    inputs: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.inputs.last().expect("cache never empty")
    }
}

impl Mlp {
    /// Xavier-uniform initialization over the given layer sizes
    /// (`dims[0]` inputs, `dims.last()` outputs).
    pub fn new(dims: &[usize], rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let layers = dims
            .windows(2)
            .map(|io| {
                let (fan_in, fan_out) = (io[0], io[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let w = Array2::from_shape_fn((fan_out, fan_in), |_| {
                    rng.random_range(-bound..bound)
                });
                Dense {
                    w,
                    b: Array1::zeros(fan_out),
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.nrows()
    }

    /// Scale the final layer's weights (small heads stabilize early PPO).
    pub fn scale_last_layer(&mut self, factor: f64) {
        let last = self.layers.last_mut().unwrap();
        last.w.mapv_inplace(|v| v * factor);
    }

    /// Batched forward pass; the cache feeds [`Mlp::backward`].
    pub fn forward(&self, x: &Array2<f64>) -> ForwardCache {
        let n_layers = self.layers.len();
        let mut inputs = Vec::with_capacity(n_layers + 1);
        inputs.push(x.clone());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = inputs[l].dot(&layer.w.t());
            z += &layer.b;
            if l + 1 < n_layers {
                z.mapv_inplace(f64::tanh);
            }
            inputs.push(z);
        }
        ForwardCache { inputs }
    }

    /// Single-row convenience forward without allocating a cache trail.
    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        let n_layers = self.layers.len();
        let mut a = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z: Vec<f64> = layer
                .w
                .rows()
                .into_iter()
                .zip(layer.b.iter())
                .map(|(row, b)| row.iter().zip(&a).map(|(w, x)| w * x).sum::<f64>() + b)
                .collect();
            if l + 1 < n_layers {
                for v in &mut z {
                    *v = v.tanh();
                }
            }
            a = z;
        }
        a
    }

    /// Backprop `d_out` (batch x out) through the cached forward pass.
    pub fn backward(&self, cache: &ForwardCache, d_out: &Array2<f64>) -> Vec<DenseGrad> {
        let n_layers = self.layers.len();
        let mut grads: Vec<DenseGrad> = Vec::with_capacity(n_layers);
        let mut delta = d_out.clone();
        for l in (0..n_layers).rev() {
            // delta is d loss / d z_l (pre-activation of layer l); for the
            // last layer that's d_out directly (linear head), for earlier
            // layers the tanh factor was applied on the way down.
            let input = &cache.inputs[l];
            let gw = delta.t().dot(input);
            let gb = delta.sum_axis(Axis(0));
            if l > 0 {
                let upstream = delta.dot(&self.layers[l].w);
                // cache.inputs[l] is tanh(z_{l-1}): derivative 1 - a^2.
                delta = upstream * &cache.inputs[l].mapv(|a| 1.0 - a * a);
            }
            grads.push(DenseGrad { w: gw, b: gb });
        }
        grads.reverse();
        grads
    }

    pub fn zero_grads(&self) -> Vec<DenseGrad> {
        self.layers
            .iter()
            .map(|l| DenseGrad {
                w: Array2::zeros(l.w.dim()),
                b: Array1::zeros(l.b.dim()),
            })
            .collect()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()))
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }
}

/// Adam with bias correction. One instance per MLP (plus a scalar-vector
/// variant for the log-std head).
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<DenseGrad>,
    v: Vec<DenseGrad>,
}

impl Adam {
    pub fn new(lr: f64, mlp: &Mlp) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: mlp.zero_grads(),
            v: mlp.zero_grads(),
        }
    }

    pub fn step(&mut self, mlp: &mut Mlp, grads: &[DenseGrad]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for ((layer, grad), (m, v)) in mlp
            .layers
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            adam_tensor(
                layer.w.iter_mut(),
                grad.w.iter(),
                m.w.iter_mut(),
                v.w.iter_mut(),
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
                bc1,
                bc2,
            );
            adam_tensor(
                layer.b.iter_mut(),
                grad.b.iter(),
                m.b.iter_mut(),
                v.b.iter_mut(),
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
                bc1,
                bc2,
            );
        }
    }
}

/// Adam over a flat vector parameter (the log-std head).
#[derive(Clone, Debug)]
pub struct AdamVec {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Array1<f64>,
    v: Array1<f64>,
}

impl AdamVec {
    pub fn new(lr: f64, dim: usize) -> Self {
        AdamVec {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Array1::zeros(dim),
            v: Array1::zeros(dim),
        }
    }

    pub fn step(&mut self, param: &mut Array1<f64>, grad: &Array1<f64>) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        adam_tensor(
            param.iter_mut(),
            grad.iter(),
            self.m.iter_mut(),
            self.v.iter_mut(),
            self.lr,
            self.beta1,
            self.beta2,
            self.eps,
            bc1,
            bc2,
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_tensor<'a>(
    params: impl Iterator<Item = &'a mut f64>,
    grads: impl Iterator<Item = &'a f64>,
    m: impl Iterator<Item = &'a mut f64>,
    v: impl Iterator<Item = &'a mut f64>,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
) {
    for (((p, g), m), v) in params.zip(grads).zip(m).zip(v) {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}
