//! Dense feed-forward chains with exact reverse-mode gradients.
//!
//! A network is an ordered list of affine layers, each with an optional
//! batch-normalization stage and an element-wise activation:
//!
//! `x -> xW + b -> [batchnorm] -> activation`
//!
//! `forward` returns a [`ForwardCache`] holding everything `backward` needs;
//! gradients come back as one flat vector in parameter declaration order
//! (per layer: weight row-major, bias, then batch-norm scale and shift).

use ndarray::{Array1, Array2, Axis};

use crate::error::{Result, SubstrateError};
use crate::rng::Rng;

const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Tanh => 2,
            Activation::Identity => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Tanh),
            3 => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply(self, y: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Relu => y.mapv(|v| v.max(0.0)),
            Activation::Sigmoid => y.mapv(|v| 1.0 / (1.0 + (-v).exp())),
            Activation::Tanh => y.mapv(f64::tanh),
            Activation::Identity => y.clone(),
        }
    }

    /// Derivative expressed through pre-activation `y` and output `a`.
    fn derivative(self, y: &Array2<f64>, a: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Relu => y.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
            Activation::Sigmoid => a.mapv(|v| v * (1.0 - v)),
            Activation::Tanh => a.mapv(|v| 1.0 - v * v),
            Activation::Identity => Array2::ones(y.dim()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub scale: Array1<f64>,
    pub shift: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
}

impl BatchNorm {
    fn new(dim: usize, momentum: f64) -> Self {
        Self {
            scale: Array1::ones(dim),
            shift: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
            momentum,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Layer {
    /// Row-major `(in_dim, out_dim)` so a batch maps as `x.dot(&weight)`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
    pub batch_norm: Option<BatchNorm>,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.ncols()
    }

    fn param_count(&self) -> usize {
        let mut n = self.weight.len() + self.bias.len();
        if let Some(bn) = &self.batch_norm {
            n += bn.scale.len() + bn.shift.len();
        }
        n
    }
}

/// Layer blueprint used when constructing a fresh network.
#[derive(Debug, Clone, Copy)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub batch_norm: bool,
}

/// Per-layer intermediates kept for the backward pass.
#[derive(Debug)]
struct LayerCache {
    input: Array2<f64>,
    /// Pre-activation (post batch-norm when present).
    pre_act: Array2<f64>,
    output: Array2<f64>,
    /// `(xhat, inv_std)` for the batch-norm stage.
    bn: Option<(Array2<f64>, Array1<f64>)>,
}

/// Intermediates of one forward pass; consumed by [`DenseNet::backward`].
#[derive(Debug)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    mode: Mode,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.layers.last().expect("non-empty net").output
    }

    pub fn batch_size(&self) -> usize {
        self.layers[0].input.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
    pub mode: Mode,
}

impl DenseNet {
    /// Fresh network with uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init.
    pub fn new(specs: &[LayerSpec], momentum: f64, rng: &mut Rng) -> Self {
        assert!(!specs.is_empty(), "a network needs at least one layer");
        for w in specs.windows(2) {
            assert_eq!(
                w[0].out_dim, w[1].in_dim,
                "consecutive layer dimensions must compose"
            );
        }
        let layers = specs
            .iter()
            .map(|s| {
                let bound = 1.0 / (s.in_dim as f64).sqrt();
                Layer {
                    weight: Array2::from_shape_fn((s.in_dim, s.out_dim), |_| {
                        rng.uniform(-bound, bound)
                    }),
                    bias: Array1::from_shape_fn(s.out_dim, |_| rng.uniform(-bound, bound)),
                    activation: s.activation,
                    batch_norm: s.batch_norm.then(|| BatchNorm::new(s.out_dim, momentum)),
                }
            })
            .collect();
        Self {
            layers,
            mode: Mode::Train,
        }
    }

    /// Plain multi-layer perceptron: `dims` hidden activations, identity output,
    /// no batch normalization.
    pub fn mlp(dims: &[usize], hidden: Activation, rng: &mut Rng) -> Self {
        assert!(dims.len() >= 2);
        let specs: Vec<LayerSpec> = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| LayerSpec {
                in_dim: w[0],
                out_dim: w[1],
                activation: if i + 2 == dims.len() {
                    Activation::Identity
                } else {
                    hidden
                },
                batch_norm: false,
            })
            .collect();
        Self::new(&specs, 0.9, rng)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty net").out_dim()
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Forward pass in the current mode. Train mode updates batch-norm
    /// running statistics, hence `&mut self`.
    pub fn forward(&mut self, batch: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        let mode = self.mode;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            if x.ncols() != layer.in_dim() {
                return Err(SubstrateError::DimMismatch {
                    layer: i,
                    expected: layer.in_dim(),
                    got: x.ncols(),
                });
            }
            if layer.batch_norm.is_some() && mode == Mode::Train && x.nrows() < 2 {
                return Err(SubstrateError::BatchTooSmall {
                    layer: i,
                    got: x.nrows(),
                });
            }
            let z = x.dot(&layer.weight) + &layer.bias;
            let (pre_act, bn_cache) = match layer.batch_norm.as_mut() {
                None => (z, None),
                Some(bn) => {
                    let (mean, var) = match mode {
                        Mode::Train => {
                            let mean = z.mean_axis(Axis(0)).expect("non-empty batch");
                            let centered = &z - &mean;
                            let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).unwrap();
                            bn.running_mean = bn.momentum * &bn.running_mean
                                + (1.0 - bn.momentum) * &mean;
                            bn.running_var =
                                bn.momentum * &bn.running_var + (1.0 - bn.momentum) * &var;
                            (mean, var)
                        }
                        Mode::Eval => (bn.running_mean.clone(), bn.running_var.clone()),
                    };
                    let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                    let xhat = (&z - &mean) * &inv_std;
                    let y = &xhat * &bn.scale + &bn.shift;
                    (y, Some((xhat, inv_std)))
                }
            };
            let output = layer.activation.apply(&pre_act);
            caches.push(LayerCache {
                input: x,
                pre_act,
                output: output.clone(),
                bn: bn_cache,
            });
            x = output;
        }
        Ok((
            x,
            ForwardCache {
                layers: caches,
                mode,
            },
        ))
    }

    /// Eval-mode forward without touching the network: a pure function of
    /// the input given fixed parameters and running statistics.
    pub fn predict(&self, batch: &Array2<f64>) -> Result<Array2<f64>> {
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            if x.ncols() != layer.in_dim() {
                return Err(SubstrateError::DimMismatch {
                    layer: i,
                    expected: layer.in_dim(),
                    got: x.ncols(),
                });
            }
            let z = x.dot(&layer.weight) + &layer.bias;
            let y = match &layer.batch_norm {
                None => z,
                Some(bn) => {
                    let inv_std = bn.running_var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                    (&z - &bn.running_mean) * &inv_std * &bn.scale + &bn.shift
                }
            };
            x = layer.activation.apply(&y);
        }
        Ok(x)
    }

    /// Reverse pass. Returns `(flat parameter gradients, gradient w.r.t. the
    /// input batch)`. The cache must come from a forward pass of this net.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
        assert_eq!(cache.layers.len(), self.layers.len(), "cache/net mismatch");
        let mut grads = vec![0.0; self.param_count()];
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for layer in &self.layers {
            offsets.push(off);
            off += layer.param_count();
        }

        let mut g = grad_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let lc = &cache.layers[i];
            let b = lc.input.nrows() as f64;
            // Through the activation.
            let gy = &g * &layer.activation.derivative(&lc.pre_act, &lc.output);
            // Through batch normalization.
            let gz = match (&layer.batch_norm, &lc.bn) {
                (None, _) => gy,
                (Some(bn), Some((xhat, inv_std))) => {
                    let dscale = (&gy * xhat).sum_axis(Axis(0));
                    let dshift = gy.sum_axis(Axis(0));
                    let mut dxhat = gy;
                    dxhat *= &bn.scale;
                    let gz = match cache.mode {
                        Mode::Train => {
                            let sum_dxhat = dxhat.sum_axis(Axis(0));
                            let sum_dxhat_xhat = (&dxhat * xhat).sum_axis(Axis(0));
                            ((dxhat * b) - &sum_dxhat - xhat * &sum_dxhat_xhat)
                                * inv_std
                                / b
                        }
                        Mode::Eval => dxhat * inv_std,
                    };
                    let base = offsets[i] + layer.weight.len() + layer.bias.len();
                    let dim = bn.scale.len();
                    grads[base..base + dim].copy_from_slice(dscale.as_slice().unwrap());
                    grads[base + dim..base + 2 * dim]
                        .copy_from_slice(dshift.as_slice().unwrap());
                    gz
                }
                (Some(_), None) => unreachable!("batch-norm layer without cached stats"),
            };
            let dw = lc.input.t().dot(&gz);
            let db = gz.sum_axis(Axis(0));
            let base = offsets[i];
            grads[base..base + dw.len()].copy_from_slice(dw.as_slice().unwrap());
            grads[base + dw.len()..base + dw.len() + db.len()]
                .copy_from_slice(db.as_slice().unwrap());
            g = gz.dot(&layer.weight.t());
        }
        (grads, g)
    }

    /// Number of trainable parameters (running statistics excluded).
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Trainable parameters flattened in declaration order.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend(layer.weight.iter());
            out.extend(layer.bias.iter());
            if let Some(bn) = &layer.batch_norm {
                out.extend(bn.scale.iter());
                out.extend(bn.shift.iter());
            }
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let mut it = params.iter();
        for layer in &mut self.layers {
            for w in layer.weight.iter_mut() {
                *w = *it.next().unwrap();
            }
            for b in layer.bias.iter_mut() {
                *b = *it.next().unwrap();
            }
            if let Some(bn) = &mut layer.batch_norm {
                for s in bn.scale.iter_mut() {
                    *s = *it.next().unwrap();
                }
                for s in bn.shift.iter_mut() {
                    *s = *it.next().unwrap();
                }
            }
        }
    }

    /// Human-readable path of the flat parameter index, for error reporting.
    pub fn param_path(&self, index: usize) -> String {
        let mut rem = index;
        for (i, layer) in self.layers.iter().enumerate() {
            let sections: [(&str, usize); 4] = [
                ("weight", layer.weight.len()),
                ("bias", layer.bias.len()),
                (
                    "bn.scale",
                    layer.batch_norm.as_ref().map_or(0, |b| b.scale.len()),
                ),
                (
                    "bn.shift",
                    layer.batch_norm.as_ref().map_or(0, |b| b.shift.len()),
                ),
            ];
            for (name, len) in sections {
                if rem < len {
                    return format!("layer{i}.{name}[{rem}]");
                }
                rem -= len;
            }
        }
        format!("param[{index}]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn identity_layer(dim: usize, activation: Activation) -> DenseNet {
        let mut net = DenseNet::new(
            &[LayerSpec {
                in_dim: dim,
                out_dim: dim,
                activation,
                batch_norm: false,
            }],
            0.9,
            &mut Rng::new(0),
        );
        net.set_params_flat(
            &Array2::<f64>::eye(dim)
                .iter()
                .copied()
                .chain(std::iter::repeat(0.0).take(dim))
                .collect::<Vec<_>>(),
        );
        net
    }

    #[test]
    fn identity_net_passes_input_through() {
        let net = identity_layer(2, Activation::Identity);
        let out = net.predict(&array![[1.0, 2.0]]).unwrap();
        assert_eq!(out, array![[1.0, 2.0]]);
    }

    #[test]
    fn relu_clamps_negatives() {
        let net = identity_layer(2, Activation::Relu);
        let out = net.predict(&array![[-1.0, 2.0]]).unwrap();
        assert_eq!(out, array![[0.0, 2.0]]);
    }

    #[test]
    fn two_layer_forward_matches_matrix_oracle() {
        // [DERIVED] oracle: straightforward matrix arithmetic, recomputed here
        // element by element without ndarray's dot.
        let mut rng = Rng::new(3);
        let mut net = DenseNet::mlp(&[3, 4, 2], Activation::Tanh, &mut rng);
        let batch = rng.normal_array2(5, 3);
        let (out, _) = net.forward(&batch).unwrap();

        let mut expect = Array2::<f64>::zeros((5, 2));
        for b in 0..5 {
            let mut h = vec![0.0; 4];
            for j in 0..4 {
                let mut acc = net.layers[0].bias[j];
                for i in 0..3 {
                    acc += batch[[b, i]] * net.layers[0].weight[[i, j]];
                }
                h[j] = acc.tanh();
            }
            for j in 0..2 {
                let mut acc = net.layers[1].bias[j];
                for (i, hv) in h.iter().enumerate() {
                    acc += hv * net.layers[1].weight[[i, j]];
                }
                expect[[b, j]] = acc;
            }
        }
        for (a, e) in out.iter().zip(expect.iter()) {
            assert!((a - e).abs() < 1e-12, "got {a}, expected {e}");
        }
    }

    #[test]
    fn dim_mismatch_names_layer() {
        let mut rng = Rng::new(1);
        let mut net = DenseNet::mlp(&[3, 2], Activation::Identity, &mut rng);
        let err = net.forward(&Array2::zeros((1, 4))).unwrap_err();
        assert!(matches!(err, SubstrateError::DimMismatch { layer: 0, .. }));
    }

    #[test]
    fn linear_weight_gradient_is_input_pattern() {
        // Scalar loss = sum of outputs of a 1-layer linear net: dL/dW = sum of inputs.
        let mut rng = Rng::new(5);
        let mut net = DenseNet::mlp(&[2, 1], Activation::Identity, &mut rng);
        let batch = array![[1.0, 2.0], [3.0, 4.0]];
        let (_, cache) = net.forward(&batch).unwrap();
        let (grads, _) = net.backward(&cache, &Array2::ones((2, 1)));
        assert!((grads[0] - 4.0).abs() < 1e-12); // 1 + 3
        assert!((grads[1] - 6.0).abs() < 1e-12); // 2 + 4
        assert!((grads[2] - 2.0).abs() < 1e-12); // bias: batch size
    }

    #[test]
    fn zero_loss_grad_gives_zero_param_grads() {
        let mut rng = Rng::new(6);
        let mut net = DenseNet::new(
            &[
                LayerSpec {
                    in_dim: 3,
                    out_dim: 4,
                    activation: Activation::Relu,
                    batch_norm: true,
                },
                LayerSpec {
                    in_dim: 4,
                    out_dim: 2,
                    activation: Activation::Identity,
                    batch_norm: false,
                },
            ],
            0.9,
            &mut rng,
        );
        let batch = rng.normal_array2(4, 3);
        let (_, cache) = net.forward(&batch).unwrap();
        let (grads, gin) = net.backward(&cache, &Array2::zeros((4, 2)));
        assert!(grads.iter().all(|g| *g == 0.0));
        assert!(gin.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn eval_forward_is_pure() {
        let mut rng = Rng::new(8);
        let mut net = DenseNet::new(
            &[LayerSpec {
                in_dim: 3,
                out_dim: 3,
                activation: Activation::Sigmoid,
                batch_norm: true,
            }],
            0.9,
            &mut rng,
        );
        // Drift the running stats a little first.
        let batch = rng.normal_array2(8, 3);
        net.forward(&batch).unwrap();
        net.set_mode(Mode::Eval);
        let a = net.predict(&batch).unwrap();
        let b = net.predict(&batch).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bn_train_mode_needs_two_rows() {
        let mut rng = Rng::new(9);
        let mut net = DenseNet::new(
            &[LayerSpec {
                in_dim: 2,
                out_dim: 2,
                activation: Activation::Identity,
                batch_norm: true,
            }],
            0.9,
            &mut rng,
        );
        let err = net.forward(&Array2::zeros((1, 2))).unwrap_err();
        assert!(matches!(err, SubstrateError::BatchTooSmall { .. }));
    }
}
