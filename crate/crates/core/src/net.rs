//! Dense feed-forward networks with exact reverse-mode gradients and an
//! Adam optimizer.
//!
//! Everything is plain `f64` in flat buffers: a layer stores its weight
//! matrix row-major with shape `(out_dim, in_dim)`, and gradients come
//! back in the same layout. Initialization draws every weight from
//! `U(-1/sqrt(in_dim), 1/sqrt(in_dim))` with zero biases, seeded, so a
//! given seed always produces the same network.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;

use crate::math;
use crate::{DetRng, Error, Result};

/// Elementwise nonlinearity applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => math::tanh(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed in terms of the activation's *output* value.
    /// ReLU uses the zero subgradient at the kink.
    #[inline]
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// One affine layer: `output = activation(weights * input + bias)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `(out_dim, in_dim)`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    fn forward_into(&self, input: &[f64], output: &mut Vec<f64>) {
        output.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let z = math::dot(row, input) + self.bias[o];
            output.push(self.activation.apply(z));
        }
    }
}

/// A full network: layers applied in sequence.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkParams {
    pub layers: Vec<DenseLayer>,
}

/// Post-activation values of every layer for one forward pass, input
/// included. Feed it to [`NetworkParams::backprop_into`] to avoid
/// recomputing the forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `activations[0]` is the input, `activations[l + 1]` the output of
    /// layer `l`.
    pub activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace holds the input").as_slice()
    }
}

/// Per-layer weight and bias gradients plus the gradient with respect to
/// the network input. Shapes mirror the network they were built for.
#[derive(Debug, Clone)]
pub struct GradientBundle {
    pub weight_grads: Vec<Vec<f64>>,
    pub bias_grads: Vec<Vec<f64>>,
    pub input_grad: Vec<f64>,
}

impl GradientBundle {
    pub fn zeros_for(net: &NetworkParams) -> Self {
        GradientBundle {
            weight_grads: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias_grads: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
            input_grad: vec![0.0; net.input_dim()],
        }
    }

    pub fn is_finite(&self) -> bool {
        let finite = |v: &Vec<f64>| v.iter().all(|x| x.is_finite());
        self.weight_grads.iter().all(finite)
            && self.bias_grads.iter().all(finite)
            && self.input_grad.iter().all(|x| x.is_finite())
    }
}

/// Builds a seeded network. `layer_sizes` lists every dimension from
/// input to output, so `activations` must have one entry fewer.
pub fn init_network(
    layer_sizes: &[usize],
    activations: &[Activation],
    seed: u64,
) -> Result<NetworkParams> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config(format!(
            "need at least input and output sizes, got {} entries",
            layer_sizes.len()
        )));
    }
    if activations.len() != layer_sizes.len() - 1 {
        return Err(Error::Shape {
            context: "init_network activations",
            expected: layer_sizes.len() - 1,
            got: activations.len(),
        });
    }
    if let Some(&bad) = layer_sizes.iter().find(|&&d| d == 0) {
        return Err(Error::Config(format!("layer size must be positive, got {bad}")));
    }

    let mut rng = DetRng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(activations.len());
    for (l, &activation) in activations.iter().enumerate() {
        let in_dim = layer_sizes[l];
        let out_dim = layer_sizes[l + 1];
        let bound = 1.0 / math::sqrt(in_dim as f64);
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        layers.push(DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
            activation,
        });
    }
    Ok(NetworkParams { layers })
}

impl NetworkParams {
    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    /// Checks internal consistency: non-empty, chained dimensions, and
    /// buffer lengths matching the declared shapes.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("network has no layers".into()));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.weights.len() != layer.in_dim * layer.out_dim {
                return Err(Error::Shape {
                    context: "layer weight buffer",
                    expected: layer.in_dim * layer.out_dim,
                    got: layer.weights.len(),
                });
            }
            if layer.bias.len() != layer.out_dim {
                return Err(Error::Shape {
                    context: "layer bias buffer",
                    expected: layer.out_dim,
                    got: layer.bias.len(),
                });
            }
            if i > 0 && self.layers[i - 1].out_dim != layer.in_dim {
                return Err(Error::Shape {
                    context: "adjacent layer dimensions",
                    expected: self.layers[i - 1].out_dim,
                    got: layer.in_dim,
                });
            }
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward_into(&current, &mut next);
            core::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    /// Forward pass that keeps every layer's output for a later backward
    /// pass.
    pub fn trace(&self, input: &[f64]) -> Result<ForwardTrace> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for layer in &self.layers {
            let mut out = Vec::new();
            layer.forward_into(activations.last().unwrap(), &mut out);
            activations.push(out);
        }
        Ok(ForwardTrace { activations })
    }

    /// Exact reverse-mode gradients of `dot(upstream, output)` with
    /// respect to every weight, bias, and the input.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<GradientBundle> {
        let trace = self.trace(input)?;
        let mut grads = GradientBundle::zeros_for(self);
        self.backprop_into(&trace, upstream, &mut grads)?;
        Ok(grads)
    }

    /// Backward pass that *adds* gradients into `grads`, so one bundle
    /// can accumulate a whole batch.
    pub fn backprop_into(
        &self,
        trace: &ForwardTrace,
        upstream: &[f64],
        grads: &mut GradientBundle,
    ) -> Result<()> {
        if upstream.len() != self.output_dim() {
            return Err(Error::Shape {
                context: "backward upstream gradient",
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        let mut g = upstream.to_vec();
        let mut dz = Vec::new();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let out_act = &trace.activations[l + 1];
            dz.clear();
            dz.extend(
                g.iter()
                    .zip(out_act)
                    .map(|(gi, &yi)| gi * layer.activation.grad_from_output(yi)),
            );

            let prev_act = &trace.activations[l];
            let w_grad = &mut grads.weight_grads[l];
            for o in 0..layer.out_dim {
                math::axpy(dz[o], prev_act, &mut w_grad[o * layer.in_dim..(o + 1) * layer.in_dim]);
                grads.bias_grads[l][o] += dz[o];
            }

            g.clear();
            g.resize(layer.in_dim, 0.0);
            for o in 0..layer.out_dim {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                math::axpy(dz[o], row, &mut g);
            }
        }
        math::axpy(1.0, &g, &mut grads.input_grad);
        Ok(())
    }

    /// Gradient with respect to the input only; cheaper than a full
    /// backward pass when the parameter gradients are not needed.
    pub fn backward_input(&self, trace: &ForwardTrace, upstream: &[f64]) -> Result<Vec<f64>> {
        if upstream.len() != self.output_dim() {
            return Err(Error::Shape {
                context: "backward upstream gradient",
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        let mut g = upstream.to_vec();
        let mut dz = Vec::new();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let out_act = &trace.activations[l + 1];
            dz.clear();
            dz.extend(
                g.iter()
                    .zip(out_act)
                    .map(|(gi, &yi)| gi * layer.activation.grad_from_output(yi)),
            );
            g.clear();
            g.resize(layer.in_dim, 0.0);
            for o in 0..layer.out_dim {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                math::axpy(dz[o], row, &mut g);
            }
        }
        Ok(g)
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape {
                context: "network input",
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        Ok(())
    }
}

/// Adam optimizer state: per-parameter first and second moment estimates
/// plus the step counter used for bias correction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    pub m_weights: Vec<Vec<f64>>,
    pub v_weights: Vec<Vec<f64>>,
    pub m_biases: Vec<Vec<f64>>,
    pub v_biases: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(net: &NetworkParams, lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m_weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            v_weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            m_biases: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
            v_biases: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }
}

/// One bias-corrected Adam update. The step is rejected without touching
/// the network or the optimizer state if any gradient is non-finite or
/// any shape disagrees.
pub fn adam_step(
    net: &mut NetworkParams,
    grads: &GradientBundle,
    opt: &mut AdamState,
) -> Result<()> {
    if grads.weight_grads.len() != net.layers.len() || grads.bias_grads.len() != net.layers.len() {
        return Err(Error::Shape {
            context: "gradient bundle layer count",
            expected: net.layers.len(),
            got: grads.weight_grads.len(),
        });
    }
    if opt.m_weights.len() != net.layers.len() {
        return Err(Error::Shape {
            context: "optimizer state layer count",
            expected: net.layers.len(),
            got: opt.m_weights.len(),
        });
    }
    for (l, layer) in net.layers.iter().enumerate() {
        if grads.weight_grads[l].len() != layer.weights.len()
            || grads.bias_grads[l].len() != layer.bias.len()
            || opt.m_weights[l].len() != layer.weights.len()
            || opt.m_biases[l].len() != layer.bias.len()
        {
            return Err(Error::Shape {
                context: "gradient or moment buffer",
                expected: layer.weights.len(),
                got: grads.weight_grads[l].len(),
            });
        }
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient bundle"));
    }

    opt.t += 1;
    let bc1 = 1.0 - libm::pow(opt.beta1, opt.t as f64);
    let bc2 = 1.0 - libm::pow(opt.beta2, opt.t as f64);
    for l in 0..net.layers.len() {
        adam_update_slice(
            &mut net.layers[l].weights,
            &grads.weight_grads[l],
            &mut opt.m_weights[l],
            &mut opt.v_weights[l],
            opt.lr,
            opt.beta1,
            opt.beta2,
            opt.epsilon,
            bc1,
            bc2,
        );
        adam_update_slice(
            &mut net.layers[l].bias,
            &grads.bias_grads[l],
            &mut opt.m_biases[l],
            &mut opt.v_biases[l],
            opt.lr,
            opt.beta1,
            opt.beta2,
            opt.epsilon,
            bc1,
            bc2,
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn adam_update_slice(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (math::sqrt(v_hat) + epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol,
            "expected {expected}, got {actual} (tol {tol})"
        );
    }

    #[test]
    fn init_is_seed_deterministic() {
        let sizes = [28, 64, 64, 64, 4];
        let acts = [Activation::Relu, Activation::Relu, Activation::Relu, Activation::Tanh];
        let a = init_network(&sizes, &acts, 7).unwrap();
        let b = init_network(&sizes, &acts, 7).unwrap();
        let c = init_network(&sizes, &acts, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        a.validate().unwrap();
    }

    #[test]
    fn init_bounds_and_zero_bias() {
        let net = init_network(
            &[28, 64, 4],
            &[Activation::Relu, Activation::Tanh],
            3,
        )
        .unwrap();
        let bound = 1.0 / 28f64.sqrt();
        assert_close(bound, 0.1889822365046136, 1e-16);
        for w in &net.layers[0].weights {
            assert!(w.abs() < bound);
        }
        // The draw actually uses the range, not a degenerate corner.
        assert!(net.layers[0].weights.iter().any(|w| w.abs() > bound * 0.5));
        for layer in &net.layers {
            assert!(layer.bias.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn init_rejects_bad_shapes() {
        assert!(matches!(
            init_network(&[5], &[], 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            init_network(&[5, 3], &[], 0),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(
            init_network(&[5, 0, 2], &[Activation::Relu, Activation::Relu], 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn forward_identity_layer_passes_input_through() {
        let net = NetworkParams {
            layers: vec![DenseLayer {
                in_dim: 3,
                out_dim: 3,
                weights: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                bias: vec![0.0; 3],
                activation: Activation::Identity,
            }],
        };
        let out = net.forward(&[0.1, -0.7, 2.5]).unwrap();
        assert_eq!(out, vec![0.1, -0.7, 2.5]);
    }

    #[test]
    fn forward_tanh_saturation_value() {
        let net = NetworkParams {
            layers: vec![DenseLayer {
                in_dim: 1,
                out_dim: 1,
                weights: vec![2.0],
                bias: vec![0.0],
                activation: Activation::Tanh,
            }],
        };
        let out = net.forward(&[1.0]).unwrap();
        assert_close(out[0], 0.9640275800758169, 1e-12);
    }

    #[test]
    fn forward_rejects_wrong_input_dim() {
        let net = init_network(&[4, 2], &[Activation::Identity], 0).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn backward_matches_hand_derived_two_layer_case() {
        let net = NetworkParams {
            layers: vec![
                DenseLayer {
                    in_dim: 2,
                    out_dim: 2,
                    weights: vec![1.0, -1.0, 0.5, 0.5],
                    bias: vec![0.0, -0.1],
                    activation: Activation::Relu,
                },
                DenseLayer {
                    in_dim: 2,
                    out_dim: 1,
                    weights: vec![2.0, 3.0],
                    bias: vec![0.5],
                    activation: Activation::Identity,
                },
            ],
        };
        let input = [0.3, -0.2];
        let out = net.forward(&input).unwrap();
        assert_close(out[0], 1.5, 1e-15);

        let grads = net.backward(&input, &[1.0]).unwrap();
        assert_eq!(grads.weight_grads[1], vec![0.5, 0.0]);
        assert_eq!(grads.bias_grads[1], vec![1.0]);
        assert_eq!(grads.weight_grads[0], vec![0.6, -0.4, 0.0, 0.0]);
        assert_eq!(grads.bias_grads[0], vec![2.0, 0.0]);
        assert_eq!(grads.input_grad, vec![2.0, -2.0]);
    }

    #[test]
    fn backward_input_agrees_with_full_backward() {
        let net = init_network(
            &[6, 8, 3],
            &[Activation::Tanh, Activation::Identity],
            11,
        )
        .unwrap();
        let input = [0.3, -0.4, 0.9, -1.2, 0.05, 0.6];
        let upstream = [0.7, -0.2, 1.1];
        let full = net.backward(&input, &upstream).unwrap();
        let trace = net.trace(&input).unwrap();
        let only = net.backward_input(&trace, &upstream).unwrap();
        for (a, b) in full.input_grad.iter().zip(&only) {
            assert_close(*a, *b, 1e-15);
        }
    }

    #[test]
    fn adam_zero_gradient_is_a_fixed_point() {
        let mut net = init_network(&[3, 4, 2], &[Activation::Relu, Activation::Tanh], 5).unwrap();
        let before = net.clone();
        let grads = GradientBundle::zeros_for(&net);
        let mut opt = AdamState::new(&net, 0.001);
        adam_step(&mut net, &grads, &mut opt).unwrap();
        assert_eq!(net, before);
        assert_eq!(opt.t, 1);
    }

    #[test]
    fn adam_first_step_has_learning_rate_magnitude() {
        let mut net = NetworkParams {
            layers: vec![DenseLayer {
                in_dim: 1,
                out_dim: 1,
                weights: vec![1.0],
                bias: vec![0.0],
                activation: Activation::Identity,
            }],
        };
        let mut grads = GradientBundle::zeros_for(&net);
        grads.weight_grads[0][0] = 1.0;
        let mut opt = AdamState::new(&net, 0.001);
        adam_step(&mut net, &grads, &mut opt).unwrap();
        // First step moves by lr / (1 + epsilon), i.e. lr up to 1e-11.
        assert_close(net.layers[0].weights[0], 1.0 - 0.001, 1e-9);
    }

    #[test]
    fn adam_rejects_non_finite_gradients_untouched() {
        let mut net = init_network(&[2, 2], &[Activation::Identity], 1).unwrap();
        let before = net.clone();
        let mut grads = GradientBundle::zeros_for(&net);
        grads.weight_grads[0][1] = f64::NAN;
        let mut opt = AdamState::new(&net, 0.001);
        let opt_before = opt.clone();
        let err = adam_step(&mut net, &grads, &mut opt).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(net, before);
        assert_eq!(opt, opt_before);
    }

    #[test]
    fn adam_rejects_mismatched_shapes() {
        let mut net = init_network(&[2, 2], &[Activation::Identity], 1).unwrap();
        let other = init_network(&[3, 3], &[Activation::Identity], 1).unwrap();
        let grads = GradientBundle::zeros_for(&other);
        let mut opt = AdamState::new(&net, 0.001);
        assert!(matches!(
            adam_step(&mut net, &grads, &mut opt),
            Err(Error::Shape { .. })
        ));
    }
}
