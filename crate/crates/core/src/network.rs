//! Fully connected tanh network u(t, x) with a flat parameter vector.
//!
//! Inputs are affinely mapped to [-1, 1] before the first layer; the map is
//! part of the differentiated computation, so du/dt and du/dx come out in
//! physical units. Parameter layout per layer: weight block row-major
//! `[out][in]`, then the bias block. Input order is (t, x). Within a neuron,
//! accumulation order is fixed: w0*z0, then + wk*zk for k = 1.., then + bias.

use crate::autodiff::{Algebra, Dual2, DualAlg, InputVar, NodeId, Tape, TapeAlg, ValueAlg};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    /// Widths including input and output, e.g. [2, 20, ..., 20, 1].
    pub layer_widths: Vec<usize>,
    /// Lower input bounds, (t, x).
    pub input_lb: (f64, f64),
    /// Upper input bounds, (t, x).
    pub input_ub: (f64, f64),
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            layer_widths: vec![2, 20, 20, 20, 20, 20, 20, 20, 20, 1],
            input_lb: (0.0, -1.0),
            input_ub: (1.0, 1.0),
        }
    }
}

impl MlpConfig {
    pub fn with_widths(widths: &[usize]) -> Self {
        MlpConfig { layer_widths: widths.to_vec(), ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let w = &self.layer_widths;
        if w.len() < 2 || w.first() != Some(&2) || w.last() != Some(&1) || w.contains(&0) {
            return Err(NetworkError::BadConfig(format!(
                "layer widths must run from 2 to 1 with no zero layer, got {w:?}"
            )));
        }
        if self.input_lb.0 >= self.input_ub.0 || self.input_lb.1 >= self.input_ub.1 {
            return Err(NetworkError::BadConfig("input bounds must be ordered".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkError {
    BadConfig(String),
    /// params.len() does not match the config.
    ShapeMismatch { expected: usize, got: usize },
    /// A non-finite activation appeared; layer 0 is the first hidden layer.
    NonFinite { layer: usize },
}

impl fmt::Display for NetworkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkError::BadConfig(msg) => write!(f, "bad network config: {msg}"),
            NetworkError::ShapeMismatch { expected, got } => {
                write!(f, "parameter vector has {got} entries, config needs {expected}")
            }
            NetworkError::NonFinite { layer } => {
                write!(f, "non-finite activation in layer {layer}")
            }
        }
    }
}

impl std::error::Error for NetworkError {}

/// Flat trainable parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub values: Vec<f64>,
}

/// Total parameter count: sum over layers of in*out + out.
pub fn param_count(config: &MlpConfig) -> usize {
    config
        .layer_widths
        .windows(2)
        .map(|w| w[0] * w[1] + w[1])
        .sum()
}

/// Glorot-uniform init: weights ~ U(-limit, limit) with
/// limit = sqrt(6 / (fan_in + fan_out)), biases zero. Weights are drawn in
/// parameter-layout order from a ChaCha8 stream, so init is a pure function
/// of (config, seed).
pub fn init(config: &MlpConfig, seed: u64) -> Result<Params, NetworkError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x1717);
    let mut values = Vec::with_capacity(param_count(config));
    for w in config.layer_widths.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            values.push(rng.gen_range(-limit..=limit));
        }
        values.extend(std::iter::repeat(0.0).take(fan_out));
    }
    Ok(Params { values })
}

/// Map (t, x) onto [-1, 1]^2: z -> 2 (z - lb) / (ub - lb) - 1. Small
/// overshoot outside the bounds is tolerated (the map is affine). Uses the
/// same floating-point operation sequence as the in-graph scaling.
pub fn scale_inputs(t: f64, x: f64, config: &MlpConfig) -> (f64, f64) {
    (
        (t - config.input_lb.0) * (2.0 / (config.input_ub.0 - config.input_lb.0)) - 1.0,
        (x - config.input_lb.1) * (2.0 / (config.input_ub.1 - config.input_lb.1)) - 1.0,
    )
}

/// `lb_c` and `one` must already be lifted: on the tape backend every
/// constant has to exist before the first arithmetic node.
fn scale_one<A: Algebra>(
    alg: &mut A,
    z: A::Value,
    lb_c: A::Value,
    one: A::Value,
    factor: f64,
) -> A::Value {
    let shifted = alg.sub(z, lb_c);
    let stretched = alg.scale(shifted, factor);
    alg.sub(stretched, one)
}

/// The network body, written once for every backend. `check` enables the
/// per-layer finiteness scan on backends that can see values.
fn forward_in<A: Algebra>(
    alg: &mut A,
    params: &[f64],
    config: &MlpConfig,
    t: A::Value,
    x: A::Value,
) -> Result<A::Value, NetworkError> {
    config.validate()?;
    let expected = param_count(config);
    if params.len() != expected {
        return Err(NetworkError::ShapeMismatch { expected, got: params.len() });
    }
    alg.register_params(params);

    let lb_t = alg.constant(config.input_lb.0);
    let lb_x = alg.constant(config.input_lb.1);
    let one = alg.constant(1.0);
    let factor_t = 2.0 / (config.input_ub.0 - config.input_lb.0);
    let factor_x = 2.0 / (config.input_ub.1 - config.input_lb.1);
    let ts = scale_one(alg, t, lb_t, one, factor_t);
    let xs = scale_one(alg, x, lb_x, one, factor_x);
    let mut acts = vec![ts, xs];

    let n_layers = config.layer_widths.len() - 1;
    let mut base = 0usize;
    for layer in 0..n_layers {
        let fan_in = config.layer_widths[layer];
        let fan_out = config.layer_widths[layer + 1];
        let bias_base = base + fan_in * fan_out;
        let mut next = Vec::with_capacity(fan_out);
        for j in 0..fan_out {
            let row = base + j * fan_in;
            let w0 = alg.param(row, params[row]);
            let mut acc = alg.mul(w0, acts[0]);
            for k in 1..fan_in {
                let wk = alg.param(row + k, params[row + k]);
                let prod = alg.mul(wk, acts[k]);
                acc = alg.add(acc, prod);
            }
            let b = alg.param(bias_base + j, params[bias_base + j]);
            acc = alg.add(acc, b);
            if layer + 1 < n_layers {
                acc = alg.tanh(acc);
            }
            next.push(acc);
        }
        for &v in &next {
            if alg.finite(v) == Some(false) {
                return Err(NetworkError::NonFinite { layer });
            }
        }
        acts = next;
        base = bias_base + fan_out;
    }
    Ok(acts[0])
}

/// Plain f64 forward pass.
pub fn forward_value(params: &Params, config: &MlpConfig, t: f64, x: f64) -> Result<f64, NetworkError> {
    forward_in(&mut ValueAlg, &params.values, config, t, x)
}

/// Forward pass carrying du/dx, du/dt, d2u/dx2; no tape, no gradient.
pub fn forward_dual(params: &Params, config: &MlpConfig, t: f64, x: f64) -> Result<Dual2, NetworkError> {
    forward_in(&mut DualAlg, &params.values, config, Dual2::seed_t(t), Dual2::seed_x(x))
}

/// Record the forward pass on `tape` (inputs must already be lifted) and
/// return the output node. Parameters are registered on the tape in layout
/// order, so `tape.backward` gradients line up with `params.values`.
pub fn forward_on_tape(
    tape: &mut Tape,
    params: &Params,
    config: &MlpConfig,
    t: NodeId,
    x: NodeId,
) -> Result<NodeId, NetworkError> {
    let mut alg = TapeAlg { tape };
    forward_in(&mut alg, &params.values, config, t, x)
}

/// Record a fresh tape for (config, params): lifts t and x, runs the body,
/// returns tape and the (t, x, u) nodes.
pub fn record(
    params: &Params,
    config: &MlpConfig,
) -> Result<(Tape, NodeId, NodeId, NodeId), NetworkError> {
    let mut tape = Tape::new();
    let t = tape.lift_input(InputVar::T, 0.0).expect("fresh tape");
    let x = tape.lift_input(InputVar::X, 0.0).expect("fresh tape");
    let u = forward_on_tape(&mut tape, params, config, t, x)?;
    Ok((tape, t, x, u))
}
