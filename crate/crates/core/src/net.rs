//! Dense feed-forward networks with `tanh` hidden layers and a linear output.
//!
//! Parameters live in one flat vector in canonical order: layer by layer,
//! the weight matrix row-major (`out × in`) followed by the bias vector.
//! The optimizer works on that vector directly.

use ndarray::ArrayView2;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::Real;

/// Name of the generator behind [`xavier_init`], recorded in run metadata.
pub const RNG_NAME: &str = "ChaCha8Rng";

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("layer dimensions must be non-empty and every entry at least 1, got {0:?}")]
    BadDims(Vec<usize>),
    #[error("expected {expected} inputs, got {got}")]
    InputDim { expected: usize, got: usize },
    #[error("parameter vector has length {got}, network needs {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    dims: Vec<usize>,
    params: Vec<f64>,
}

/// Number of parameters of a network with the given layer sizes.
pub fn parameter_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

fn check_dims(dims: &[usize]) -> Result<(), NetError> {
    if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
        return Err(NetError::BadDims(dims.to_vec()));
    }
    Ok(())
}

/// `[input, hidden..., output]`.
pub fn layer_dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut d = Vec::with_capacity(hidden.len() + 2);
    d.push(input);
    d.extend_from_slice(hidden);
    d.push(output);
    d
}

/// Glorot-uniform weights and zero biases, drawn from stream 0 of a
/// ChaCha8 generator seeded with `seed`.
pub fn xavier_init(dims: &[usize], seed: u64) -> Result<DenseNetwork, NetError> {
    xavier_init_stream(dims, seed, 0)
}

/// Like [`xavier_init`] on an explicit generator stream, so several networks
/// can be initialized independently from one seed.
pub fn xavier_init_stream(dims: &[usize], seed: u64, stream: u64) -> Result<DenseNetwork, NetError> {
    check_dims(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut params = Vec::with_capacity(parameter_count(dims));
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new(-limit, limit);
        params.extend((0..fan_in * fan_out).map(|_| dist.sample(&mut rng)));
        params.extend(std::iter::repeat(0.0).take(fan_out));
    }
    Ok(DenseNetwork {
        dims: dims.to_vec(),
        params,
    })
}

impl DenseNetwork {
    pub fn zeros(dims: &[usize]) -> Result<Self, NetError> {
        check_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            params: vec![0.0; parameter_count(dims)],
        })
    }

    /// Rebuilds a network from a flat parameter vector.
    pub fn unflatten(dims: &[usize], params: Vec<f64>) -> Result<Self, NetError> {
        check_dims(dims)?;
        let expected = parameter_count(dims);
        if params.len() != expected {
            return Err(NetError::ParamLength {
                expected,
                got: params.len(),
            });
        }
        Ok(Self {
            dims: dims.to_vec(),
            params,
        })
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.params.clone()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Offset of layer `l`'s weights in the flat vector.
    pub fn layer_offset(&self, l: usize) -> usize {
        parameter_count(&self.dims[..=l])
    }

    pub fn weight(&self, l: usize) -> ArrayView2<'_, f64> {
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        let off = self.layer_offset(l);
        ArrayView2::from_shape((o, i), &self.params[off..off + o * i]).unwrap()
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        let off = self.layer_offset(l) + o * i;
        &self.params[off..off + o]
    }

    /// Evaluates the network on any [`Real`] input with the stored `f64`
    /// weights.
    pub fn forward<R: Real>(&self, x: &[R]) -> Result<Vec<R>, NetError> {
        if x.len() != self.input_dim() {
            return Err(NetError::InputDim {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut h: Vec<R> = x.to_vec();
        let last = self.num_layers() - 1;
        for l in 0..=last {
            let w = self.weight(l);
            let b = self.bias(l);
            let mut next = Vec::with_capacity(b.len());
            for (row, &bias) in w.rows().into_iter().zip(b) {
                let mut acc = h[0] * row[0];
                for k in 1..h.len() {
                    acc = acc + h[k] * row[k];
                }
                acc = acc + bias;
                next.push(if l < last { acc.tanh() } else { acc });
            }
            h = next;
        }
        Ok(h)
    }

    /// Evaluates the network with parameters supplied as [`Real`]s (e.g. tape
    /// variables, to differentiate with respect to them).
    pub fn forward_with<R: Real>(&self, params: &[R], x: &[R]) -> Result<Vec<R>, NetError> {
        forward_with(&self.dims, params, x)
    }
}

/// Forward pass of a network described by `dims` and a flat parameter slice.
pub fn forward_with<R: Real>(dims: &[usize], params: &[R], x: &[R]) -> Result<Vec<R>, NetError> {
    check_dims(dims)?;
    if params.len() != parameter_count(dims) {
        return Err(NetError::ParamLength {
            expected: parameter_count(dims),
            got: params.len(),
        });
    }
    if x.len() != dims[0] {
        return Err(NetError::InputDim {
            expected: dims[0],
            got: x.len(),
        });
    }
    let mut h: Vec<R> = x.to_vec();
    let mut off = 0;
    let last = dims.len() - 2;
    for l in 0..=last {
        let (ni, no) = (dims[l], dims[l + 1]);
        let w = &params[off..off + ni * no];
        let b = &params[off + ni * no..off + ni * no + no];
        off += ni * no + no;
        let mut next = Vec::with_capacity(no);
        for r in 0..no {
            let mut acc = h[0] * w[r * ni];
            for k in 1..ni {
                acc = acc + h[k] * w[r * ni + k];
            }
            acc = acc + b[r];
            next.push(if l < last { acc.tanh() } else { acc });
        }
        h = next;
    }
    Ok(h)
}

/// On-disk form of a network. Parameters are decimal strings that parse
/// back to the identical `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub layer_dims: Vec<usize>,
    pub flat_params: Vec<String>,
    pub seed: u64,
    pub activation: String,
}

impl Checkpoint {
    pub fn from_network(net: &DenseNetwork, seed: u64) -> Self {
        Self {
            layer_dims: net.dims.clone(),
            flat_params: net.params.iter().map(|p| format!("{p:?}")).collect(),
            seed,
            activation: "tanh".into(),
        }
    }

    pub fn to_network(&self) -> Result<DenseNetwork, NetError> {
        if self.activation != "tanh" {
            return Err(NetError::Checkpoint(format!(
                "unsupported activation `{}`",
                self.activation
            )));
        }
        let params = self
            .flat_params
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| NetError::Checkpoint(format!("bad parameter `{s}`: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        DenseNetwork::unflatten(&self.layer_dims, params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, NetError> {
        serde_json::from_str(s).map_err(|e| NetError::Checkpoint(e.to_string()))
    }
}
