//! Minimal feed-forward autoencoder with exact reverse-mode gradients.
//!
//! The network is a fixed MLP topology: an encoder stack maps input features
//! to a latent vector and a decoder stack maps the latent back to feature
//! space. Both stacks expose their outputs as embeddings — the encoder
//! embedding is the latent vector, the decoder embedding is the
//! reconstruction — and every loss in this crate differentiates through both.
//!
//! Gradients flow by recording a [`ForwardTrace`] per sample and pushing
//! upstream embedding gradients back through [`Autoencoder::backward`] into a
//! [`GradientTape`] shaped like the model.

pub mod checkpoint;
pub mod optim;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element-wise activation applied after a layer's affine transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    #[inline]
    fn grad(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Network dimensions. The encoder runs `input_dim -> hidden_dims... ->
/// latent_dim`, the decoder mirrors it back to `input_dim`. Hidden layers use
/// ReLU, the latent and output layers are linear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub latent_dim: usize,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, latent_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dims,
            latent_dim,
        }
    }

    /// Default topology: `d -> 128 -> 32 -> 128 -> d`.
    pub fn with_defaults(input_dim: usize) -> Self {
        Self::new(input_dim, vec![128], 32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.latent_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::InvalidConfig(
                "architecture dimensions must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Dense layer; weights are row-major with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    fn seeded<R: Rng>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        // Uniform in [-sqrt(1/fan_in), +sqrt(1/fan_in)].
        let limit = (1.0 / in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    #[inline]
    fn forward_into(&self, input: &[f64], z: &mut Vec<f64>, out: &mut Vec<f64>) {
        z.clear();
        out.clear();
        for o in 0..self.out_dim {
            let row = o * self.in_dim;
            let mut acc = self.bias[o];
            for (i, &x) in input.iter().enumerate() {
                acc += self.weights[row + i] * x;
            }
            z.push(acc);
            out.push(self.activation.apply(acc));
        }
    }

    /// Backpropagates `d_out` through this layer, accumulating parameter
    /// gradients into `d_weights`/`d_bias` and returning the input gradient.
    fn backward_into(
        &self,
        input: &[f64],
        z: &[f64],
        d_out: &[f64],
        d_weights: &mut [f64],
        d_bias: &mut [f64],
    ) -> Vec<f64> {
        let mut d_input = vec![0.0; self.in_dim];
        for o in 0..self.out_dim {
            let dz = d_out[o] * self.activation.grad(z[o]);
            if dz == 0.0 {
                continue;
            }
            d_bias[o] += dz;
            let row = o * self.in_dim;
            for i in 0..self.in_dim {
                d_weights[row + i] += dz * input[i];
                d_input[i] += self.weights[row + i] * dz;
            }
        }
        d_input
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Encoder and decoder representations of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPair {
    /// Latent vector produced by the encoder.
    pub encoder: Vec<f64>,
    /// Reconstruction produced by the decoder.
    pub decoder: Vec<f64>,
}

/// Per-layer inputs and pre-activations recorded during a cached forward
/// pass; consumed by [`Autoencoder::backward`]. Layers are indexed encoder
/// first, then decoder.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    inputs: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

/// Per-parameter gradient buffers mirroring the model layout.
#[derive(Debug, Clone)]
pub struct GradientTape {
    encoder_layers: usize,
    d_weights: Vec<Vec<f64>>,
    d_bias: Vec<Vec<f64>>,
}

impl GradientTape {
    pub fn zeros_like(model: &Autoencoder) -> Self {
        let layers: Vec<&Layer> = model.layers().collect();
        Self {
            encoder_layers: model.encoder.len(),
            d_weights: layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            d_bias: layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    /// Clears all gradient buffers; call between optimizer steps.
    pub fn zero(&mut self) {
        for w in &mut self.d_weights {
            w.fill(0.0);
        }
        for b in &mut self.d_bias {
            b.fill(0.0);
        }
    }

    /// Gradient values in canonical parameter order (encoder layers then
    /// decoder layers; per layer weights row-major then bias).
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.d_weights
            .iter()
            .zip(&self.d_bias)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }

    /// Path of the first non-finite gradient, if any, for diagnostics.
    pub fn find_non_finite(&self) -> Option<String> {
        for (layer, (w, b)) in self.d_weights.iter().zip(&self.d_bias).enumerate() {
            let section = if layer < self.encoder_layers {
                format!("encoder[{layer}]")
            } else {
                format!("decoder[{}]", layer - self.encoder_layers)
            };
            if let Some(i) = w.iter().position(|v| !v.is_finite()) {
                return Some(format!("{section}.weights[{i}]"));
            }
            if let Some(i) = b.iter().position(|v| !v.is_finite()) {
                return Some(format!("{section}.bias[{i}]"));
            }
        }
        None
    }
}

/// Feed-forward autoencoder; the differentiable embedding function used by
/// every other module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    architecture: Architecture,
    encoder: Vec<Layer>,
    decoder: Vec<Layer>,
}

impl Autoencoder {
    /// Builds a seeded model. Hidden layers use ReLU; the latent and output
    /// layers are linear.
    pub fn seeded(architecture: Architecture, seed: u64) -> Result<Self> {
        architecture.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut encoder = Vec::new();
        let mut prev = architecture.input_dim;
        for &h in &architecture.hidden_dims {
            encoder.push(Layer::seeded(prev, h, Activation::Relu, &mut rng));
            prev = h;
        }
        encoder.push(Layer::seeded(
            prev,
            architecture.latent_dim,
            Activation::Linear,
            &mut rng,
        ));

        let mut decoder = Vec::new();
        prev = architecture.latent_dim;
        for &h in architecture.hidden_dims.iter().rev() {
            decoder.push(Layer::seeded(prev, h, Activation::Relu, &mut rng));
            prev = h;
        }
        decoder.push(Layer::seeded(
            prev,
            architecture.input_dim,
            Activation::Linear,
            &mut rng,
        ));

        Ok(Self {
            architecture,
            encoder,
            decoder,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn input_dim(&self) -> usize {
        self.architecture.input_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.architecture.latent_dim
    }

    fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.encoder.iter().chain(self.decoder.iter())
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(Layer::param_count).sum()
    }

    /// Parameters in canonical order; matches [`GradientTape::values`].
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.encoder
            .iter()
            .chain(self.decoder.iter())
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    /// Mutable parameters in canonical order.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn validate_finite(&self) -> Result<()> {
        if self.params().all(|p| p.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite {
                context: "model parameters".into(),
            })
        }
    }

    /// Deterministic forward pass producing both embeddings.
    pub fn forward(&self, features: &[f64]) -> Result<EmbeddingPair> {
        self.forward_traced(features).map(|(pair, _)| pair)
    }

    /// Forward pass that also records the trace needed by [`backward`].
    ///
    /// [`backward`]: Autoencoder::forward_traced
    pub fn forward_traced(&self, features: &[f64]) -> Result<(EmbeddingPair, ForwardTrace)> {
        if features.len() != self.architecture.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.architecture.input_dim,
                actual: features.len(),
            });
        }

        let n_layers = self.encoder.len() + self.decoder.len();
        let mut trace = ForwardTrace {
            inputs: Vec::with_capacity(n_layers),
            pre_activations: Vec::with_capacity(n_layers),
        };

        let mut current = features.to_vec();
        let mut encoder_out = Vec::new();
        for (k, layer) in self.layers().enumerate() {
            let mut z = Vec::new();
            let mut out = Vec::new();
            layer.forward_into(&current, &mut z, &mut out);
            trace.inputs.push(current);
            trace.pre_activations.push(z);
            current = out;
            if k + 1 == self.encoder.len() {
                encoder_out = current.clone();
            }
        }

        Ok((
            EmbeddingPair {
                encoder: encoder_out,
                decoder: current,
            },
            trace,
        ))
    }

    /// Accumulates parameter gradients for one sample given the upstream
    /// gradients with respect to its encoder and decoder embeddings.
    ///
    /// The decoder-embedding gradient flows back through the decoder into the
    /// latent, where the encoder-embedding gradient joins it before
    /// continuing through the encoder.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        d_encoder: &[f64],
        d_decoder: &[f64],
        tape: &mut GradientTape,
    ) {
        assert_eq!(d_encoder.len(), self.architecture.latent_dim);
        assert_eq!(d_decoder.len(), self.architecture.input_dim);

        let n_enc = self.encoder.len();
        let mut delta = d_decoder.to_vec();
        for (k, layer) in self.decoder.iter().enumerate().rev() {
            let idx = n_enc + k;
            delta = layer.backward_into(
                &trace.inputs[idx],
                &trace.pre_activations[idx],
                &delta,
                &mut tape.d_weights[idx],
                &mut tape.d_bias[idx],
            );
        }
        for (d, s) in delta.iter_mut().zip(d_encoder) {
            *d += s;
        }
        for (k, layer) in self.encoder.iter().enumerate().rev() {
            delta = layer.backward_into(
                &trace.inputs[k],
                &trace.pre_activations[k],
                &delta,
                &mut tape.d_weights[k],
                &mut tape.d_bias[k],
            );
        }
    }
}

/// Cosine similarity of two vectors, in [-1, 1].
///
/// Zero-norm inputs are rejected; callers decide the skip policy.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    let (h, _, _) = cosine_raw(a, b)?;
    Ok(h.clamp(-1.0, 1.0))
}

#[inline]
fn cosine_raw(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let mut dot = 0.0;
    let mut na2 = 0.0;
    let mut nb2 = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na2 += x * x;
        nb2 += y * y;
    }
    if na2 == 0.0 || nb2 == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let na = na2.sqrt();
    let nb = nb2.sqrt();
    Ok((dot / (na * nb), na, nb))
}

/// Cosine similarity together with its gradients with respect to both
/// inputs. Used by the differentiable losses; the similarity here is left
/// unclamped so values and gradients stay consistent.
pub(crate) fn cosine_with_grad(a: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let (h, na, nb) = cosine_raw(a, b)?;
    let inv = 1.0 / (na * nb);
    let grad_a: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| y * inv - h * x / (na * na))
        .collect();
    let grad_b: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| x * inv - h * y / (nb * nb))
        .collect();
    Ok((h, grad_a, grad_b))
}
