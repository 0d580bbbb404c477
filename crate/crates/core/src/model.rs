//! Feed-forward multi-label classifier: ReLU hidden layers, sigmoid outputs.
//!
//! Parameters live in one flat vector so the optimizer and checkpoints can
//! treat them uniformly. Layer `l` stores its `out × in` weight matrix in
//! row-major order followed by its `out` biases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::losses::{self, LabelVector, LossBreakdown, LossConfig};
use crate::ontology::ConstraintSet;

/// Outputs are kept this far away from 0 and 1.
const OUTPUT_MARGIN: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(OUTPUT_MARGIN, 1.0 - OUTPUT_MARGIN)
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Post-activation outputs of every layer, input first.
#[derive(Debug, Clone)]
pub struct Activations {
    layers: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("at least the input layer")
    }
}

impl Mlp {
    /// `dims` = [input, hidden…, outputs].
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Invalid(format!("invalid layer dimensions {dims:?}")));
        }
        Ok(Mlp {
            dims: dims.to_vec(),
            params: vec![0.0; param_count(dims)],
        })
    }

    /// Uniform He initialization for ReLU layers and Glorot for the output
    /// layer; biases start at zero.
    pub fn random(dims: &[usize], seed: u64) -> Result<Self> {
        let mut model = Self::zeros(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = dims.len() - 2;
        let mut offset = 0;
        for (l, w) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = if l == last {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            for p in &mut model.params[offset..offset + fan_in * fan_out] {
                *p = rng.random_range(-bound..bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(model)
    }

    pub fn from_params(dims: &[usize], params: Vec<f64>) -> Result<Self> {
        let model = Self::zeros(dims)?;
        if params.len() != model.params.len() {
            return Err(Error::Dimension {
                context: "model parameters",
                expected: model.params.len(),
                actual: params.len(),
            });
        }
        Ok(Mlp {
            dims: dims.to_vec(),
            params,
        })
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

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// (weights, biases) of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let offset: usize = self.dims[..=l].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        let w = &self.params[offset..offset + i * o];
        let b = &self.params[offset + i * o..offset + i * o + o];
        (w, b)
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let offset: usize = self.dims[..=l].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        let (w, rest) = self.params[offset..].split_at_mut(i * o);
        (w, &mut rest[..o])
    }

    pub fn forward_cached(&self, features: &[f64]) -> Result<Activations> {
        if features.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "model input",
                expected: self.input_dim(),
                actual: features.len(),
            });
        }
        let n_layers = self.dims.len() - 1;
        let mut layers = Vec::with_capacity(n_layers + 1);
        layers.push(features.to_vec());
        for l in 0..n_layers {
            let (w, b) = self.layer(l);
            let input = &layers[l];
            let fan_in = input.len();
            let mut out: Vec<f64> = b.to_vec();
            for (o, row) in out.iter_mut().zip(w.chunks_exact(fan_in)) {
                *o += row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>();
            }
            if l + 1 == n_layers {
                out.iter_mut().for_each(|z| *z = sigmoid(*z));
            } else {
                out.iter_mut().for_each(|z| *z = z.max(0.0));
            }
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("activation in layer {l}")));
            }
            layers.push(out);
        }
        Ok(Activations { layers })
    }

    /// ŷ ∈ (0, 1)^outputs.
    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(features)?.layers.pop().unwrap())
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|x| self.forward(x)).collect()
    }

    /// Accumulates ∂L/∂θ into `grad` given ∂L/∂z for the output logits.
    pub fn backward(&self, acts: &Activations, output_logit_grad: &[f64], grad: &mut [f64]) {
        let n_layers = self.dims.len() - 1;
        let mut delta = output_logit_grad.to_vec();
        let mut offset_end = self.params.len();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let offset = offset_end - (fan_in * fan_out + fan_out);
            let input = &acts.layers[l];
            let (gw, gb) = grad[offset..offset_end].split_at_mut(fan_in * fan_out);
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                for (g, &x) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            if l > 0 {
                let w = &self.params[offset..offset + fan_in * fan_out];
                let mut prev = vec![0.0; fan_in];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (p, &wv) in prev.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                        *p += d * wv;
                    }
                }
                // ReLU derivative, 0 at the kink
                for (p, &a) in prev.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
            offset_end = offset;
        }
    }
}

/// ∂L/∂z for the output logits of one sample.
///
/// The cross-entropy part uses the closed form w·y·(ŷ−1) + (1−y)·ŷ, which
/// stays informative when the sigmoid saturates; constraint terms are
/// chained through ŷ(1−ŷ).
pub fn output_logit_grad(
    cfg: &LossConfig,
    cs: &ConstraintSet,
    y: &LabelVector,
    yhat: &[f64],
) -> Result<(LossBreakdown, Vec<f64>)> {
    let loss = losses::combined_loss(cfg, cs, y, yhat)?;
    let mut dy = vec![0.0; yhat.len()];
    losses::constraint_terms(cfg, cs, yhat, Some(&mut dy));
    let mut dz: Vec<f64> = dy
        .iter()
        .zip(yhat)
        .map(|(&g, &p)| g * p * (1.0 - p))
        .collect();
    if y.labelled {
        for (c, ((dzc, &label), &p)) in dz.iter_mut().zip(&y.values).zip(yhat).enumerate() {
            *dzc += if label {
                cfg.class_weight(c) * (p - 1.0)
            } else {
                p
            };
        }
    }
    Ok((loss, dz))
}

/// Per-sample combined loss and its gradient with respect to every
/// parameter of `model`.
pub fn sample_gradient(
    model: &Mlp,
    features: &[f64],
    y: &LabelVector,
    cs: &ConstraintSet,
    cfg: &LossConfig,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let mut grad = vec![0.0; model.params.len()];
    let loss = accumulate_gradient(model, features, y, cs, cfg, &mut grad)?;
    Ok((loss, grad))
}

pub(crate) fn accumulate_gradient(
    model: &Mlp,
    features: &[f64],
    y: &LabelVector,
    cs: &ConstraintSet,
    cfg: &LossConfig,
    grad: &mut [f64],
) -> Result<LossBreakdown> {
    if model.output_dim() != cs.universe_size() {
        return Err(Error::Dimension {
            context: "model outputs vs constraint universe",
            expected: cs.universe_size(),
            actual: model.output_dim(),
        });
    }
    let acts = model.forward_cached(features)?;
    let (loss, dz) = output_logit_grad(cfg, cs, y, acts.output())?;
    model.backward(&acts, &dz, grad);
    Ok(loss)
}
