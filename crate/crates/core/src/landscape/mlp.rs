//! Fully connected classifier whose mean cross-entropy loss is a [`ScalarField`].
//!
//! Parameters are flattened layer by layer: the weight matrix of each layer
//! in row-major `(out, in)` order, followed by its bias vector.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Dataset, ScalarField};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            // one exp instead of libm tanh; the absolute error stays within a few ulps
            Activation::Tanh => 1.0 - 2.0 / ((2.0 * z).exp() + 1.0),
        }
    }

    /// Derivative expressed through the activation output; ReLU uses 0 at the kink.
    #[inline]
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(invalid(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, activation: Activation) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(invalid("an MLP needs at least input and output widths"));
        }
        if layer_widths.contains(&0) {
            return Err(invalid("layer widths must be positive"));
        }
        Ok(Self { layer_widths, activation })
    }

    /// `Σ (w_i·w_{i+1} + w_{i+1})`
    pub fn param_count(&self) -> usize {
        self.layer_widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    /// Number of weight layers.
    pub fn depth(&self) -> usize {
        self.layer_widths.len() - 1
    }

    pub fn hidden_layers(&self) -> usize {
        self.layer_widths.len() - 2
    }
}

/// Mean softmax cross-entropy of an MLP over a dataset.
#[derive(Debug, Clone)]
pub struct MlpField {
    spec: MlpSpec,
    data: Arc<Dataset>,
    batch: Option<Vec<usize>>,
    /// (weight offset, bias offset) per layer
    offsets: Vec<(usize, usize)>,
}

/// Builds the loss field of `spec` on `data`. `batch`, when given, fixes the
/// sample indices the loss averages over; otherwise the full dataset is used.
pub fn make_mlp_field(spec: MlpSpec, data: Arc<Dataset>, batch: Option<Vec<usize>>) -> Result<MlpField> {
    if spec.input_width() != data.n_features() {
        return Err(invalid(format!(
            "input width {} does not match {} dataset features",
            spec.input_width(),
            data.n_features()
        )));
    }
    if spec.output_width() != data.n_classes() {
        return Err(invalid(format!(
            "output width {} does not match {} classes",
            spec.output_width(),
            data.n_classes()
        )));
    }
    if let Some(b) = &batch {
        if b.is_empty() || b.iter().any(|&i| i >= data.len()) {
            return Err(invalid("batch indices must be non-empty and within the dataset"));
        }
    }
    let mut offsets = Vec::with_capacity(spec.depth());
    let mut at = 0;
    for w in spec.layer_widths.windows(2) {
        offsets.push((at, at + w[0] * w[1]));
        at += w[0] * w[1] + w[1];
    }
    Ok(MlpField { spec, data, batch, offsets })
}

/// Per-evaluation buffers, reused across samples.
struct Scratch {
    /// activations of every layer back to back, the input first
    acts: Vec<f64>,
    delta: Vec<f64>,
    upstream: Vec<f64>,
}

impl MlpField {
    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    fn scratch(&self) -> Scratch {
        let widest = self.spec.layer_widths.iter().copied().max().unwrap_or(0);
        Scratch {
            acts: vec![0.0; self.spec.layer_widths.iter().sum()],
            delta: Vec::with_capacity(widest),
            upstream: Vec::with_capacity(widest),
        }
    }

    /// Fills `acts` and returns the offset of the logits within it.
    fn forward(&self, theta: &[f64], x: &[f64], acts: &mut [f64]) -> usize {
        let depth = self.spec.depth();
        acts[..x.len()].copy_from_slice(x);
        let mut at = 0;
        for (l, w) in self.spec.layer_widths.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let (wo, bo) = self.offsets[l];
            let (done, rest) = acts.split_at_mut(at + n_in);
            let input = &done[at..];
            let weights = &theta[wo..wo + n_in * n_out];
            for (o, (out, row)) in rest[..n_out].iter_mut().zip(weights.chunks_exact(n_in)).enumerate() {
                let z = theta[bo + o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                *out = if l + 1 == depth { z } else { self.spec.activation.apply(z) };
            }
            at += n_in;
        }
        at
    }

    fn accumulate(&self, theta: &[f64], sample: usize, scratch: &mut Scratch, grad: Option<&mut [f64]>) -> f64 {
        let (x, y) = self.data.sample(sample);
        let Scratch { acts, delta, upstream } = scratch;
        let out = self.forward(theta, x, acts);
        // cross-entropy of the logits and its gradient
        let logits = &acts[out..];
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        let loss = lse - logits[y];
        let Some(grad) = grad else {
            return loss;
        };
        delta.clear();
        delta.extend(logits.iter().enumerate().map(|(k, z)| (z - lse).exp() - if k == y { 1.0 } else { 0.0 }));

        let mut at = out;
        for l in (0..self.spec.depth()).rev() {
            let n_in = self.spec.layer_widths[l];
            at -= n_in;
            let (wo, bo) = self.offsets[l];
            let input = &acts[at..at + n_in];
            for (o, &d) in delta.iter().enumerate() {
                grad[bo + o] += d;
                let row = &mut grad[wo + o * n_in..wo + (o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if l == 0 {
                break;
            }
            upstream.clear();
            upstream.resize(n_in, 0.0);
            for (o, &d) in delta.iter().enumerate() {
                let row = &theta[wo + o * n_in..wo + (o + 1) * n_in];
                for (u, w) in upstream.iter_mut().zip(row) {
                    *u += d * w;
                }
            }
            for (u, &a) in upstream.iter_mut().zip(input) {
                *u *= self.spec.activation.derivative(a);
            }
            std::mem::swap(delta, upstream);
        }
        loss
    }

    fn indices<'a>(&'a self, batch: Option<&'a [usize]>) -> Box<dyn Iterator<Item = usize> + 'a> {
        match batch.or(self.batch.as_deref()) {
            Some(b) => Box::new(b.iter().copied()),
            None => Box::new(0..self.data.len()),
        }
    }

    fn batch_len(&self, batch: Option<&[usize]>) -> usize {
        batch.or(self.batch.as_deref()).map_or(self.data.len(), <[usize]>::len)
    }
}

impl ScalarField for MlpField {
    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn value(&self, theta: &[f64], batch: Option<&[usize]>) -> f64 {
        let n = self.batch_len(batch) as f64;
        let mut scratch = self.scratch();
        self.indices(batch).map(|i| self.accumulate(theta, i, &mut scratch, None)).sum::<f64>() / n
    }

    fn gradient(&self, theta: &[f64], batch: Option<&[usize]>) -> Vec<f64> {
        self.value_and_gradient(theta, batch).1
    }

    fn value_and_gradient(&self, theta: &[f64], batch: Option<&[usize]>) -> (f64, Vec<f64>) {
        assert_eq!(theta.len(), self.dim(), "parameter dimension");
        let mut grad = vec![0.0; theta.len()];
        let mut loss = 0.0;
        let mut scratch = self.scratch();
        for i in self.indices(batch) {
            loss += self.accumulate(theta, i, &mut scratch, Some(&mut grad));
        }
        let n = self.batch_len(batch) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    fn sample_count(&self) -> Option<usize> {
        Some(self.data.len())
    }

    fn describe(&self) -> String {
        let widths: Vec<String> = self.spec.layer_widths.iter().map(|w| w.to_string()).collect();
        format!("mlp[{}]/{:?}", widths.join(","), self.spec.activation).to_lowercase()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::two_moons;

    fn balanced() -> Arc<Dataset> {
        Arc::new(Dataset::new(vec![0.3, -1.0, 2.0, 0.5, -0.7, 0.1, 1.1, 1.9], 2, vec![0, 1, 0, 1], 2).unwrap())
    }

    #[test]
    fn parameter_count() {
        let spec = MlpSpec::new(vec![2, 3, 2], Activation::Relu).unwrap();
        assert_eq!(spec.param_count(), 17);
        let field = make_mlp_field(spec, balanced(), None).unwrap();
        assert_eq!(field.dim(), 17);
    }

    #[test]
    fn zero_weights_give_ln2() {
        let field = make_mlp_field(MlpSpec::new(vec![2, 4, 2], Activation::Tanh).unwrap(), balanced(), None).unwrap();
        let loss = field.value(&vec![0.0; field.dim()], None);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn full_loss_is_mean_of_sample_losses() {
        let data = balanced();
        let field = make_mlp_field(MlpSpec::new(vec![2, 3, 2], Activation::Relu).unwrap(), data.clone(), None).unwrap();
        let theta: Vec<f64> = (0..field.dim()).map(|k| ((k * 7 % 11) as f64 - 5.0) / 7.0).collect();
        let per_sample: Vec<f64> = (0..data.len()).map(|i| field.value(&theta, Some(&[i]))).collect();
        let mean = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
        assert!((field.value(&theta, None) - mean).abs() < 1e-14);
        assert!(per_sample.iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let spec = MlpSpec::new(vec![3, 2], Activation::Relu).unwrap();
        assert!(make_mlp_field(spec, balanced(), None).is_err());
        let spec = MlpSpec::new(vec![2, 3], Activation::Relu).unwrap();
        assert!(make_mlp_field(spec, balanced(), None).is_err());
        assert!(MlpSpec::new(vec![2], Activation::Relu).is_err());
    }

    #[test]
    fn fixed_batch_restricts_loss() {
        let data = balanced();
        let spec = MlpSpec::new(vec![2, 3, 2], Activation::Tanh).unwrap();
        let full = make_mlp_field(spec.clone(), data.clone(), None).unwrap();
        let sub = make_mlp_field(spec, data, Some(vec![1, 2])).unwrap();
        let theta: Vec<f64> = (0..full.dim()).map(|k| (k as f64).sin()).collect();
        assert_eq!(sub.value(&theta, None), full.value(&theta, Some(&[1, 2])));
    }

    #[test]
    fn gradient_matches_finite_differences_on_moons() {
        let data = Arc::new(two_moons(30, 0.1, 1).unwrap());
        let field = make_mlp_field(MlpSpec::new(vec![2, 5, 5, 2], Activation::Tanh).unwrap(), data, None).unwrap();
        let theta: Vec<f64> = (0..field.dim()).map(|k| 0.5 * ((k as f64) * 1.7).sin()).collect();
        let g = field.gradient(&theta, None);
        let h = 1e-5;
        for k in 0..field.dim() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[k] += h;
            tm[k] -= h;
            let fd = (field.value(&tp, None) - field.value(&tm, None)) / (2.0 * h);
            let scale = g[k].abs().max(fd.abs()).max(1e-6);
            assert!((g[k] - fd).abs() / scale < 1e-5, "coord {k}: {} vs {fd}", g[k]);
        }
    }
}
