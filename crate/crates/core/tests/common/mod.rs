//! Shared oracles for the integration tests.

#![allow(dead_code)]

pub mod dd;

use lossbar::landscape::{Activation, Dataset, MlpSpec};

use dd::Dd;

/// Mean cross-entropy of an MLP evaluated in double-double arithmetic,
/// with coordinate `k` of `theta` shifted by `shift`. Written against the
/// parameter layout only (per layer: row-major weights, then biases).
pub fn mlp_loss_dd(spec: &MlpSpec, data: &Dataset, theta: &[f64], k: usize, shift: f64) -> Dd {
    let param = |i: usize| if i == k { Dd::from(theta[i]) + Dd::from(shift) } else { Dd::from(theta[i]) };
    let widths = &spec.layer_widths;
    let mut total = Dd::ZERO;
    for s in 0..data.len() {
        let (x, label) = data.sample(s);
        let mut act: Vec<Dd> = x.iter().map(|&v| Dd::from(v)).collect();
        let mut offset = 0;
        for (l, w) in widths.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let bias = offset + n_in * n_out;
            let mut next = Vec::with_capacity(n_out);
            for o in 0..n_out {
                let mut z = param(bias + o);
                for i in 0..n_in {
                    z = z + param(offset + o * n_in + i) * act[i];
                }
                next.push(z);
            }
            offset = bias + n_out;
            let last = l + 2 == widths.len();
            act = if last {
                next
            } else {
                next.into_iter()
                    .map(|z| match spec.activation {
                        Activation::Tanh => z.tanh(),
                        Activation::Relu => {
                            if z.hi > 0.0 {
                                z
                            } else {
                                Dd::ZERO
                            }
                        }
                    })
                    .collect()
            };
        }
        let m = act.iter().fold(f64::NEG_INFINITY, |a, z| a.max(z.hi));
        let sum = act.iter().fold(Dd::ZERO, |acc, &z| acc + (z - Dd::from(m)).exp());
        total = total + (Dd::from(m) + sum.ln() - act[label]);
    }
    total / Dd::from(data.len() as f64)
}

/// Central difference of [`mlp_loss_dd`] along coordinate `k`.
pub fn mlp_central_difference(spec: &MlpSpec, data: &Dataset, theta: &[f64], k: usize, h: f64) -> f64 {
    let up = mlp_loss_dd(spec, data, theta, k, h);
    let down = mlp_loss_dd(spec, data, theta, k, -h);
    // the perturbed coordinates are theta[k] ± fl(h) exactly
    ((up - down) / Dd::from(2.0 * h)).hi
}

/// Relative error with the denominator floored at 1e-6.
pub fn relative_error(analytic: f64, reference: f64) -> f64 {
    (analytic - reference).abs() / analytic.abs().max(reference.abs()).max(1e-6)
}
