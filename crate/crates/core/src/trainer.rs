//! Local minimum search: gradient descent with heavy-ball momentum under a
//! piecewise-linear learning-rate schedule.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::landscape::{ParamVector, ScalarField};
use crate::linalg;

/// Learning rate held at `lr_max` for the first `m1` epochs, annealed
/// linearly to `lr_min` by epoch `m2`, then held. An epoch is
/// `batches_per_epoch` gradient steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerSpec {
    pub m1: f64,
    pub m2: f64,
    pub lr_max: f64,
    pub lr_min: f64,
    pub batches_per_epoch: usize,
}

impl SchedulerSpec {
    pub fn new(m1: f64, m2: f64, lr_max: f64, lr_min: f64, batches_per_epoch: usize) -> Result<Self> {
        let spec = Self { m1, m2, lr_max, lr_min, batches_per_epoch };
        spec.validate()?;
        Ok(spec)
    }

    /// Fixed learning rate `lr` for the whole run.
    pub fn constant(lr: f64) -> Self {
        Self { m1: 0.0, m2: 0.0, lr_max: 0.0, lr_min: lr, batches_per_epoch: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.m1, self.m2, self.lr_max, self.lr_min].iter().all(|v| v.is_finite());
        if !finite || self.m1 < 0.0 || self.m2 < self.m1 || self.lr_max < 0.0 || self.lr_min <= 0.0 {
            return Err(invalid(format!(
                "scheduler needs 0 <= m1 <= m2, lr_max >= 0, lr_min > 0 (got {self:?})"
            )));
        }
        if self.batches_per_epoch == 0 {
            return Err(invalid("batches_per_epoch must be positive"));
        }
        Ok(())
    }
}

/// Learning rate for the `batch_index`-th gradient step.
///
/// When `m1 == m2` the annealing interval is empty and the shared breakpoint
/// already takes `lr_min`, so `S(0, 0, 0, lr)` is the constant `lr`.
pub fn schedule_lr(spec: &SchedulerSpec, batch_index: u64) -> f64 {
    let per_epoch = spec.batches_per_epoch as f64;
    let b = batch_index as f64;
    let start = per_epoch * spec.m1;
    let end = per_epoch * spec.m2;
    if spec.m1 == spec.m2 {
        return if b < start { spec.lr_max } else { spec.lr_min };
    }
    if b <= start {
        spec.lr_max
    } else if b >= end {
        spec.lr_min
    } else {
        let delta = (b - start) / (per_epoch * (spec.m2 - spec.m1));
        (1.0 - delta) * spec.lr_max + delta * spec.lr_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescentConfig {
    pub scheduler: SchedulerSpec,
    pub momentum: f64,
    pub max_steps: usize,
    /// Convergence threshold on the full-batch gradient norm.
    pub tol: f64,
    /// Mini-batch size for data-driven fields; `None` is full batch.
    pub batch_size: Option<usize>,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            scheduler: SchedulerSpec::constant(1e-2),
            momentum: 0.9,
            max_steps: 20_000,
            tol: 1e-6,
            batch_size: None,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        self.scheduler.validate()?;
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("momentum must lie in [0, 1)"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol must be positive"));
        }
        if self.batch_size == Some(0) {
            return Err(invalid("batch_size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub params: ParamVector,
    pub loss: f64,
    pub grad_norm: f64,
    pub seed: u64,
    pub converged: bool,
    #[serde(skip)]
    pub steps: usize,
}

/// Seeded mini-batch plan: reshuffles the sample indices every pass.
pub(crate) struct BatchPlan {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    size: usize,
    cursor: usize,
}

impl BatchPlan {
    pub(crate) fn new(n: usize, size: usize, seed: u64) -> Self {
        let mut plan = Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            order: (0..n).collect(),
            size: size.min(n),
            cursor: n,
        };
        plan.order.shuffle(&mut plan.rng);
        plan.cursor = 0;
        plan
    }

    pub(crate) fn batches_per_pass(&self, n: usize) -> usize {
        n.div_ceil(self.size)
    }

    pub(crate) fn next(&mut self) -> &[usize] {
        if self.cursor + self.size > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let start = self.cursor;
        self.cursor += self.size;
        &self.order[start..self.cursor]
    }
}

/// Descends from `init` until the full gradient norm drops to `config.tol`.
///
/// If `max_steps` runs out, the lowest-loss iterate is returned with
/// `converged == false`. A non-finite loss is reported as
/// [`Error::Divergence`] with the step index.
pub fn find_minimum<F: ScalarField + ?Sized>(
    field: &F,
    init: &ParamVector,
    config: &DescentConfig,
    seed: u64,
) -> Result<Minimum> {
    config.validate()?;
    if init.dim() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: init.dim() });
    }
    let mut plan = match (config.batch_size, field.sample_count()) {
        (Some(size), Some(n)) if size < n => Some(BatchPlan::new(n, size, seed)),
        _ => None,
    };
    let check_every = match (&plan, field.sample_count()) {
        (Some(p), Some(n)) => p.batches_per_pass(n),
        _ => 1,
    };

    let mut theta = init.as_slice().to_vec();
    let mut velocity = vec![0.0; theta.len()];
    let mut best: Option<(f64, Vec<f64>)> = None;

    for step in 0..=config.max_steps {
        let checking = step % check_every == 0 || step == config.max_steps;
        let mut full_grad = None;
        if checking {
            let (loss, grad) = field.value_and_gradient(&theta, None);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { step, point: None });
            }
            let grad_norm = linalg::norm(&grad);
            if grad_norm <= config.tol {
                return Ok(Minimum {
                    params: ParamVector::from_vec_unchecked(theta),
                    loss,
                    grad_norm,
                    seed,
                    converged: true,
                    steps: step,
                });
            }
            if best.as_ref().is_none_or(|(l, _)| loss < *l) {
                best = Some((loss, theta.clone()));
            }
            full_grad = Some(grad);
        }
        if step == config.max_steps {
            break;
        }
        let grad = match plan.as_mut() {
            Some(p) => field.gradient(&theta, Some(p.next())),
            None => full_grad.unwrap_or_else(|| field.gradient(&theta, None)),
        };
        let lr = schedule_lr(&config.scheduler, step as u64);
        for ((t, v), g) in theta.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
            *v = config.momentum * *v + g;
            *t -= lr * *v;
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Divergence { step: step + 1, point: None });
        }
    }

    let (loss, params) = best.expect("at least one full evaluation");
    let grad_norm = linalg::norm(&field.gradient(&params, None));
    Ok(Minimum {
        params: ParamVector::from_vec_unchecked(params),
        loss,
        grad_norm,
        seed,
        converged: false,
        steps: config.max_steps,
    })
}

const SLOT_ATTEMPTS: u64 = 4;

/// `count` minima from seeded uniform initializations in
/// `[-init_scale, init_scale]^dim`. A diverging initialization is redrawn up
/// to three times before the slot fails.
pub fn sample_minima<F: ScalarField + ?Sized>(
    field: &F,
    count: usize,
    seed: u64,
    init_scale: f64,
    config: &DescentConfig,
) -> Result<Vec<Minimum>> {
    if count == 0 {
        return Err(invalid("count must be at least 1"));
    }
    if !(init_scale > 0.0) || !init_scale.is_finite() {
        return Err(invalid("init_scale must be positive"));
    }
    config.validate()?;
    (0..count as u64)
        .into_par_iter()
        .map(|slot| {
            let mut last_err = None;
            for attempt in 0..SLOT_ATTEMPTS {
                let slot_seed = linalg::mix_seed(seed, &[slot, attempt]);
                let mut rng = ChaCha8Rng::seed_from_u64(slot_seed);
                let init: Vec<f64> = (0..field.dim())
                    .map(|_| rng.random_range(-init_scale..=init_scale))
                    .collect();
                let init = ParamVector::from_vec_unchecked(init);
                match find_minimum(field, &init, config, slot_seed) {
                    Ok(m) => return Ok(m),
                    Err(e @ Error::Divergence { .. }) => {
                        log::warn!("slot {slot} attempt {attempt} diverged: {e}");
                        last_err = Some(e);
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(last_err.expect("at least one attempt"))
        })
        .collect()
}
