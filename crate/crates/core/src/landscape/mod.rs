//! Differentiable scalar fields over a flat parameter space.
//!
//! A [`ScalarField`] is anything that can report a loss and its gradient at a
//! point. Analytic benchmark landscapes live in [`builtin`]; small multilayer
//! perceptrons with mean cross-entropy loss live in [`mlp`].

pub mod builtin;
pub mod dataset;
pub mod mlp;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use builtin::{make_builtin, Builtin, BuiltinField, DoubleWell, GaussianMixture, QuadraticBowl};
pub use dataset::{load_dataset, two_moons, Dataset};
pub use mlp::{make_mlp_field, Activation, MlpField, MlpSpec};

/// A point in parameter space. Every coordinate is finite.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(crate::error::invalid("parameter vector must have dim >= 1"));
        }
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoordinate { index });
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Self(coords)
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(value: ParamVector) -> Self {
        value.0
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Debug for ParamVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// A differentiable loss over a `dim`-dimensional parameter space.
///
/// The raw methods take unchecked slices and are the hot path used by the
/// optimizers; they may panic on a dimension mismatch. Use [`eval_loss`] and
/// [`eval_grad`] for checked access.
///
/// `batch` selects the samples a data-driven loss is averaged over; `None`
/// means the full dataset. Analytic fields ignore it. Implementations must be
/// pure: identical inputs give bit-identical outputs.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, theta: &[f64], batch: Option<&[usize]>) -> f64;

    fn gradient(&self, theta: &[f64], batch: Option<&[usize]>) -> Vec<f64>;

    fn value_and_gradient(&self, theta: &[f64], batch: Option<&[usize]>) -> (f64, Vec<f64>) {
        (self.value(theta, batch), self.gradient(theta, batch))
    }

    /// Number of samples a mini-batch may index into, if the loss is data-driven.
    fn sample_count(&self) -> Option<usize> {
        None
    }

    /// Short human-readable identifier, recorded in output metadata.
    fn describe(&self) -> String;
}

impl<F: ScalarField + ?Sized> ScalarField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, theta: &[f64], batch: Option<&[usize]>) -> f64 {
        (**self).value(theta, batch)
    }
    fn gradient(&self, theta: &[f64], batch: Option<&[usize]>) -> Vec<f64> {
        (**self).gradient(theta, batch)
    }
    fn value_and_gradient(&self, theta: &[f64], batch: Option<&[usize]>) -> (f64, Vec<f64>) {
        (**self).value_and_gradient(theta, batch)
    }
    fn sample_count(&self) -> Option<usize> {
        (**self).sample_count()
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<F: ScalarField + ?Sized> ScalarField for Box<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, theta: &[f64], batch: Option<&[usize]>) -> f64 {
        (**self).value(theta, batch)
    }
    fn gradient(&self, theta: &[f64], batch: Option<&[usize]>) -> Vec<f64> {
        (**self).gradient(theta, batch)
    }
    fn value_and_gradient(&self, theta: &[f64], batch: Option<&[usize]>) -> (f64, Vec<f64>) {
        (**self).value_and_gradient(theta, batch)
    }
    fn sample_count(&self) -> Option<usize> {
        (**self).sample_count()
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// Loss at `theta`, checked for dimension and finiteness.
pub fn eval_loss<F: ScalarField + ?Sized>(field: &F, theta: &ParamVector) -> Result<f64> {
    eval_loss_on(field, theta, None)
}

pub fn eval_loss_on<F: ScalarField + ?Sized>(
    field: &F,
    theta: &ParamVector,
    batch: Option<&[usize]>,
) -> Result<f64> {
    if theta.dim() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: theta.dim() });
    }
    let v = field.value(theta.as_slice(), batch);
    if !v.is_finite() {
        return Err(Error::NonFinite { what: "loss", theta: theta.as_slice().to_vec() });
    }
    Ok(v)
}

/// Gradient at `theta`, checked for dimension and finiteness.
pub fn eval_grad<F: ScalarField + ?Sized>(field: &F, theta: &ParamVector) -> Result<ParamVector> {
    eval_grad_on(field, theta, None)
}

pub fn eval_grad_on<F: ScalarField + ?Sized>(
    field: &F,
    theta: &ParamVector,
    batch: Option<&[usize]>,
) -> Result<ParamVector> {
    if theta.dim() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: theta.dim() });
    }
    let g = field.gradient(theta.as_slice(), batch);
    if g.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite { what: "gradient", theta: theta.as_slice().to_vec() });
    }
    Ok(ParamVector::from_vec_unchecked(g))
}
