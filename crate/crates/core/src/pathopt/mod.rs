//! Low-loss paths between minima.
//!
//! A path is a polyline of parameter vectors with fixed endpoints. Each
//! [`PathState::step`] moves the interior points by the gradient with its
//! components along the two adjacent chords averaged out, so points descend
//! normal to the path and the tangential part is left to reparametrization.
//! [`refine`] periodically re-distributes points where gaps or interpolated
//! loss grow too large.

mod refine;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use refine::{distance_criterion, loss_criterion, refine, Criterion, INSERTION_THRESHOLD};

use crate::error::{invalid, Error, Result};
use crate::landscape::{ParamVector, ScalarField};
use crate::linalg;
use crate::trainer::{schedule_lr, BatchPlan, SchedulerSpec};

/// Minimum separation between consecutive path points.
pub const MIN_CHORD: f64 = 1e-12;

/// Interpolation fractions evaluated on every chord by default.
pub const DEFAULT_ALPHA_GRID: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

/// Unit vector along `a - b`.
pub fn proj(a: &ParamVector, b: &ParamVector) -> Result<ParamVector> {
    unit_chord(a.as_slice(), b.as_slice())
        .map(ParamVector::from_vec_unchecked)
        .ok_or(Error::DegenerateChord { point: None })
}

fn unit_chord(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let mut d = linalg::sub(a, b);
    let n = linalg::norm(&d);
    if n <= MIN_CHORD || !n.is_finite() {
        return None;
    }
    d.iter_mut().for_each(|x| *x /= n);
    Some(d)
}

/// Discretized path with immutable endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParamVector>", into = "Vec<ParamVector>")]
pub struct PathState {
    points: Vec<ParamVector>,
}

impl TryFrom<Vec<ParamVector>> for PathState {
    type Error = Error;

    fn try_from(points: Vec<ParamVector>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<PathState> for Vec<ParamVector> {
    fn from(p: PathState) -> Self {
        p.points
    }
}

/// Per-interior-point gradient decomposition from one sweep.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepNorms {
    pub orthogonal: Vec<f64>,
    pub tangential: Vec<f64>,
}

impl PathState {
    pub fn new(points: Vec<ParamVector>) -> Result<Self> {
        if points.len() < 3 {
            return Err(invalid("a path needs at least 3 points"));
        }
        let dim = points[0].dim();
        if let Some(p) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: p.dim() });
        }
        for (i, w) in points.windows(2).enumerate() {
            if linalg::distance(w[0].as_slice(), w[1].as_slice()) <= MIN_CHORD {
                return Err(Error::DegenerateChord { point: Some(i + 1) });
            }
        }
        Ok(Self { points })
    }

    /// Straight segment from `start` to `end` with `interior` equally spaced points.
    pub fn straight(start: &ParamVector, end: &ParamVector, interior: usize) -> Result<Self> {
        if start.dim() != end.dim() {
            return Err(Error::DimensionMismatch { expected: start.dim(), got: end.dim() });
        }
        if linalg::distance(start.as_slice(), end.as_slice()) <= MIN_CHORD {
            return Err(invalid("path endpoints must be distinct"));
        }
        let n = interior + 1;
        let mut points = Vec::with_capacity(n + 1);
        points.push(start.clone());
        for k in 1..n {
            let t = k as f64 / n as f64;
            points.push(ParamVector::from_vec_unchecked(linalg::lerp(start.as_slice(), end.as_slice(), t)));
        }
        points.push(end.clone());
        Self::new(points)
    }

    pub fn points(&self) -> &[ParamVector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn first(&self) -> &ParamVector {
        &self.points[0]
    }

    pub fn last(&self) -> &ParamVector {
        self.points.last().unwrap()
    }

    pub(crate) fn points_mut(&mut self) -> &mut Vec<ParamVector> {
        &mut self.points
    }

    /// One in-order sweep over the interior points. Point `i` sees the
    /// already-updated point `i - 1` and the not-yet-updated point `i + 1`.
    /// `l2 · θ` is added to the gradient before it is decomposed.
    pub fn step<F: ScalarField + ?Sized>(
        &mut self,
        field: &F,
        eta: f64,
        l2: f64,
        batch: Option<&[usize]>,
    ) -> Result<StepNorms> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(invalid("learning rate must be finite and non-negative"));
        }
        if self.dim() != field.dim() {
            return Err(Error::DimensionMismatch { expected: field.dim(), got: self.dim() });
        }
        let n = self.points.len();
        let mut norms = StepNorms {
            orthogonal: Vec::with_capacity(n - 2),
            tangential: Vec::with_capacity(n - 2),
        };
        for i in 1..n - 1 {
            let (head, tail) = self.points.split_at_mut(i);
            let left = head[i - 1].as_slice();
            let (center, right) = tail.split_at_mut(1);
            let center = center[0].as_mut_slice();
            let right = right[0].as_slice();

            let mut grad = field.gradient(center, batch);
            if l2 > 0.0 {
                linalg::axpy(l2, center, &mut grad);
            }
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { step: 0, point: Some(i) });
            }
            let u_left = unit_chord(center, left).ok_or(Error::DegenerateChord { point: Some(i) })?;
            let u_right = unit_chord(right, center).ok_or(Error::DegenerateChord { point: Some(i + 1) })?;
            let gl = linalg::dot(&grad, &u_left);
            let gr = linalg::dot(&grad, &u_right);
            let tangential: Vec<f64> = u_left
                .iter()
                .zip(&u_right)
                .map(|(a, b)| 0.5 * (gl * a + gr * b))
                .collect();
            let orthogonal: Vec<f64> = grad.iter().zip(&tangential).map(|(g, t)| g - t).collect();
            linalg::axpy(-eta, &orthogonal, center);
            if center.iter().any(|c| !c.is_finite()) {
                return Err(Error::Divergence { step: 0, point: Some(i) });
            }
            norms.orthogonal.push(linalg::norm(&orthogonal));
            norms.tangential.push(linalg::norm(&tangential));
        }
        Ok(norms)
    }
}

/// Where along a path a value was attained: chord `segment` at fraction
/// `alpha`. Path point `k` is `(k, 0.0)`; the final point is `(len - 1, 0.0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLocation {
    pub segment: usize,
    pub alpha: f64,
}

/// Maximum loss over the path points and the `alpha`-interpolated points of
/// every chord. Ties go to the smallest segment, then the smallest alpha.
pub fn path_max_loss<F: ScalarField + ?Sized>(
    field: &F,
    path: &PathState,
    alpha_grid: &[f64],
) -> Result<(f64, PathLocation)> {
    let mut alphas: Vec<f64> = alpha_grid.to_vec();
    if alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(invalid("interpolation fractions must lie in (0, 1)"));
    }
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let pts = path.points();
    let mut best: Option<(f64, PathLocation)> = None;
    let mut consider = |v: f64, loc: PathLocation, theta: &[f64]| -> Result<()> {
        if !v.is_finite() {
            return Err(Error::NonFinite { what: "loss", theta: theta.to_vec() });
        }
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, loc));
        }
        Ok(())
    };
    for (k, w) in pts.windows(2).enumerate() {
        let a = w[0].as_slice();
        consider(field.value(a, None), PathLocation { segment: k, alpha: 0.0 }, a)?;
        for &alpha in &alphas {
            let x = linalg::lerp(a, w[1].as_slice(), alpha);
            consider(field.value(&x, None), PathLocation { segment: k, alpha }, &x)?;
        }
    }
    let end = path.last().as_slice();
    consider(field.value(end, None), PathLocation { segment: pts.len() - 1, alpha: 0.0 }, end)?;
    Ok(best.expect("path has points"))
}

/// Per-epoch record of a path optimization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathTrace {
    /// Max interpolated loss of the initial straight segment.
    pub initial_max_loss: f64,
    /// Max interpolated loss after each epoch.
    pub max_loss: Vec<f64>,
    /// Orthogonal-gradient norm per interior point, averaged over each epoch.
    pub orthogonal_norms: Vec<Vec<f64>>,
    /// Tangential-gradient norm per interior point, averaged over each epoch.
    pub tangential_norms: Vec<Vec<f64>>,
    /// Epochs (1-based) at which refinement changed the path.
    pub refinements: Vec<usize>,
}

impl PathTrace {
    pub fn epochs(&self) -> usize {
        self.max_loss.len()
    }

    /// CSV with columns `epoch,max_loss,mean_orth_norm,mean_tang_norm`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epoch,max_loss,mean_orth_norm,mean_tang_norm")?;
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        for (e, loss) in self.max_loss.iter().enumerate() {
            writeln!(
                out,
                "{},{:?},{:?},{:?}",
                e + 1,
                loss,
                mean(&self.orthogonal_norms[e]),
                mean(&self.tangential_norms[e])
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathConfig {
    /// Interior points of the initial straight segment.
    pub n_points: usize,
    /// Learning-rate schedule over path steps.
    pub scheduler: SchedulerSpec,
    pub l2: f64,
    pub epochs: usize,
    /// Refinement period in epochs; 0 disables refinement.
    pub refine_every: usize,
    pub criterion: Criterion,
    pub alpha_grid: Vec<f64>,
    pub seed: u64,
    /// Mini-batch size for data-driven fields; `None` is full batch.
    pub batch_size: Option<usize>,
    /// Include banked points when measuring the path's max loss.
    pub include_bank: bool,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            n_points: 19,
            scheduler: SchedulerSpec::constant(1e-2),
            l2: 1e-5,
            epochs: 1000,
            refine_every: 25,
            criterion: Criterion::Distance,
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            seed: 0,
            batch_size: None,
            include_bank: false,
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        self.scheduler.validate()?;
        if self.n_points == 0 {
            return Err(invalid("n_points must be at least 1"));
        }
        if !(self.l2 >= 0.0) {
            return Err(invalid("l2 must be non-negative"));
        }
        if self.alpha_grid.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(invalid("alpha_grid values must lie in (0, 1)"));
        }
        if self.batch_size == Some(0) {
            return Err(invalid("batch_size must be positive"));
        }
        Ok(())
    }
}

/// Result of [`optimize_path`].
#[derive(Debug, Clone)]
pub struct PathRun {
    pub path: PathState,
    pub trace: PathTrace,
    pub bank: Vec<ParamVector>,
    pub max_loss: f64,
    pub location: PathLocation,
}

/// Max loss of the path, optionally including banked points.
fn measured_max<F: ScalarField + ?Sized>(
    field: &F,
    path: &PathState,
    bank: &[ParamVector],
    config: &PathConfig,
) -> Result<(f64, PathLocation)> {
    let (mut value, loc) = path_max_loss(field, path, &config.alpha_grid)?;
    if config.include_bank {
        for b in bank {
            value = value.max(field.value(b.as_slice(), None));
        }
    }
    Ok((value, loc))
}

/// Optimizes the straight segment from `start` to `end`.
pub fn optimize_path<F: ScalarField + ?Sized>(
    field: &F,
    start: &ParamVector,
    end: &ParamVector,
    config: &PathConfig,
) -> Result<PathRun> {
    config.validate()?;
    for p in [start, end] {
        if p.dim() != field.dim() {
            return Err(Error::DimensionMismatch { expected: field.dim(), got: p.dim() });
        }
    }
    let path = PathState::straight(start, end, config.n_points)?;
    optimize_from(field, path, config)
}

/// Optimizes an arbitrary initial path; the endpoints stay fixed.
pub fn optimize_from<F: ScalarField + ?Sized>(
    field: &F,
    mut path: PathState,
    config: &PathConfig,
) -> Result<PathRun> {
    config.validate()?;
    let mut plan = match (config.batch_size, field.sample_count()) {
        (Some(size), Some(n)) if size < n => Some(BatchPlan::new(n, size, config.seed)),
        _ => None,
    };
    let steps_per_epoch = match (&plan, field.sample_count()) {
        (Some(p), Some(n)) => p.batches_per_pass(n),
        _ => 1,
    };
    let mut bank = Vec::new();
    let mut trace = PathTrace {
        initial_max_loss: measured_max(field, &path, &bank, config)?.0,
        ..Default::default()
    };
    let mut global_step: u64 = 0;
    for epoch in 0..config.epochs {
        let interior = path.len() - 2;
        let mut orth = vec![0.0; interior];
        let mut tang = vec![0.0; interior];
        for _ in 0..steps_per_epoch {
            let eta = schedule_lr(&config.scheduler, global_step);
            global_step += 1;
            let batch = plan.as_mut().map(|p| p.next().to_vec());
            let norms = path
                .step(field, eta, config.l2, batch.as_deref())
                .map_err(|e| match e {
                    Error::Divergence { point, .. } => Error::Divergence { step: epoch, point },
                    other => other,
                })?;
            for (acc, v) in orth.iter_mut().zip(&norms.orthogonal) {
                *acc += v / steps_per_epoch as f64;
            }
            for (acc, v) in tang.iter_mut().zip(&norms.tangential) {
                *acc += v / steps_per_epoch as f64;
            }
        }
        if config.refine_every > 0 && (epoch + 1) % config.refine_every == 0 && path.len() >= 4 {
            if refine(&mut path, field, config.criterion, &config.alpha_grid, &mut bank)? {
                trace.refinements.push(epoch + 1);
            }
        }
        let (max_loss, _) = measured_max(field, &path, &bank, config).map_err(|e| match e {
            Error::NonFinite { .. } => Error::Divergence { step: epoch, point: None },
            other => other,
        })?;
        trace.max_loss.push(max_loss);
        trace.orthogonal_norms.push(orth);
        trace.tangential_norms.push(tang);
    }
    let (max_loss, location) = measured_max(field, &path, &bank, config)?;
    Ok(PathRun { path, trace, bank, max_loss, location })
}

/// Writes a path as a JSON array of point arrays.
pub fn save_path(path: &PathState, file: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(file)?;
    serde_json::to_writer(std::io::BufWriter::new(f), path)?;
    Ok(())
}

pub fn load_path(file: impl AsRef<Path>) -> Result<PathState> {
    let f = std::fs::File::open(file)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}
