use serde::{Deserialize, Serialize};

use super::{PathState, MIN_CHORD};
use crate::error::{invalid, Result};
use crate::landscape::{ParamVector, ScalarField};
use crate::linalg;

/// Gaps whose criterion exceeds this value trigger an insertion.
pub const INSERTION_THRESHOLD: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Peak interpolated loss on a gap relative to the highest path point.
    Loss,
    /// Gap length relative to the mean spacing of the straight segment.
    Distance,
}

/// `max_α L((1-α)a + αb) / l_ref`.
pub fn loss_criterion<F: ScalarField + ?Sized>(
    field: &F,
    a: &ParamVector,
    b: &ParamVector,
    l_ref: f64,
    alpha_grid: &[f64],
) -> Result<f64> {
    if !(l_ref > 0.0) {
        return Err(invalid(format!("loss criterion needs a positive reference loss, got {l_ref}")));
    }
    if alpha_grid.is_empty() || alpha_grid.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(invalid("alpha grid must be non-empty and inside (0, 1)"));
    }
    let peak = alpha_grid
        .iter()
        .map(|&alpha| field.value(&linalg::lerp(a.as_slice(), b.as_slice(), alpha), None))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(peak / l_ref)
}

/// `‖a - b‖ / mu`.
pub fn distance_criterion(a: &ParamVector, b: &ParamVector, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(invalid(format!("mean spacing must be positive, got {mu}")));
    }
    Ok(linalg::distance(a.as_slice(), b.as_slice()) / mu)
}

fn argmax(values: &[f64], skip: Option<usize>) -> usize {
    let mut best = None;
    for (i, &v) in values.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.expect("at least two gaps").0
}

/// One insertion pass. If some gap's criterion exceeds
/// [`INSERTION_THRESHOLD`], midpoints are inserted in the two worst gaps and
/// the interior points next to either endpoint are moved to `bank`, so the
/// path keeps its length. Returns whether the path changed.
pub fn refine<F: ScalarField + ?Sized>(
    path: &mut PathState,
    field: &F,
    criterion: Criterion,
    alpha_grid: &[f64],
    bank: &mut Vec<ParamVector>,
) -> Result<bool> {
    let n = path.len();
    if n < 4 {
        return Err(invalid("refinement needs a path of at least 4 points"));
    }
    let pts = path.points();
    let scores: Vec<f64> = match criterion {
        Criterion::Distance => {
            let mu = linalg::distance(path.first().as_slice(), path.last().as_slice()) / n as f64;
            pts.windows(2)
                .map(|w| distance_criterion(&w[0], &w[1], mu))
                .collect::<Result<_>>()?
        }
        Criterion::Loss => {
            let l_max = pts
                .iter()
                .map(|p| field.value(p.as_slice(), None))
                .fold(f64::NEG_INFINITY, f64::max);
            pts.windows(2)
                .map(|w| loss_criterion(field, &w[0], &w[1], l_max, alpha_grid))
                .collect::<Result<_>>()?
        }
    };
    if scores.iter().all(|&s| s <= INSERTION_THRESHOLD) {
        return Ok(false);
    }
    let first = argmax(&scores, None);
    let second = argmax(&scores, Some(first));

    let mut refined = Vec::with_capacity(n);
    for (i, p) in pts.iter().enumerate() {
        if i != 1 && i != n - 2 {
            refined.push(p.clone());
        }
        if i == first || i == second {
            let mid = linalg::midpoint(p.as_slice(), pts[i + 1].as_slice());
            refined.push(ParamVector::from_vec_unchecked(mid));
        }
    }
    debug_assert_eq!(refined.len(), n);
    if refined
        .windows(2)
        .any(|w| linalg::distance(w[0].as_slice(), w[1].as_slice()) <= MIN_CHORD)
    {
        return Ok(false);
    }
    bank.push(pts[1].clone());
    bank.push(pts[n - 2].clone());
    *path.points_mut() = refined;
    Ok(true)
}
