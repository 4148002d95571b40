//! Barcodes of minima and the TO-score.
//!
//! Every local minimum `p` except the global one contributes a segment
//! `[L(p), h_p]`, where `h_p` is the lowest peak over paths from `p` to a
//! minimum with lower loss. [`compute_barcode`] estimates `h_p` from above by
//! optimizing one path per such pair; the global minimum contributes the
//! essential half-line `[L(p_global), +∞)`.

mod diagram;
pub(crate) mod json;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use diagram::{bottleneck_distance, DiagramPoint, PersistenceDiagram};
pub use json::{BarcodeFile, BarcodeMeta};

use crate::error::{invalid, Error, Result};
use crate::landscape::ScalarField;
use crate::linalg;
use crate::pathopt::{optimize_path, PathConfig, PathLocation};
use crate::trainer::Minimum;

/// Loss differences at or below this are treated as ties, broken by minimum id.
pub const TIE_EPSILON: f64 = 1e-9;
/// Finite segments at most this long are dropped from diagrams.
pub const ZERO_LENGTH: f64 = 1e-9;
/// Minima closer than this in parameter space are the same basin.
pub const DEDUP_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub birth: f64,
    pub death: f64,
    pub minimum_id: usize,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.death - self.birth
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Barcode {
    essential: Segment,
    segments: Vec<Segment>,
}

impl Barcode {
    /// `essential` must have an infinite death and the lowest birth; finite
    /// segments need `death >= birth`.
    pub fn new(essential: Segment, segments: Vec<Segment>) -> Result<Self> {
        if essential.death != f64::INFINITY || !essential.birth.is_finite() {
            return Err(invalid("essential segment must be [birth, +inf) with finite birth"));
        }
        for s in &segments {
            if !s.birth.is_finite() || s.death.is_nan() || s.death < s.birth {
                return Err(invalid(format!(
                    "segment of minimum {} has death {} below birth {}",
                    s.minimum_id, s.death, s.birth
                )));
            }
            if s.death == f64::INFINITY {
                return Err(invalid("only the essential segment may be infinite"));
            }
            if s.birth < essential.birth {
                return Err(invalid("essential birth must be the lowest birth"));
            }
        }
        Ok(Self { essential, segments })
    }

    pub fn essential(&self) -> &Segment {
        &self.essential
    }

    /// Finite segments, in processing order.
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Shifts every birth and death by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        let shift = |s: &Segment| Segment { birth: s.birth + c, death: s.death + c, minimum_id: s.minimum_id };
        Self { essential: shift(&self.essential), segments: self.segments.iter().map(shift).collect() }
    }
}

/// Barcode of a function whose only critical point is a minimum at `global_min`.
pub fn ideal_barcode(global_min: f64) -> Result<Barcode> {
    Barcode::new(Segment { birth: global_min, death: f64::INFINITY, minimum_id: 0 }, Vec::new())
}

pub fn to_diagram(barcode: &Barcode) -> PersistenceDiagram {
    PersistenceDiagram {
        finite: barcode
            .segments
            .iter()
            .filter(|s| s.length() > ZERO_LENGTH)
            .map(|s| DiagramPoint::new(s.birth, s.death))
            .collect(),
        essential: vec![barcode.essential.birth],
    }
}

/// Bottleneck distance from the barcode to its ideal counterpart.
pub fn to_score(barcode: &Barcode) -> f64 {
    let ideal = Barcode { essential: barcode.essential, segments: Vec::new() };
    bottleneck_distance(&to_diagram(barcode), &to_diagram(&ideal))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BarcodeConfig {
    pub path: PathConfig,
    /// Only connect each minimum to its `k` nearest lower minima.
    pub k_nearest_lower: Option<usize>,
}

impl Default for BarcodeConfig {
    fn default() -> Self {
        Self { path: PathConfig::default(), k_nearest_lower: None }
    }
}

/// One optimized path from minimum `from` down to minimum `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub from: usize,
    pub to: usize,
    pub max_loss: f64,
    pub location: PathLocation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub from: usize,
    pub to: usize,
    pub reason: String,
}

/// Output of [`compute_barcode`] with the per-pair bookkeeping.
#[derive(Debug, Clone)]
pub struct BarcodeRun {
    pub barcode: Barcode,
    /// Minimum ids in processing order (increasing loss).
    pub order: Vec<usize>,
    pub pairs: Vec<PairRecord>,
    pub skipped: Vec<SkippedPair>,
    /// Ids dropped as duplicates of an earlier minimum.
    pub duplicates: Vec<usize>,
    /// Ids whose every path failed; they have no segment.
    pub unresolved: Vec<usize>,
}

/// Processing order: increasing loss, with near-ties (chains of gaps
/// `<= TIE_EPSILON`) ordered by id.
fn processing_order(minima: &[Minimum], ids: &[usize]) -> Vec<usize> {
    let mut by_loss: Vec<usize> = ids.to_vec();
    by_loss.sort_by(|&a, &b| minima[a].loss.total_cmp(&minima[b].loss).then(a.cmp(&b)));
    let mut order = Vec::with_capacity(by_loss.len());
    let mut cluster: Vec<usize> = Vec::new();
    for id in by_loss {
        if let Some(&prev) = cluster.last() {
            if minima[id].loss - minima[prev].loss > TIE_EPSILON {
                cluster.sort_unstable();
                order.append(&mut cluster);
            }
        }
        cluster.push(id);
    }
    cluster.sort_unstable();
    order.append(&mut cluster);
    order
}

/// Elder-rule deaths over the graph of optimized paths.
///
/// Chaining two paths through an intermediate minimum gives another curve
/// between the outer minima, so a minimum dies at the smallest max loss
/// along any chain that reaches a minimum processed before it. Each edge
/// is raised to its endpoint losses: a path starts at its minimum, so its
/// maximum cannot sit below the recorded loss even if that loss was
/// measured on a mini-batch.
fn route_deaths(minima: &[Minimum], order: &[usize], pairs: &[PairRecord]) -> HashMap<usize, f64> {
    let rank: HashMap<usize, usize> = order.iter().enumerate().map(|(r, &id)| (id, r)).collect();
    let mut edges: Vec<(f64, usize, usize)> = pairs
        .iter()
        .map(|r| (r.max_loss.max(minima[r.from].loss).max(minima[r.to].loss), rank[&r.from], rank[&r.to]))
        .collect();
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    // parent links over ranks; a root is the oldest member of its component
    let mut parent: Vec<usize> = (0..order.len()).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut deaths = HashMap::new();
    for (w, a, b) in edges {
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        if ra != rb {
            let (elder, younger) = (ra.min(rb), ra.max(rb));
            deaths.insert(order[younger], w);
            parent[younger] = elder;
        }
    }
    deaths
}

/// Barcode of minima from pairwise optimized paths.
///
/// Minima are identified by their index in `minima`. Each is processed in
/// increasing loss and a path is optimized to every minimum processed
/// before it. Its death is the smallest max loss over those paths and
/// their chains through other minima (see [`route_deaths`]). A diverging
/// pair is skipped and reported in [`BarcodeRun::skipped`].
pub fn compute_barcode<F: ScalarField + ?Sized>(
    minima: &[Minimum],
    field: &F,
    config: &BarcodeConfig,
) -> Result<BarcodeRun> {
    if minima.is_empty() {
        return Err(Error::EmptyMinima);
    }
    config.path.validate()?;
    if let Some(m) = minima.iter().find(|m| m.params.dim() != field.dim()) {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: m.params.dim() });
    }
    if config.k_nearest_lower == Some(0) {
        return Err(invalid("k_nearest_lower must be positive"));
    }

    let mut kept: Vec<usize> = Vec::new();
    let mut duplicates = Vec::new();
    for (id, m) in minima.iter().enumerate() {
        let dup = kept.iter().any(|&k| {
            linalg::distance(minima[k].params.as_slice(), m.params.as_slice()) < DEDUP_DISTANCE
        });
        if dup {
            duplicates.push(id);
        } else {
            kept.push(id);
        }
    }
    let order = processing_order(minima, &kept);

    let mut jobs: Vec<(usize, usize)> = Vec::new();
    for (rank, &p) in order.iter().enumerate() {
        let mut lower: Vec<usize> = order[..rank].to_vec();
        if let Some(k) = config.k_nearest_lower {
            let d = |q: usize| linalg::distance(minima[p].params.as_slice(), minima[q].params.as_slice());
            lower.sort_by(|&a, &b| d(a).total_cmp(&d(b)).then(a.cmp(&b)));
            lower.truncate(k);
            lower.sort_by_key(|q| order.iter().position(|o| o == q));
        }
        jobs.extend(lower.into_iter().map(|q| (p, q)));
    }

    let outcomes: Vec<Result<PairRecord>> = jobs
        .par_iter()
        .map(|&(p, q)| {
            let path_config = PathConfig {
                seed: linalg::mix_seed(config.path.seed, &[p as u64, q as u64]),
                ..config.path.clone()
            };
            optimize_path(field, &minima[p].params, &minima[q].params, &path_config).map(|run| PairRecord {
                from: p,
                to: q,
                max_loss: run.max_loss,
                location: run.location,
            })
        })
        .collect();

    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for (&(p, q), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(rec) => pairs.push(rec),
            Err(e @ (Error::Divergence { .. } | Error::NonFinite { .. } | Error::DegenerateChord { .. })) => {
                log::warn!("path {p} -> {q} skipped: {e}");
                skipped.push(SkippedPair { from: p, to: q, reason: e.to_string() });
            }
            Err(e) => return Err(e),
        }
    }

    let global = order[0];
    let essential = Segment { birth: minima[global].loss, death: f64::INFINITY, minimum_id: global };
    let deaths = route_deaths(minima, &order, &pairs);
    let mut segments = Vec::new();
    let mut unresolved = Vec::new();
    for &p in &order[1..] {
        match deaths.get(&p) {
            Some(&death) => segments.push(Segment { birth: minima[p].loss, death, minimum_id: p }),
            None => unresolved.push(p),
        }
    }
    let barcode = Barcode::new(essential, segments)?;
    Ok(BarcodeRun { barcode, order, pairs, skipped, duplicates, unresolved })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{DoubleWell, ParamVector};

    fn minimum(x: &[f64], loss: f64) -> Minimum {
        Minimum {
            params: ParamVector::new(x.to_vec()).unwrap(),
            loss,
            grad_norm: 0.0,
            seed: 0,
            converged: true,
            steps: 0,
        }
    }

    fn bar(essential: f64, finite: &[(f64, f64)]) -> Barcode {
        Barcode::new(
            Segment { birth: essential, death: f64::INFINITY, minimum_id: 0 },
            finite
                .iter()
                .enumerate()
                .map(|(i, &(b, d))| Segment { birth: b, death: d, minimum_id: i + 1 })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_minimum() {
        let run = compute_barcode(&[minimum(&[0.7], -0.25)], &DoubleWell, &BarcodeConfig::default()).unwrap();
        assert!(run.barcode.segments().is_empty());
        assert_eq!(run.barcode.essential().birth, -0.25);
        assert_eq!(to_score(&run.barcode), 0.0);
    }

    #[test]
    fn empty_minima_rejected() {
        assert!(matches!(
            compute_barcode(&[], &DoubleWell, &BarcodeConfig::default()),
            Err(Error::EmptyMinima)
        ));
    }

    #[test]
    fn double_well_segment() {
        let a = 0.5f64.sqrt();
        let ms = [minimum(&[a], DoubleWell.value(&[a], None)), minimum(&[-a], DoubleWell.value(&[-a], None))];
        let cfg = BarcodeConfig { path: PathConfig { epochs: 50, ..Default::default() }, ..Default::default() };
        let run = compute_barcode(&ms, &DoubleWell, &cfg).unwrap();
        assert_eq!(run.order, vec![0, 1]);
        let seg = run.barcode.segments()[0];
        assert_eq!(seg.minimum_id, 1);
        assert!((seg.birth + 0.25).abs() < 1e-3);
        assert!(seg.death.abs() < 1e-3);
        assert!((to_score(&run.barcode) - 0.125).abs() < 1e-3);
    }

    #[test]
    fn duplicates_are_dropped() {
        let ms = [minimum(&[0.5], 1.0), minimum(&[0.5 + 1e-8], 1.0), minimum(&[-0.5], 0.0)];
        let cfg = BarcodeConfig { path: PathConfig { epochs: 5, ..Default::default() }, ..Default::default() };
        let run = compute_barcode(&ms, &DoubleWell, &cfg).unwrap();
        assert_eq!(run.duplicates, vec![1]);
        assert_eq!(run.order, vec![2, 0]);
    }

    #[test]
    fn near_ties_ordered_by_id() {
        let ms = [minimum(&[1.0], 0.5 + 4e-10), minimum(&[2.0], 0.5), minimum(&[3.0], 0.2)];
        assert_eq!(processing_order(&ms, &[0, 1, 2]), vec![2, 0, 1]);
    }

    #[test]
    fn diagram_conversion() {
        let d = to_diagram(&bar(0.0, &[]));
        assert_eq!(d.essential, vec![0.0]);
        assert!(d.finite.is_empty());
        let d = to_diagram(&bar(-0.25, &[(-0.25, 0.0), (1.0, 1.0)]));
        assert_eq!(d.finite, vec![DiagramPoint::new(-0.25, 0.0)]);
        assert_eq!(d.essential, vec![-0.25]);
    }

    #[test]
    fn score_examples() {
        assert_eq!(to_score(&ideal_barcode(0.0).unwrap()), 0.0);
        assert_eq!(to_score(&bar(-0.25, &[(-0.25, 0.0)])), 0.125);
        assert_eq!(to_score(&bar(-0.25, &[(-0.25, 0.0), (-0.1, 0.0)])), 0.125);
    }

    #[test]
    fn score_is_shift_invariant() {
        let b = bar(-1.5, &[(-1.0, 0.25), (-0.75, -0.5)]);
        assert_eq!(to_score(&b), to_score(&b.shifted(3.0)));
    }

    #[test]
    fn invalid_barcodes_rejected() {
        let ess = Segment { birth: 0.0, death: f64::INFINITY, minimum_id: 0 };
        assert!(Barcode::new(ess, vec![Segment { birth: 1.0, death: 0.5, minimum_id: 1 }]).is_err());
        assert!(Barcode::new(ess, vec![Segment { birth: -1.0, death: 0.5, minimum_id: 1 }]).is_err());
        assert!(Barcode::new(Segment { death: 3.0, ..ess }, vec![]).is_err());
    }
}
