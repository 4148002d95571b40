use nalgebra::{Matrix6, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::MorseConfig;
use crate::error::{invalid, Error, Result};
use crate::landscape::{ParamVector, ScalarField};
use crate::linalg;
use crate::pathopt::{optimize_path, MIN_CHORD};
use crate::trainer::{schedule_lr, BatchPlan, Minimum};

/// Relative eigenvalue floor below which the six neighbour offsets are
/// treated as collinear.
const TANGENT_RANK_TOLERANCE: f64 = 1e-12;

/// An optimized sampled simplex of dimension `r`.
///
/// For an edge, `sample_points` runs along the path: each path point
/// followed by its chord's interpolation points. For a triangle it is the
/// barycentric grid, row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSimplex {
    pub r: usize,
    pub vertex_ids: Vec<usize>,
    pub sample_points: Vec<ParamVector>,
    /// Largest loss over `sample_points`.
    pub filtration_value: f64,
    /// Largest loss over the moving sample points after each epoch.
    pub interior_trace: Vec<f64>,
}

/// Optimizes the simplex spanned by `vertices` (2 or 3 of them). Vertex
/// positions are `0..=r` in `vertex_ids`; callers relabel them.
///
/// An edge is an optimized path with `grid_depth - 1` interior points. A
/// triangle first optimizes its three edges (depth `config.edge_depth`),
/// then moves the interior of a depth-`grid_depth` barycentric grid by the
/// gradient component normal to a local tangent plane.
pub fn optimize_simplex<F: ScalarField + ?Sized>(
    field: &F,
    vertices: &[&Minimum],
    grid_depth: usize,
    config: &MorseConfig,
) -> Result<SampledSimplex> {
    config.validate()?;
    if !(2..=3).contains(&vertices.len()) {
        return Err(invalid("a simplex needs 2 or 3 vertices"));
    }
    for v in vertices {
        if v.params.dim() != field.dim() {
            return Err(Error::DimensionMismatch { expected: field.dim(), got: v.params.dim() });
        }
    }
    for (a, va) in vertices.iter().enumerate() {
        for vb in &vertices[a + 1..] {
            if linalg::distance(va.params.as_slice(), vb.params.as_slice()) <= MIN_CHORD {
                return Err(invalid("simplex vertices must be distinct"));
            }
        }
    }
    if vertices.len() == 2 {
        return optimize_edge(field, &vertices[0].params, &vertices[1].params, grid_depth, config);
    }
    let edge = |a: usize, b: usize| {
        let mut cfg = config.clone();
        cfg.path.seed = linalg::mix_seed(config.path.seed, &[a as u64, b as u64]);
        optimize_edge(field, &vertices[a].params, &vertices[b].params, config.edge_depth, &cfg)
    };
    let (ab, ac, bc) = (edge(0, 1)?, edge(0, 2)?, edge(1, 2)?);
    optimize_triangle(field, [&ab, &ac, &bc], grid_depth, config)
}

fn max_loss<F: ScalarField + ?Sized>(field: &F, points: &[ParamVector]) -> Result<f64> {
    points.iter().try_fold(f64::NEG_INFINITY, |acc, p| {
        let v = field.value(p.as_slice(), None);
        if v.is_finite() {
            Ok(acc.max(v))
        } else {
            Err(Error::NonFinite { what: "loss", theta: p.as_slice().to_vec() })
        }
    })
}

fn optimize_edge<F: ScalarField + ?Sized>(
    field: &F,
    start: &ParamVector,
    end: &ParamVector,
    grid_depth: usize,
    config: &MorseConfig,
) -> Result<SampledSimplex> {
    if grid_depth < 2 {
        return Err(invalid("an edge needs grid depth at least 2"));
    }
    let mut path = config.path.clone();
    path.n_points = grid_depth - 1;
    path.include_bank = false;
    let run = optimize_path(field, start, end, &path)?;

    let mut alphas = path.alpha_grid.clone();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let pts = run.path.points();
    let mut samples = Vec::with_capacity(pts.len() * (alphas.len() + 1));
    for w in pts.windows(2) {
        samples.push(w[0].clone());
        for &a in &alphas {
            samples.push(ParamVector::from_vec_unchecked(linalg::lerp(w[0].as_slice(), w[1].as_slice(), a)));
        }
    }
    samples.push(run.path.last().clone());
    let filtration_value = max_loss(field, &samples)?;
    Ok(SampledSimplex {
        r: 1,
        vertex_ids: vec![0, 1],
        sample_points: samples,
        filtration_value,
        interior_trace: run.trace.max_loss,
    })
}

/// Point at arc-length fraction `t` along a polyline.
fn resample(points: &[ParamVector], t: f64) -> Vec<f64> {
    let lengths: Vec<f64> = points.windows(2).map(|w| linalg::distance(w[0].as_slice(), w[1].as_slice())).collect();
    let total: f64 = lengths.iter().sum();
    if t <= 0.0 || total == 0.0 {
        return points[0].as_slice().to_vec();
    }
    if t >= 1.0 {
        return points.last().unwrap().as_slice().to_vec();
    }
    let mut target = t * total;
    for (k, &len) in lengths.iter().enumerate() {
        if target <= len && len > 0.0 {
            return linalg::lerp(points[k].as_slice(), points[k + 1].as_slice(), target / len);
        }
        target -= len;
    }
    points.last().unwrap().as_slice().to_vec()
}

/// Barycentric lattice of depth `g`: point `(i, j)` has weight `i/g` on B,
/// `j/g` on C and the rest on A.
struct Lattice {
    g: usize,
}

impl Lattice {
    fn len(&self) -> usize {
        (self.g + 1) * (self.g + 2) / 2
    }

    fn index(&self, i: usize, j: usize) -> usize {
        // rows of fixed i hold g - i + 1 points
        i * (self.g + 1) - i * (i.saturating_sub(1)) / 2 + j
    }

    fn coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..=self.g).flat_map(move |i| (0..=self.g - i).map(move |j| (i, j)))
    }

    fn is_interior(&self, i: usize, j: usize) -> bool {
        i > 0 && j > 0 && i + j < self.g
    }

    fn neighbours(&self, i: usize, j: usize) -> [usize; 6] {
        [
            self.index(i + 1, j),
            self.index(i - 1, j),
            self.index(i, j + 1),
            self.index(i, j - 1),
            self.index(i + 1, j - 1),
            self.index(i - 1, j + 1),
        ]
    }
}

/// Orthonormal basis of the least-squares plane through `center` spanned
/// by the six neighbour offsets, or `None` if they are (nearly) collinear.
fn tangent_basis(center: &[f64], neighbours: &[&[f64]; 6]) -> Option<[Vec<f64>; 2]> {
    let offsets: Vec<Vec<f64>> = neighbours.iter().map(|n| linalg::sub(n, center)).collect();
    let gram = Matrix6::from_fn(|a, b| linalg::dot(&offsets[a], &offsets[b]));
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (l1, l2) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    if !(l1 > 0.0) || !(l2 > TANGENT_RANK_TOLERANCE * l1) {
        return None;
    }
    let direction = |k: usize, lambda: f64| {
        let mut u = vec![0.0; center.len()];
        for (a, off) in offsets.iter().enumerate() {
            linalg::axpy(eig.eigenvectors[(a, k)] / lambda.sqrt(), off, &mut u);
        }
        u
    };
    Some([direction(order[0], l1), direction(order[1], l2)])
}

/// Optimizes a triangle whose edges `[AB, AC, BC]` are already optimized
/// and stay frozen. Each edge runs from its lower to its higher vertex.
pub(crate) fn optimize_triangle<F: ScalarField + ?Sized>(
    field: &F,
    edges: [&SampledSimplex; 3],
    grid_depth: usize,
    config: &MorseConfig,
) -> Result<SampledSimplex> {
    let [ab, ac, bc] = edges;
    let (a, b, c) = (&ab.sample_points[0], ab.sample_points.last().unwrap(), ac.sample_points.last().unwrap());
    if &ac.sample_points[0] != a || &bc.sample_points[0] != b || bc.sample_points.last().unwrap() != c {
        return Err(invalid("edges do not share the triangle's vertices"));
    }
    let lattice = Lattice { g: grid_depth };
    let g = grid_depth as f64;
    let mut points: Vec<Vec<f64>> = vec![Vec::new(); lattice.len()];
    for (i, j) in lattice.coords() {
        let p = if j == 0 {
            resample(&ab.sample_points, i as f64 / g)
        } else if i == 0 {
            resample(&ac.sample_points, j as f64 / g)
        } else if i + j == grid_depth {
            resample(&bc.sample_points, j as f64 / g)
        } else {
            let mut p = linalg::lerp(a.as_slice(), b.as_slice(), i as f64 / g);
            linalg::axpy(j as f64 / g, &linalg::sub(c.as_slice(), a.as_slice()), &mut p);
            p
        };
        points[lattice.index(i, j)] = p;
    }
    let interior: Vec<(usize, usize)> = lattice.coords().filter(|&(i, j)| lattice.is_interior(i, j)).collect();

    // harmonic fill so the interior starts flush with the bent edges
    for _ in 0..4 * grid_depth * grid_depth {
        for &(i, j) in &interior {
            let nb = lattice.neighbours(i, j);
            let mut avg = vec![0.0; field.dim()];
            for &n in &nb {
                linalg::axpy(1.0 / 6.0, &points[n], &mut avg);
            }
            points[lattice.index(i, j)] = avg;
        }
    }

    let mut plan = match (config.path.batch_size, field.sample_count()) {
        (Some(size), Some(n)) if size < n => Some(BatchPlan::new(n, size, config.path.seed)),
        _ => None,
    };
    let mut trace = Vec::with_capacity(config.triangle_epochs);
    for epoch in 0..config.triangle_epochs {
        let eta = schedule_lr(&config.path.scheduler, epoch as u64);
        let batch = plan.as_mut().map(|p| p.next().to_vec());
        let mut moves = Vec::with_capacity(interior.len());
        for &(i, j) in &interior {
            let center = &points[lattice.index(i, j)];
            let nb = lattice.neighbours(i, j).map(|n| points[n].as_slice());
            let basis = tangent_basis(center, &nb)
                .ok_or(Error::DegenerateTangent { coords: vec![i, j, grid_depth - i - j] })?;
            let mut grad = field.gradient(center, batch.as_deref());
            linalg::axpy(config.path.l2, center, &mut grad);
            for u in &basis {
                let along = linalg::dot(&grad, u);
                linalg::axpy(-along, u, &mut grad);
            }
            moves.push(grad);
        }
        let mut worst = f64::NEG_INFINITY;
        for (&(i, j), normal) in interior.iter().zip(&moves) {
            let k = lattice.index(i, j);
            linalg::axpy(-eta, normal, &mut points[k]);
            let v = field.value(&points[k], None);
            if !v.is_finite() {
                return Err(Error::Divergence { step: epoch, point: Some(k) });
            }
            worst = worst.max(v);
        }
        if !interior.is_empty() {
            trace.push(worst);
        }
    }

    let sample_points: Vec<ParamVector> = points.into_iter().map(ParamVector::from_vec_unchecked).collect();
    let filtration_value = max_loss(field, &sample_points)?;
    Ok(SampledSimplex { r: 2, vertex_ids: vec![0, 1, 2], sample_points, filtration_value, interior_trace: trace })
}
