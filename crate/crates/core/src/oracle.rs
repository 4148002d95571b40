//! Ground truth for low-dimensional landscapes.
//!
//! [`grid_sample`] discretizes a 1-D or 2-D field on a lattice and
//! [`sublevel_persistence`] computes its sublevel-set persistence exactly on
//! that lattice. [`brute_bottleneck`] evaluates the bottleneck distance by
//! enumerating every partial matching. Both are deliberately independent of
//! the path-based pipeline they are used to check.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barcode::{DiagramPoint, PersistenceDiagram};
use crate::error::{invalid, Error, Result};
use crate::landscape::ScalarField;

/// Field values on a regular lattice. Axis 0 varies slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    values: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    resolution: Vec<usize>,
}

impl ScalarGrid {
    pub fn new(values: Vec<f64>, bounds: Vec<(f64, f64)>, resolution: Vec<usize>) -> Result<Self> {
        if bounds.len() != resolution.len() || !(1..=2).contains(&bounds.len()) {
            return Err(invalid("grids are 1- or 2-dimensional with one bound and resolution per axis"));
        }
        if resolution.iter().any(|&r| r < 2) {
            return Err(invalid("resolution must be at least 2 per axis"));
        }
        if bounds.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return Err(invalid("each axis needs finite bounds with min < max"));
        }
        if values.len() != resolution.iter().product::<usize>() {
            return Err(invalid("value count does not match the resolution"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid values must be finite"));
        }
        Ok(Self { values, bounds, resolution })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn ndim(&self) -> usize {
        self.resolution.len()
    }

    /// Lattice spacing per axis.
    pub fn spacing(&self) -> Vec<f64> {
        self.bounds
            .iter()
            .zip(&self.resolution)
            .map(|(&(lo, hi), &r)| (hi - lo) / (r - 1) as f64)
            .collect()
    }

    pub fn coordinate(&self, axis: usize, index: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        let r = self.resolution[axis];
        if index + 1 == r {
            hi
        } else {
            lo + (hi - lo) * index as f64 / (r - 1) as f64
        }
    }
}

/// Evaluates `field` at every lattice point of the box.
pub fn grid_sample<F: ScalarField + ?Sized>(
    field: &F,
    bounds: &[(f64, f64)],
    resolution: &[usize],
) -> Result<ScalarGrid> {
    if field.dim() != bounds.len() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: bounds.len() });
    }
    let shape = ScalarGrid::new(vec![0.0; resolution.iter().product()], bounds.to_vec(), resolution.to_vec())?;
    let row_len = if shape.ndim() == 2 { resolution[1] } else { 1 };
    let rows: Vec<Vec<f64>> = (0..resolution[0])
        .into_par_iter()
        .map(|i| {
            (0..row_len)
                .map(|j| {
                    let (theta, coords) = if shape.ndim() == 2 {
                        (vec![shape.coordinate(0, i), shape.coordinate(1, j)], vec![i, j])
                    } else {
                        (vec![shape.coordinate(0, i)], vec![i])
                    };
                    let v = field.value(&theta, None);
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::GridPoint { coords, theta })
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    ScalarGrid::new(rows.concat(), bounds.to_vec(), resolution.to_vec())
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Neighbours of vertex `v`: 2 in 1-D, 4 in 2-D.
fn neighbours(grid: &ScalarGrid, v: usize, out: &mut Vec<usize>) {
    out.clear();
    if grid.ndim() == 1 {
        if v > 0 {
            out.push(v - 1);
        }
        if v + 1 < grid.resolution[0] {
            out.push(v + 1);
        }
        return;
    }
    let cols = grid.resolution[1];
    let (i, j) = (v / cols, v % cols);
    if i > 0 {
        out.push(v - cols);
    }
    if i + 1 < grid.resolution[0] {
        out.push(v + cols);
    }
    if j > 0 {
        out.push(v - 1);
    }
    if j + 1 < cols {
        out.push(v + 1);
    }
}

/// Vertices in filtration order: by value, ties by lattice index.
fn vertex_order(grid: &ScalarGrid) -> Vec<usize> {
    let mut order: Vec<usize> = (0..grid.values.len()).collect();
    order.sort_by(|&a, &b| grid.values[a].total_cmp(&grid.values[b]).then(a.cmp(&b)));
    order
}

fn zero_dim(grid: &ScalarGrid, order: &[usize]) -> PersistenceDiagram {
    let n = grid.values.len();
    let mut rank = vec![0; n];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }
    let mut uf = UnionFind::new(n);
    let mut active = vec![false; n];
    let mut pairs = Vec::new();
    let mut nbrs = Vec::with_capacity(4);
    for &v in order {
        active[v] = true;
        neighbours(grid, v, &mut nbrs);
        for &u in &nbrs {
            if !active[u] {
                continue;
            }
            let (ru, rv) = (uf.find(u), uf.find(v));
            if ru == rv {
                continue;
            }
            // roots are always the oldest vertex of their component
            let (elder, younger) = if rank[ru] < rank[rv] { (ru, rv) } else { (rv, ru) };
            pairs.push(DiagramPoint::new(grid.values[younger], grid.values[v]));
            uf.parent[younger] = elder;
        }
    }
    let essential = vec![grid.values[order[0]]];
    PersistenceDiagram::new(pairs, essential).expect("finite grid values")
}

/// Symmetric difference of two sorted index lists.
fn xor_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Dimension-1 persistence of the lower-star filtration on the cubical
/// complex of a 2-D grid, by reducing the square-to-edge boundary matrix.
fn one_dim(grid: &ScalarGrid) -> PersistenceDiagram {
    let (rows, cols) = (grid.resolution[0], grid.resolution[1]);
    let val = &grid.values;
    let h_edges = rows * (cols - 1);
    let edge_vertices = |e: usize| -> (usize, usize) {
        if e < h_edges {
            let (i, j) = (e / (cols - 1), e % (cols - 1));
            (i * cols + j, i * cols + j + 1)
        } else {
            let e = e - h_edges;
            let (i, j) = (e / cols, e % cols);
            (i * cols + j, (i + 1) * cols + j)
        }
    };
    let n_edges = h_edges + (rows - 1) * cols;
    let edge_value = |e: usize| {
        let (a, b) = edge_vertices(e);
        val[a].max(val[b])
    };
    let mut edge_order: Vec<usize> = (0..n_edges).collect();
    edge_order.sort_by(|&a, &b| edge_value(a).total_cmp(&edge_value(b)).then(a.cmp(&b)));
    let mut edge_rank = vec![0u32; n_edges];
    for (r, &e) in edge_order.iter().enumerate() {
        edge_rank[e] = r as u32;
    }

    let n_squares = (rows - 1) * (cols - 1);
    let square_value = |s: usize| {
        let (i, j) = (s / (cols - 1), s % (cols - 1));
        let v = i * cols + j;
        val[v].max(val[v + 1]).max(val[v + cols]).max(val[v + cols + 1])
    };
    let mut square_order: Vec<usize> = (0..n_squares).collect();
    square_order.sort_by(|&a, &b| square_value(a).total_cmp(&square_value(b)).then(a.cmp(&b)));

    let mut pivots: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut pairs = Vec::new();
    for &s in &square_order {
        let (i, j) = (s / (cols - 1), s % (cols - 1));
        let top = i * (cols - 1) + j;
        let bottom = (i + 1) * (cols - 1) + j;
        let left = h_edges + i * cols + j;
        let right = left + 1;
        let mut column: Vec<u32> = [top, bottom, left, right].iter().map(|&e| edge_rank[e]).collect();
        column.sort_unstable();
        while let Some(&low) = column.last() {
            match pivots.get(&low) {
                Some(other) => column = xor_sorted(&column, other),
                None => break,
            }
        }
        if let Some(&low) = column.last() {
            pairs.push(DiagramPoint::new(edge_value(edge_order[low as usize]), square_value(s)));
            pivots.insert(low, column);
        }
    }
    PersistenceDiagram::new(pairs, Vec::new()).expect("finite grid values")
}

/// Sublevel-set persistence of the grid: dimension 0 always, dimension 1
/// for 2-D grids.
pub fn sublevel_persistence(grid: &ScalarGrid) -> Vec<PersistenceDiagram> {
    let order = vertex_order(grid);
    let mut out = vec![zero_dim(grid, &order)];
    if grid.ndim() == 2 {
        out.push(one_dim(grid));
    }
    out
}

/// Largest diagram the brute-force matcher accepts, per side.
pub const BRUTE_FORCE_LIMIT: usize = 8;

fn sup_cost(a: &DiagramPoint, b: &DiagramPoint) -> f64 {
    (a.birth - b.birth).abs().max((a.death - b.death).abs())
}

fn half_persistence(p: &DiagramPoint) -> f64 {
    (p.death - p.birth) / 2.0
}

/// Tries every assignment of `a[i..]` to an unused point of `b` or the diagonal.
fn enumerate_finite(a: &[DiagramPoint], b: &[DiagramPoint], i: usize, used: &mut [bool], worst: f64, best: &mut f64) {
    if worst >= *best {
        return;
    }
    if i == a.len() {
        let rest = b
            .iter()
            .zip(used.iter())
            .filter(|(_, &u)| !u)
            .map(|(q, _)| half_persistence(q))
            .fold(worst, f64::max);
        *best = best.min(rest);
        return;
    }
    enumerate_finite(a, b, i + 1, used, worst.max(half_persistence(&a[i])), best);
    for j in 0..b.len() {
        if !used[j] {
            used[j] = true;
            enumerate_finite(a, b, i + 1, used, worst.max(sup_cost(&a[i], &b[j])), best);
            used[j] = false;
        }
    }
}

fn enumerate_essential(a: &[f64], b: &[f64], i: usize, used: &mut [bool], worst: f64, best: &mut f64) {
    if i == a.len() {
        *best = best.min(worst);
        return;
    }
    for j in 0..b.len() {
        if !used[j] {
            used[j] = true;
            enumerate_essential(a, b, i + 1, used, worst.max((a[i] - b[j]).abs()), best);
            used[j] = false;
        }
    }
}

/// Bottleneck distance by exhaustive enumeration of partial matchings.
pub fn brute_bottleneck(a: &PersistenceDiagram, b: &PersistenceDiagram) -> Result<f64> {
    for d in [a, b] {
        let size = d.finite.len().max(d.essential.len());
        if size > BRUTE_FORCE_LIMIT {
            return Err(Error::TooLarge { size, limit: BRUTE_FORCE_LIMIT });
        }
    }
    if a.essential.len() != b.essential.len() {
        return Ok(f64::INFINITY);
    }
    let mut essential = f64::INFINITY;
    enumerate_essential(&a.essential, &b.essential, 0, &mut vec![false; b.essential.len()], 0.0, &mut essential);
    let mut finite = f64::INFINITY;
    enumerate_finite(&a.finite, &b.finite, 0, &mut vec![false; b.finite.len()], 0.0, &mut finite);
    Ok(essential.max(finite))
}

#[derive(Serialize, Deserialize)]
struct GridSidecar {
    bounds: Vec<(f64, f64)>,
    resolution: Vec<usize>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Writes the values as little-endian `f64`s to `path` and the box and
/// resolution to `path.json`.
pub fn save_grid(grid: &ScalarGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = grid.values.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, bytes)?;
    let sidecar = GridSidecar { bounds: grid.bounds.clone(), resolution: grid.resolution.clone() };
    std::fs::write(sidecar_path(path), serde_json::to_string(&sidecar)?)?;
    Ok(())
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<ScalarGrid> {
    let path = path.as_ref();
    let sidecar: GridSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    let bytes = std::fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(invalid("grid file length is not a multiple of 8 bytes"));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    ScalarGrid::new(values, sidecar.bounds, sidecar.resolution)
}
