//! Index-r barcodes from a filtered simplicial complex on the minima.
//!
//! Every pair of minima spans an optimized path (a 1-simplex) and, for
//! `r_max = 2`, every triple spans an optimized sampled triangle. Each
//! simplex is filtered by the largest loss sampled on it and the boundary
//! matrices are reduced over the two-element field.

mod simplex;

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barcode::json::extended_f64;
use crate::barcode::{bottleneck_distance, DiagramPoint, PersistenceDiagram};
use crate::error::{invalid, Error, Result};
use crate::landscape::ScalarField;
use crate::linalg;
use crate::pathopt::PathConfig;
use crate::trainer::Minimum;

pub use simplex::{optimize_simplex, SampledSimplex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MorseConfig {
    /// Step size, regularization, epochs and refinement for edges; the
    /// step size schedule and `l2` are reused for triangles.
    pub path: PathConfig,
    /// Grid depth of an edge: `edge_depth - 1` interior path points.
    pub edge_depth: usize,
    /// Barycentric grid depth of a triangle.
    pub triangle_depth: usize,
    pub triangle_epochs: usize,
}

impl Default for MorseConfig {
    fn default() -> Self {
        Self { path: PathConfig::default(), edge_depth: 8, triangle_depth: 6, triangle_epochs: 200 }
    }
}

impl MorseConfig {
    pub fn validate(&self) -> Result<()> {
        self.path.validate()?;
        if self.edge_depth < 2 {
            return Err(invalid("edge_depth must be at least 2"));
        }
        if self.triangle_depth < 1 {
            return Err(invalid("triangle_depth must be at least 1"));
        }
        Ok(())
    }
}

/// A simplex of the complex: sorted vertex positions and a filtration value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub vertices: Vec<usize>,
    pub value: f64,
}

/// Filtered simplicial complex on `n` vertices, stored by dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FiltrationComplex {
    cells: Vec<Vec<Cell>>,
    /// Minimum id of each vertex position.
    minimum_ids: Vec<usize>,
    clamped: usize,
}

fn faces(vertices: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    (0..vertices.len()).map(move |skip| {
        vertices
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != skip)
            .map(|(_, &v)| v)
            .collect()
    })
}

impl FiltrationComplex {
    /// Complex with explicit filtration values. Vertex `i` has value
    /// `vertex_values[i]`; every face of every edge and triangle must be
    /// present and the filtration must be monotone.
    pub fn from_values(
        vertex_values: Vec<f64>,
        edges: Vec<([usize; 2], f64)>,
        triangles: Vec<([usize; 3], f64)>,
    ) -> Result<Self> {
        let n = vertex_values.len();
        if n == 0 {
            return Err(invalid("a complex needs at least one vertex"));
        }
        let check = |mut vertices: Vec<usize>, value: f64| -> Result<Cell> {
            vertices.sort_unstable();
            if vertices.windows(2).any(|w| w[0] == w[1]) || vertices.iter().any(|&v| v >= n) {
                return Err(invalid(format!("simplex {vertices:?} is not made of distinct vertices below {n}")));
            }
            Ok(Cell { vertices, value })
        };
        let mut cells: Vec<Vec<Cell>> =
            vec![vertex_values.into_iter().enumerate().map(|(i, value)| Cell { vertices: vec![i], value }).collect()];
        if !edges.is_empty() || !triangles.is_empty() {
            cells.push(edges.into_iter().map(|(e, v)| check(e.to_vec(), v)).collect::<Result<_>>()?);
        }
        if !triangles.is_empty() {
            cells.push(triangles.into_iter().map(|(t, v)| check(t.to_vec(), v)).collect::<Result<_>>()?);
        }
        let complex = Self { cells, minimum_ids: (0..n).collect(), clamped: 0 };
        if complex.cells.iter().flatten().any(|c| !c.value.is_finite()) {
            return Err(invalid("filtration values must be finite"));
        }
        complex.boundary_matrices()?;
        complex.check_monotone()?;
        Ok(complex)
    }

    /// Highest simplex dimension present.
    pub fn max_dim(&self) -> usize {
        self.cells.len() - 1
    }

    pub fn cells(&self, dim: usize) -> &[Cell] {
        self.cells.get(dim).map_or(&[], Vec::as_slice)
    }

    pub fn minimum_ids(&self) -> &[usize] {
        &self.minimum_ids
    }

    /// How many filtration values were raised to the maximum of their faces.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    fn index(&self, dim: usize) -> HashMap<&[usize], usize> {
        self.cells(dim).iter().enumerate().map(|(i, c)| (c.vertices.as_slice(), i)).collect()
    }

    /// Boundary matrix of dimension `dim` over the two-element field: one
    /// column per `dim`-simplex holding the sorted indices of its faces.
    pub fn boundary(&self, dim: usize) -> Result<Vec<Vec<usize>>> {
        if dim == 0 {
            return Ok(vec![Vec::new(); self.cells(0).len()]);
        }
        let lower = self.index(dim - 1);
        self.cells(dim)
            .iter()
            .map(|c| {
                let mut column = faces(&c.vertices)
                    .map(|f| {
                        lower
                            .get(f.as_slice())
                            .copied()
                            .ok_or_else(|| invalid(format!("face {f:?} of {:?} is missing", c.vertices)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                column.sort_unstable();
                Ok(column)
            })
            .collect()
    }

    fn boundary_matrices(&self) -> Result<Vec<Vec<Vec<usize>>>> {
        (0..=self.max_dim()).map(|d| self.boundary(d)).collect()
    }

    /// Whether `∂_{d} ∘ ∂_{d+1}` vanishes for every `d`.
    pub fn boundary_squares_to_zero(&self) -> Result<bool> {
        let matrices = self.boundary_matrices()?;
        for d in 1..matrices.len().saturating_sub(1) {
            for column in &matrices[d + 1] {
                let mut image: Vec<usize> = Vec::new();
                for &face in column {
                    image = xor_sorted(&image, &matrices[d][face]);
                }
                if !image.is_empty() {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn check_monotone(&self) -> Result<()> {
        for d in 1..=self.max_dim() {
            let lower = self.index(d - 1);
            for c in self.cells(d) {
                for f in faces(&c.vertices) {
                    let face = &self.cells[d - 1][lower[f.as_slice()]];
                    if face.value > c.value {
                        return Err(Error::NonMonotoneFiltration {
                            face: face.vertices.clone(),
                            face_value: face.value,
                            coface: c.vertices.clone(),
                            coface_value: c.value,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest filtration value among the faces of `cell`.
    fn faces_max(&self, dim: usize, cell: &Cell) -> f64 {
        let lower = self.index(dim - 1);
        faces(&cell.vertices)
            .map(|f| self.cells[dim - 1][lower[f.as_slice()]].value)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Symmetric difference of two sorted index lists.
fn xor_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
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

/// Full `r_max`-skeleton on `minima`. Edges are optimized first, then
/// triangles with their edges frozen. A triangle whose sampled maximum
/// falls below one of its edges is raised to that edge's value.
pub fn build_complex<F: ScalarField + ?Sized>(
    minima: &[Minimum],
    field: &F,
    r_max: usize,
    config: &MorseConfig,
) -> Result<FiltrationComplex> {
    if !(1..=2).contains(&r_max) {
        return Err(invalid("r_max must be 1 or 2"));
    }
    if minima.len() < r_max + 1 {
        return Err(invalid(format!("r_max = {r_max} needs at least {} minima", r_max + 1)));
    }
    config.validate()?;
    let n = minima.len();
    let pairs: Vec<[usize; 2]> = (0..n).flat_map(|a| (a + 1..n).map(move |b| [a, b])).collect();
    let edges: Vec<SampledSimplex> = pairs
        .par_iter()
        .map(|&[a, b]| {
            let mut cfg = config.clone();
            cfg.path.seed = linalg::mix_seed(config.path.seed, &[a as u64, b as u64]);
            let mut s = optimize_simplex(field, &[&minima[a], &minima[b]], config.edge_depth, &cfg)?;
            s.vertex_ids = vec![a, b];
            Ok(s)
        })
        .collect::<Result<_>>()?;

    let mut complex = FiltrationComplex {
        cells: vec![
            minima.iter().enumerate().map(|(i, m)| Cell { vertices: vec![i], value: m.loss }).collect(),
            edges.iter().map(|s| Cell { vertices: s.vertex_ids.clone(), value: s.filtration_value }).collect(),
        ],
        minimum_ids: (0..n).collect(),
        clamped: 0,
    };
    clamp_dimension(&mut complex, 1);

    if r_max == 2 {
        let edge_at: HashMap<[usize; 2], &SampledSimplex> = pairs.iter().copied().zip(&edges).collect();
        let triples: Vec<[usize; 3]> = (0..n)
            .flat_map(|a| (a + 1..n).flat_map(move |b| (b + 1..n).map(move |c| [a, b, c])))
            .collect();
        let triangles: Vec<SampledSimplex> = triples
            .par_iter()
            .map(|&[a, b, c]| {
                let mut cfg = config.clone();
                cfg.path.seed = linalg::mix_seed(config.path.seed, &[a as u64, b as u64, c as u64]);
                let mut s = simplex::optimize_triangle(
                    field,
                    [&edge_at[&[a, b]], &edge_at[&[a, c]], &edge_at[&[b, c]]],
                    config.triangle_depth,
                    &cfg,
                )?;
                s.vertex_ids = vec![a, b, c];
                Ok(s)
            })
            .collect::<Result<_>>()?;
        complex
            .cells
            .push(triangles.iter().map(|s| Cell { vertices: s.vertex_ids.clone(), value: s.filtration_value }).collect());
        clamp_dimension(&mut complex, 2);
    }
    complex.check_monotone()?;
    Ok(complex)
}

fn clamp_dimension(complex: &mut FiltrationComplex, dim: usize) {
    let floors: Vec<f64> = complex.cells[dim].iter().map(|c| complex.faces_max(dim, c)).collect();
    for (cell, floor) in complex.cells[dim].iter_mut().zip(floors) {
        if cell.value < floor {
            log::debug!("clamping {:?} from {} up to {floor}", cell.vertices, cell.value);
            cell.value = floor;
            complex.clamped += 1;
        }
    }
}

/// Persistence diagrams of dimensions `0..=max_dim` by standard column
/// reduction in filtration order (value, then dimension, then index).
pub fn reduce(complex: &FiltrationComplex) -> Result<Vec<PersistenceDiagram>> {
    complex.check_monotone()?;
    let boundaries = complex.boundary_matrices()?;
    let mut order: Vec<(usize, usize)> =
        (0..=complex.max_dim()).flat_map(|d| (0..complex.cells(d).len()).map(move |i| (d, i))).collect();
    order.sort_by(|&(da, ia), &(db, ib)| {
        complex.cells[da][ia].value.total_cmp(&complex.cells[db][ib].value).then(da.cmp(&db)).then(ia.cmp(&ib))
    });
    let mut position: Vec<Vec<usize>> = complex.cells.iter().map(|c| vec![0; c.len()]).collect();
    for (k, &(d, i)) in order.iter().enumerate() {
        position[d][i] = k;
    }

    let mut pivot_of: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut killed = vec![false; order.len()];
    let mut finite: Vec<Vec<DiagramPoint>> = vec![Vec::new(); complex.max_dim() + 1];
    let mut positive = vec![false; order.len()];
    for (k, &(d, i)) in order.iter().enumerate() {
        let mut column: Vec<usize> = if d == 0 {
            Vec::new()
        } else {
            let mut c: Vec<usize> = boundaries[d][i].iter().map(|&f| position[d - 1][f]).collect();
            c.sort_unstable();
            c
        };
        while let Some(&low) = column.last() {
            match pivot_of.get(&low) {
                Some(other) => column = xor_sorted(&column, other),
                None => break,
            }
        }
        match column.last() {
            Some(&low) => {
                killed[low] = true;
                let (bd, bi) = order[low];
                finite[bd].push(DiagramPoint::new(complex.cells[bd][bi].value, complex.cells[d][i].value));
                pivot_of.insert(low, column);
            }
            None => positive[k] = true,
        }
    }
    let mut essential: Vec<Vec<f64>> = vec![Vec::new(); complex.max_dim() + 1];
    for (k, &(d, i)) in order.iter().enumerate() {
        if positive[k] && !killed[k] {
            essential[d].push(complex.cells[d][i].value);
        }
    }
    finite
        .into_iter()
        .zip(essential)
        .map(|(f, e)| PersistenceDiagram::new(f, e))
        .collect()
}

/// Index-`r` TO-score. For `r = 0` this is the bottleneck distance to a
/// single essential class at the lowest birth; for `r >= 1` it is half the
/// longest finite dimension-`r` bar. Essential classes of dimension `r >= 1`
/// are left out: they only appear when the skeleton stops at dimension `r`.
pub fn index_r_to_score(diagrams: &[PersistenceDiagram], r: usize) -> Result<f64> {
    let d = diagrams
        .get(r)
        .ok_or_else(|| invalid(format!("no diagram of dimension {r} (have {})", diagrams.len())))?;
    if r == 0 {
        let lowest = d.essential.iter().copied().fold(f64::INFINITY, f64::min);
        if !lowest.is_finite() {
            return Err(invalid("dimension-0 diagram has no essential class"));
        }
        let ideal = PersistenceDiagram::new(Vec::new(), vec![lowest])?;
        return Ok(bottleneck_distance(d, &ideal));
    }
    Ok(d.max_persistence() / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EssentialPoint {
    #[serde(with = "extended_f64")]
    pub birth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinitePoint {
    #[serde(with = "extended_f64")]
    pub birth: f64,
    #[serde(with = "extended_f64")]
    pub death: f64,
}

/// One diagram in the barcode layout, tagged with its dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionDiagram {
    pub dimension: usize,
    pub essential: Vec<EssentialPoint>,
    pub segments: Vec<FinitePoint>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MorseMeta {
    pub field: String,
    pub seed: u64,
    pub minimum_ids: Vec<usize>,
    pub clamped: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<MorseConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagramsFile {
    pub diagrams: Vec<DimensionDiagram>,
    #[serde(default)]
    pub meta: MorseMeta,
}

impl DiagramsFile {
    pub fn new(diagrams: &[PersistenceDiagram], meta: MorseMeta) -> Self {
        let diagrams = diagrams
            .iter()
            .enumerate()
            .map(|(dimension, d)| DimensionDiagram {
                dimension,
                essential: d.essential.iter().map(|&birth| EssentialPoint { birth }).collect(),
                segments: d.finite.iter().map(|p| FinitePoint { birth: p.birth, death: p.death }).collect(),
            })
            .collect();
        Self { diagrams, meta }
    }

    pub fn to_diagrams(&self) -> Result<Vec<PersistenceDiagram>> {
        let mut sorted: Vec<&DimensionDiagram> = self.diagrams.iter().collect();
        sorted.sort_by_key(|d| d.dimension);
        if sorted.iter().enumerate().any(|(i, d)| d.dimension != i) {
            return Err(invalid("diagram dimensions must be 0, 1, ... without gaps"));
        }
        sorted
            .into_iter()
            .map(|d| {
                PersistenceDiagram::new(
                    d.segments.iter().map(|p| DiagramPoint::new(p.birth, p.death)).collect(),
                    d.essential.iter().map(|e| e.birth).collect(),
                )
            })
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests;
