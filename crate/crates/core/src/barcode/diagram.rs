//! Persistence diagrams and the bottleneck (W∞) distance between them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramPoint {
    pub birth: f64,
    pub death: f64,
}

impl DiagramPoint {
    pub fn new(birth: f64, death: f64) -> Self {
        Self { birth, death }
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    /// Sup-norm distance to the nearest diagonal point.
    pub fn diagonal_cost(&self) -> f64 {
        (self.death - self.birth) / 2.0
    }

    /// Sup-norm distance between two points.
    pub fn cost_to(&self, other: &DiagramPoint) -> f64 {
        (self.birth - other.birth).abs().max((self.death - other.death).abs())
    }
}

/// Finite birth-death pairs plus the births of classes that never die.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub finite: Vec<DiagramPoint>,
    pub essential: Vec<f64>,
}

impl PersistenceDiagram {
    /// Drops pairs with `death <= birth`; every value must be finite.
    pub fn new(finite: Vec<DiagramPoint>, essential: Vec<f64>) -> Result<Self> {
        if finite.iter().any(|p| !p.birth.is_finite() || !p.death.is_finite())
            || essential.iter().any(|b| !b.is_finite())
        {
            return Err(invalid("diagram values must be finite"));
        }
        let finite = finite.into_iter().filter(|p| p.death > p.birth).collect();
        Ok(Self { finite, essential })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Longest finite bar, 0 if there is none.
    pub fn max_persistence(&self) -> f64 {
        self.finite.iter().map(DiagramPoint::persistence).fold(0.0, f64::max)
    }
}

/// Maximum bipartite matching by augmenting paths; returns whether it is perfect.
fn has_perfect_matching(adjacency: &[Vec<usize>], n_right: usize) -> bool {
    fn augment(u: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &v in &adj[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if owner[v].is_none_or(|w| augment(w, adj, seen, owner)) {
                owner[v] = Some(u);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; n_right];
    let mut seen = vec![false; n_right];
    for u in 0..adjacency.len() {
        seen.iter_mut().for_each(|s| *s = false);
        if !augment(u, adjacency, &mut seen, &mut owner) {
            return false;
        }
    }
    true
}

/// Whether the finite parts of `a` and `b` admit a matching of cost `<= eps`.
///
/// Left side: points of `a`, then diagonal copies of points of `b`.
/// Right side: points of `b`, then diagonal copies of points of `a`.
fn feasible(a: &[DiagramPoint], b: &[DiagramPoint], eps: f64) -> bool {
    let (n, m) = (a.len(), b.len());
    let mut adjacency = vec![Vec::new(); n + m];
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            if p.cost_to(q) <= eps {
                adjacency[i].push(j);
            }
        }
        if p.diagonal_cost() <= eps {
            adjacency[i].push(m + i);
        }
    }
    for (j, q) in b.iter().enumerate() {
        let row = &mut adjacency[n + j];
        if q.diagonal_cost() <= eps {
            row.push(j);
        }
        row.extend(m..m + n);
    }
    has_perfect_matching(&adjacency, n + m)
}

fn finite_bottleneck(a: &[DiagramPoint], b: &[DiagramPoint]) -> f64 {
    let mut candidates: Vec<f64> = Vec::with_capacity(a.len() * b.len() + a.len() + b.len() + 1);
    candidates.push(0.0);
    candidates.extend(a.iter().chain(b).map(DiagramPoint::diagonal_cost));
    for p in a {
        candidates.extend(b.iter().map(|q| p.cost_to(q)));
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    // sending everything to the diagonal is feasible at the largest candidate
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(a, b, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

/// Bottleneck distance under the sup-norm. Essential classes are matched
/// only among themselves, by birth; unequal essential counts give `+∞`.
pub fn bottleneck_distance(a: &PersistenceDiagram, b: &PersistenceDiagram) -> f64 {
    if a.essential.len() != b.essential.len() {
        return f64::INFINITY;
    }
    let mut ea = a.essential.clone();
    let mut eb = b.essential.clone();
    ea.sort_by(f64::total_cmp);
    eb.sort_by(f64::total_cmp);
    let essential = ea.iter().zip(&eb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    essential.max(finite_bottleneck(&a.finite, &b.finite))
}
