//! Analytic benchmark landscapes with known critical points.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ScalarField;
use crate::error::{Error, Result};
use crate::linalg;

/// `f(x) = x^4 - x^2`. Minima at `±1/√2` with value `-1/4`, hump `f(0) = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleWell;

impl ScalarField for DoubleWell {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, theta: &[f64], _batch: Option<&[usize]>) -> f64 {
        let x2 = theta[0] * theta[0];
        x2 * x2 - x2
    }

    fn gradient(&self, theta: &[f64], _batch: Option<&[usize]>) -> Vec<f64> {
        let x = theta[0];
        vec![4.0 * x * x * x - 2.0 * x]
    }

    fn describe(&self) -> String {
        "double_well_1d".into()
    }
}

/// `f(θ) = ½‖θ‖²`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticBowl {
    dim: usize,
}

impl QuadraticBowl {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "quadratic bowl needs dim >= 1");
        Self { dim }
    }
}

impl ScalarField for QuadraticBowl {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, theta: &[f64], _batch: Option<&[usize]>) -> f64 {
        0.5 * linalg::dot(theta, theta)
    }

    fn gradient(&self, theta: &[f64], _batch: Option<&[usize]>) -> Vec<f64> {
        theta.to_vec()
    }

    fn describe(&self) -> String {
        format!("quadratic_bowl_{}d", self.dim)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub depth: f64,
    pub width: f64,
}

/// Confining quadratic minus a sum of Gaussian wells:
/// `f(x) = c‖x‖² - Σ d_k exp(-‖x - μ_k‖² / (2σ_k²))`.
///
/// Seeded construction rejects draws until every well yields its own local
/// minimum, no other minima exist, and the sorted minimum values are at least
/// [`GaussianMixture::MIN_LEVEL_GAP`] apart.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    seed: u64,
    confinement: f64,
    bumps: Vec<Bump>,
    minima: Vec<([f64; 2], f64)>,
}

impl GaussianMixture {
    pub const MIN_LEVEL_GAP: f64 = 0.05;
    /// Half-width of the square the landscape is studied on.
    pub const HALF_WIDTH: f64 = 4.0;
    const CONFINEMENT: f64 = 0.15;
    const CENTER_RANGE: f64 = 2.5;
    const MIN_SEPARATION: f64 = 1.6;

    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let Some(bumps) = Self::draw_bumps(&mut rng) else {
                continue;
            };
            let mut field = Self {
                seed,
                confinement: Self::CONFINEMENT,
                bumps,
                minima: Vec::new(),
            };
            if let Some(minima) = field.validated_minima() {
                field.minima = minima;
                return field;
            }
        }
    }

    fn draw_bumps(rng: &mut ChaCha8Rng) -> Option<Vec<Bump>> {
        let count = rng.random_range(3..=6);
        let mut bumps: Vec<Bump> = Vec::with_capacity(count);
        let mut tries = 0;
        while bumps.len() < count {
            tries += 1;
            if tries > 1000 {
                return None;
            }
            let r = Self::CENTER_RANGE;
            let center = [rng.random_range(-r..r), rng.random_range(-r..r)];
            if bumps
                .iter()
                .any(|b| linalg::distance(&b.center, &center) < Self::MIN_SEPARATION)
            {
                continue;
            }
            bumps.push(Bump {
                center,
                depth: rng.random_range(0.8..2.0),
                width: rng.random_range(0.45..0.75),
            });
        }
        Some(bumps)
    }

    /// Locates all local minima by descent from a lattice of starts.
    fn validated_minima(&self) -> Option<Vec<([f64; 2], f64)>> {
        const STARTS: usize = 16;
        let h = Self::HALF_WIDTH;
        let mut found: Vec<[f64; 2]> = Vec::new();
        let starts = (0..STARTS * STARTS).map(|k| {
            let (i, j) = (k / STARTS, k % STARTS);
            let t = |m: usize| -h + 2.0 * h * (m as f64 + 0.5) / STARTS as f64;
            [t(i), t(j)]
        });
        for start in starts.chain(self.bumps.iter().map(|b| b.center)) {
            let x = self.descend(start)?;
            if !found.iter().any(|m| linalg::distance(m, &x) < 1e-4) {
                found.push(x);
            }
        }
        if found.len() != self.bumps.len() {
            return None;
        }
        if found.iter().any(|m| m[0].abs() > 0.9 * h || m[1].abs() > 0.9 * h) {
            return None;
        }
        let mut minima: Vec<([f64; 2], f64)> =
            found.into_iter().map(|m| (m, self.value(&m, None))).collect();
        minima.sort_by(|a, b| a.1.total_cmp(&b.1));
        if minima
            .windows(2)
            .any(|w| w[1].1 - w[0].1 < Self::MIN_LEVEL_GAP)
        {
            return None;
        }
        Some(minima)
    }

    fn descend(&self, start: [f64; 2]) -> Option<[f64; 2]> {
        let mut x = start;
        for _ in 0..20_000 {
            let g = self.gradient(&x, None);
            if linalg::norm(&g) < 1e-10 {
                return Some(x);
            }
            x[0] -= 0.05 * g[0];
            x[1] -= 0.05 * g[1];
        }
        None
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    /// Local minima found at construction, sorted by value.
    pub fn known_minima(&self) -> &[([f64; 2], f64)] {
        &self.minima
    }
}

impl ScalarField for GaussianMixture {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, theta: &[f64], _batch: Option<&[usize]>) -> f64 {
        let mut v = self.confinement * linalg::dot(theta, theta);
        for b in &self.bumps {
            let dx = theta[0] - b.center[0];
            let dy = theta[1] - b.center[1];
            v -= b.depth * (-(dx * dx + dy * dy) / (2.0 * b.width * b.width)).exp();
        }
        v
    }

    fn gradient(&self, theta: &[f64], _batch: Option<&[usize]>) -> Vec<f64> {
        let mut g = vec![2.0 * self.confinement * theta[0], 2.0 * self.confinement * theta[1]];
        for b in &self.bumps {
            let dx = theta[0] - b.center[0];
            let dy = theta[1] - b.center[1];
            let s2 = b.width * b.width;
            let w = b.depth * (-(dx * dx + dy * dy) / (2.0 * s2)).exp() / s2;
            g[0] += w * dx;
            g[1] += w * dy;
        }
        g
    }

    fn describe(&self) -> String {
        format!("gaussian_mixture_2d(seed={})", self.seed)
    }
}

/// Names of the analytic landscapes exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    #[serde(rename = "double_well_1d")]
    DoubleWell1d,
    #[serde(rename = "gaussian_mixture_2d")]
    GaussianMixture2d,
    QuadraticBowl,
}

impl Builtin {
    pub const ALL: [Builtin; 3] = [
        Builtin::DoubleWell1d,
        Builtin::GaussianMixture2d,
        Builtin::QuadraticBowl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::DoubleWell1d => "double_well_1d",
            Builtin::GaussianMixture2d => "gaussian_mixture_2d",
            Builtin::QuadraticBowl => "quadratic_bowl",
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::UnknownBuiltin(s.to_string()))
    }
}

/// One of the analytic landscapes, constructed by [`make_builtin`].
#[derive(Debug, Clone)]
pub enum BuiltinField {
    DoubleWell(DoubleWell),
    GaussianMixture(GaussianMixture),
    QuadraticBowl(QuadraticBowl),
}

impl BuiltinField {
    /// Axis-aligned box containing every minimum and saddle of the landscape.
    pub fn default_box(&self) -> Vec<(f64, f64)> {
        match self {
            BuiltinField::DoubleWell(_) => vec![(-2.0, 2.0)],
            BuiltinField::GaussianMixture(_) => {
                let h = GaussianMixture::HALF_WIDTH;
                vec![(-h, h); 2]
            }
            BuiltinField::QuadraticBowl(q) => vec![(-2.0, 2.0); q.dim],
        }
    }

    fn inner(&self) -> &dyn ScalarField {
        match self {
            BuiltinField::DoubleWell(f) => f,
            BuiltinField::GaussianMixture(f) => f,
            BuiltinField::QuadraticBowl(f) => f,
        }
    }
}

impl ScalarField for BuiltinField {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn value(&self, theta: &[f64], batch: Option<&[usize]>) -> f64 {
        self.inner().value(theta, batch)
    }
    fn gradient(&self, theta: &[f64], batch: Option<&[usize]>) -> Vec<f64> {
        self.inner().gradient(theta, batch)
    }
    fn describe(&self) -> String {
        self.inner().describe()
    }
}

/// Builds a named analytic landscape. `seed` only affects the Gaussian mixture;
/// the quadratic bowl is two-dimensional.
pub fn make_builtin(name: &str, seed: u64) -> Result<BuiltinField> {
    Ok(match name.parse::<Builtin>()? {
        Builtin::DoubleWell1d => BuiltinField::DoubleWell(DoubleWell),
        Builtin::GaussianMixture2d => BuiltinField::GaussianMixture(GaussianMixture::new(seed)),
        Builtin::QuadraticBowl => BuiltinField::QuadraticBowl(QuadraticBowl::new(2)),
    })
}
