//! TOML run configuration. Unknown keys are rejected and relative paths are
//! resolved against the directory holding the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use lossbar::landscape::{load_dataset, make_builtin, make_mlp_field, two_moons, Activation, BuiltinField, Dataset, MlpSpec};
use lossbar::morse::MorseConfig;
use lossbar::pathopt::PathConfig;
use lossbar::trainer::DescentConfig;
use lossbar::ScalarField;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub field: Option<FieldConfig>,
    #[serde(default)]
    pub minima: MinimaConfig,
    #[serde(default)]
    pub descent: DescentConfig,
    #[serde(default)]
    pub path: PathConfig,
    #[serde(default)]
    pub endpoints: Endpoints,
    #[serde(default)]
    pub barcode: BarcodeSection,
    #[serde(default)]
    pub morse: MorseSection,
    #[serde(default)]
    pub compare: CompareConfig,
    pub depth_study: Option<DepthStudyConfig>,

    /// Directory the config was read from.
    #[serde(skip)]
    pub base: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub builtin: Option<String>,
    /// Seed of a seeded builtin; defaults to the run seed.
    pub seed: Option<u64>,
    pub mlp: Option<MlpConfig>,
    pub dataset: Option<PathBuf>,
    pub two_moons: Option<TwoMoons>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    pub layers: Vec<usize>,
    pub activation: Activation,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoMoons {
    pub samples: usize,
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimaConfig {
    pub count: Option<usize>,
    pub init_scale: Option<f64>,
    /// Minima file read by `path`, `barcode` and `morse`.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Endpoints {
    pub from: usize,
    pub to: usize,
}

impl Default for Endpoints {
    fn default() -> Self {
        Self { from: 0, to: 1 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarcodeSection {
    pub k_nearest_lower: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MorseSection {
    pub r_max: usize,
    pub edge_depth: usize,
    pub triangle_depth: usize,
    pub triangle_epochs: usize,
}

impl Default for MorseSection {
    fn default() -> Self {
        let d = MorseConfig::default();
        Self { r_max: 2, edge_depth: d.edge_depth, triangle_depth: d.triangle_depth, triangle_epochs: d.triangle_epochs }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    /// Grid points per axis; 4097 for 1-D and 512 for 2-D fields when unset.
    pub resolution: Option<usize>,
    pub tolerance: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self { resolution: None, tolerance: 0.05 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthStudyConfig {
    pub layers: Vec<Vec<usize>>,
    pub activation: Activation,
    #[serde(default = "default_study_count")]
    pub count: usize,
    #[serde(default = "default_study_scale")]
    pub init_scale: f64,
    pub dataset: Option<PathBuf>,
    pub two_moons: Option<TwoMoons>,
}

fn default_study_count() -> usize {
    5
}

fn default_study_scale() -> f64 {
    1.0
}

/// A constructed landscape with the defaults that depend on its kind.
pub struct Field {
    pub inner: Box<dyn ScalarField>,
    pub builtin: Option<BuiltinField>,
    pub name: String,
    pub seed: u64,
    pub default_scale: f64,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        config.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    /// Configuration used when no file is given.
    pub fn empty() -> Self {
        toml::from_str("").expect("empty config parses")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.as_deref().map(|p| self.resolve(p)).unwrap_or_else(|| self.base.clone())
    }

    /// Path settings with the run seed.
    pub fn path_config(&self) -> PathConfig {
        PathConfig { seed: self.seed, ..self.path.clone() }
    }

    pub fn morse_config(&self) -> MorseConfig {
        MorseConfig {
            path: self.path_config(),
            edge_depth: self.morse.edge_depth,
            triangle_depth: self.morse.triangle_depth,
            triangle_epochs: self.morse.triangle_epochs,
        }
    }

    pub fn field(&self) -> CliResult<Field> {
        let f = self.field.as_ref().ok_or_else(|| CliError::config("missing [field] section"))?;
        match (&f.builtin, &f.mlp) {
            (Some(name), None) => {
                let seed = f.seed.unwrap_or(self.seed);
                let builtin = make_builtin(name, seed)?;
                let half = builtin.default_box().iter().map(|&(lo, hi)| (hi - lo) / 2.0).fold(0.0, f64::max);
                Ok(Field {
                    inner: Box::new(builtin.clone()),
                    name: builtin.describe(),
                    builtin: Some(builtin),
                    seed,
                    default_scale: half,
                })
            }
            (None, Some(mlp)) => {
                let data = self.dataset(&f.dataset, &f.two_moons, "field.dataset")?;
                let spec = MlpSpec::new(mlp.layers.clone(), mlp.activation)?;
                let field = make_mlp_field(spec, Arc::new(data), None)?;
                Ok(Field { name: field.describe(), inner: Box::new(field), builtin: None, seed: self.seed, default_scale: 1.0 })
            }
            _ => Err(CliError::config("[field] needs exactly one of `builtin` or `mlp`")),
        }
    }

    /// A CSV dataset or generated two-moons samples; `key` names the path key in messages.
    pub fn dataset(&self, csv: &Option<PathBuf>, moons: &Option<TwoMoons>, key: &str) -> CliResult<Dataset> {
        match (csv, moons) {
            (Some(p), None) => Ok(load_dataset(self.resolve(p))?),
            (None, Some(m)) => Ok(two_moons(m.samples, m.noise, m.seed)?),
            (None, None) => Err(CliError::config(format!("missing `{key}` (a CSV path) or a two_moons table"))),
            (Some(_), Some(_)) => Err(CliError::config(format!("`{key}` and two_moons are mutually exclusive"))),
        }
    }
}
